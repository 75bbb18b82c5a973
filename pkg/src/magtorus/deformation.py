"""Taylor-in-t jet of the evolution flow that deforms Liouville data.

The unknown is ``U = (lam, u0, f, g)``.  Its flow reads

    lam_t = (g lam)_x + (f lam)_y
    u0_t  = g (u0 - 2 lam)_x - 2 lam g_x + f (u0 + 2 lam)_y + 2 lam f_y
    f_t   = 2 u0_y
    g_t   = -2 u0_x

Every right-hand side is bilinear in ``(U, dU)`` apart from the two
linear rows, so writing ``U = sum_k U_k t^k`` gives the recursion

    (k+1) U_{k+1} = sum_{i+j=k} B(U_i, dU_j) + L(U_k)

which :func:`ck_jet` evaluates pseudo-spectrally, one order at a time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft

from .errors import ConfigError, PositivityViolation
from .fields import (
    TWO_PI,
    Field2,
    coeffs_to_grid,
    cosine_polynomial_x,
    cosine_polynomial_y,
    dx,
    dy,
    grid_to_coeffs,
    linear_combine,
    max_norm,
    mul,
    spectrum_from_list,
    spectrum_to_list,
)

DEFAULT_LAM1 = (1.0, 0.1)
DEFAULT_LAM2 = (1.0, 0.1)
DEFAULT_ORDER = 12
DEFAULT_BAND = 64
DEFAULT_T = 0.01
VERIFY_GRID = 128
TAIL_TOL = 1e-9

COMPONENTS = ("lam", "u0", "f", "g")


def _cosine_values(coeffs, s, deriv=0):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for k, a in enumerate(coeffs):
        w = TWO_PI * k
        if deriv == 0:
            out += a * np.cos(w * s)
        elif deriv == 1:
            out -= a * w * np.sin(w * s)
        elif deriv == 2:
            out -= a * w * w * np.cos(w * s)
        else:
            raise ValueError("deriv must be 0, 1 or 2")
    return out


@dataclass(frozen=True)
class LiouvilleData:
    """Separated conformal factor ``lam1(x) + lam2(y)``.

    Each factor is a cosine polynomial ``sum_k c_k cos(2 pi k s)``.
    """

    lam1: tuple
    lam2: tuple

    def __post_init__(self):
        object.__setattr__(self, "lam1", tuple(float(c) for c in self.lam1))
        object.__setattr__(self, "lam2", tuple(float(c) for c in self.lam2))
        if not self.lam1 or not self.lam2:
            raise ConfigError("lam1 and lam2 need at least one coefficient")
        for name in ("lam1", "lam2"):
            s = np.linspace(0.0, 1.0, 4097)
            v = _cosine_values(getattr(self, name), s)
            i = int(np.argmin(v))
            if not v[i] > 0.0:
                raise PositivityViolation(
                    f"{name} is not positive: {v[i]:.6g} at s={s[i]:.6g}",
                    point=(s[i],), value=v[i],
                )

    @property
    def degree(self):
        return max(len(self.lam1), len(self.lam2)) - 1

    def lam1_values(self, x, deriv=0):
        return _cosine_values(self.lam1, x, deriv)

    def lam2_values(self, y, deriv=0):
        return _cosine_values(self.lam2, y, deriv)

    def lam1_field(self, N=None):
        return cosine_polynomial_x(self.lam1, N)

    def lam2_field(self, N=None):
        return cosine_polynomial_y(self.lam2, N)

    def is_flat(self):
        return all(c == 0 for c in self.lam1[1:]) and all(c == 0 for c in self.lam2[1:])


DEFAULT_DATA = LiouvilleData(DEFAULT_LAM1, DEFAULT_LAM2)


@dataclass(frozen=True)
class StateU:
    """The four unknown fields ``(lam, u0, f, g)``."""

    lam: Field2
    u0: Field2
    f: Field2
    g: Field2

    def components(self):
        return (self.lam, self.u0, self.f, self.g)

    @property
    def band_limit(self):
        return max(c.band_limit for c in self.components())

    def pad(self, N):
        return StateU(*(c.pad(N) for c in self.components()))

    def scaled(self, s):
        return StateU(*(c * s for c in self.components()))

    def __add__(self, other):
        return StateU(*(a + b for a, b in zip(self.components(), other.components())))

    def __sub__(self, other):
        return StateU(*(a - b for a, b in zip(self.components(), other.components())))

    def max_norm(self, M=VERIFY_GRID):
        return max(max_norm(c, M) for c in self.components())

    def coefficient_max(self):
        return max(float(np.max(np.abs(c.coeffs))) for c in self.components())

    def as_dict(self):
        return {name: spectrum_to_list(c) for name, c in zip(COMPONENTS, self.components())}

    @classmethod
    def from_dict(cls, d, N=None):
        return cls(*(spectrum_from_list(d[name], N) for name in COMPONENTS))


def liouville_initial_state(data, N_work=DEFAULT_BAND):
    """Stationary state of the Liouville metric with zero magnetic field."""
    if data.degree > N_work:
        raise ConfigError(f"Liouville data of degree {data.degree} exceeds band limit {N_work}")
    l1 = data.lam1_field(N_work)
    l2 = data.lam2_field(N_work)
    zero = Field2.zeros(N_work)
    return StateU(
        lam=l1 + l2,
        u0=linear_combine([(2.0, l2), (-2.0, l1)]),
        f=zero,
        g=zero,
    )


def symmetry_rhs(U):
    """Right-hand side of the deformation flow at ``U`` (band grows)."""
    lam, u0, f, g = U.components()
    lam_dot = dx(mul(g, lam)) + dy(mul(f, lam))
    u0_dot = linear_combine([
        (1.0, mul(g, dx(u0 - 2.0 * lam))),
        (-2.0, mul(lam, dx(g))),
        (1.0, mul(f, dy(u0 + 2.0 * lam))),
        (2.0, mul(lam, dy(f))),
    ])
    return StateU(lam_dot, u0_dot, 2.0 * dy(u0), -2.0 * dx(u0))


@dataclass(frozen=True)
class StateJet:
    """Taylor coefficients ``U_0 ... U_K`` of the deformation flow."""

    order: int
    coeffs: list
    band_limit: int
    discarded_mass: float = 0.0
    bands: list = dc_field(default_factory=list)

    def component_series(self, name):
        return [getattr(U, name) for U in self.coeffs]

    def truncated(self, K):
        """The same jet cut back to order ``K``."""
        if K > self.order:
            raise ConfigError(f"jet has order {self.order} < {K}")
        return StateJet(K, self.coeffs[:K + 1], self.band_limit,
                        self.discarded_mass, self.bands[:K + 1])

    def to_dict(self):
        return {
            "order": self.order,
            "band_limit": self.band_limit,
            "discarded_mass": self.discarded_mass,
            "spectra": [U.as_dict() for U in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d):
        N = int(d["band_limit"])
        coeffs = [StateU.from_dict(s, N) for s in d["spectra"]]
        return cls(int(d["order"]), coeffs, N, float(d.get("discarded_mass", 0.0)))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def ck_jet(U0, K, N_work=None):
    """Taylor jet of order ``K`` of the deformation flow starting at ``U0``.

    Products are formed on a grid of side ``> 4 N_work`` so that every mode
    of a product of two band-``N_work`` fields is exact; the part beyond
    ``N_work`` is dropped and its spectral mass accumulated in
    ``StateJet.discarded_mass``.  Modes beyond the a-priori band bound of
    each order are pure rounding and are zeroed.
    """
    if int(K) != K or K < 1:
        raise ConfigError(f"jet order must be an integer >= 1, got {K}")
    K = int(K)
    Nw = U0.band_limit if N_work is None else int(N_work)
    if U0.band_limit > Nw:
        raise ConfigError(f"initial state band {U0.band_limit} exceeds N_work={Nw}")
    U0 = U0.pad(Nw)
    M = scipy.fft.next_fast_len(4 * Nw + 2, real=True)
    modes = np.arange(-Nw, Nw + 1)
    ikx = (1j * TWO_PI * modes)[:, None]
    iky = (1j * TWO_PI * modes)[None, :]
    ikx2 = (1j * TWO_PI * np.arange(-2 * Nw, 2 * Nw + 1))[:, None]
    iky2 = (1j * TWO_PI * np.arange(-2 * Nw, 2 * Nw + 1))[None, :]

    lam = [np.array(U0.lam.coeffs)]
    r = [np.array(U0.u0.coeffs)]
    s = [np.array(U0.f.coeffs)]
    q = [np.array(U0.g.coeffs)]
    bands = [max(c.effective_band() for c in U0.components())]

    g_lam, g_q, g_s, g_a, g_b, g_qx, g_sy = ([] for _ in range(7))

    def grid(c):
        if not np.any(c):
            return np.zeros((M, M))
        return coeffs_to_grid(c, M)

    modes2 = np.abs(np.arange(-2 * Nw, 2 * Nw + 1))

    def cut(c2, bound):
        # c2 has band 2*Nw; keep the band-Nw part, zero rounding outside the
        # a-priori bound, and report the mass of genuine modes beyond Nw
        lost = 0.0
        if bound > Nw:
            sig = np.maximum.outer(modes2, modes2)
            lost = float(np.sum(np.abs(c2[(sig > Nw) & (sig <= bound)]) ** 2))
        out = np.array(c2[Nw:3 * Nw + 1, Nw:3 * Nw + 1])
        if bound < Nw:
            mask = np.abs(modes) > bound
            out[mask, :] = 0
            out[:, mask] = 0
        return 0.5 * (out + np.conj(out[::-1, ::-1])), lost

    discarded = 0.0
    for k in range(K):
        g_lam.append(grid(lam[k]))
        g_q.append(grid(q[k]))
        g_s.append(grid(s[k]))
        g_a.append(grid(ikx * (r[k] - 2.0 * lam[k])))
        g_b.append(grid(iky * (r[k] + 2.0 * lam[k])))
        g_qx.append(grid(ikx * q[k]))
        g_sy.append(grid(iky * s[k]))

        P = np.zeros((M, M))
        Q = np.zeros((M, M))
        R = np.zeros((M, M))
        for i in range(k + 1):
            j = k - i
            P += g_q[i] * g_lam[j]
            Q += g_s[i] * g_lam[j]
            R += g_q[i] * g_a[j] + g_s[i] * g_b[j]
            R += 2.0 * g_lam[i] * (g_sy[j] - g_qx[j])

        bound = max(bands[i] + bands[k - i] for i in range(k + 1))
        bound = max(bound, bands[k])
        lam_full = (ikx2 * grid_to_coeffs(P, 2 * Nw) + iky2 * grid_to_coeffs(Q, 2 * Nw)) / (k + 1)
        lam_next, lost_l = cut(lam_full, bound)
        r_next, lost_r = cut(grid_to_coeffs(R, 2 * Nw) / (k + 1), bound)
        discarded += lost_l + lost_r
        s_next = 2.0 * iky * r[k] / (k + 1)
        q_next = -2.0 * ikx * r[k] / (k + 1)

        lam.append(lam_next)
        r.append(r_next)
        s.append(s_next)
        q.append(q_next)
        bands.append(min(bound, Nw))

    coeffs = [U0] + [
        StateU(*(Field2(c, symmetrize=False) for c in (lam[k], r[k], s[k], q[k])))
        for k in range(1, K + 1)
    ]
    return StateJet(K, coeffs, Nw, discarded, bands)


def evaluate_jet(jet, t, *, check=True, M=VERIFY_GRID):
    """Horner sum ``sum_k U_k t^k``.

    With ``check=True`` the conformal factor of the result must be
    positive on the ``M x M`` grid.
    """
    acc = jet.coeffs[jet.order]
    for k in range(jet.order - 1, -1, -1):
        acc = StateU(*(linear_combine([(t, a), (1.0, b)])
                       for a, b in zip(acc.components(), jet.coeffs[k].components())))
    if check:
        vals = acc.lam.to_grid(M)
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        if not vals[i, j] > 0.0:
            raise PositivityViolation(
                f"conformal factor not positive at t={t}: {vals[i, j]:.6g}",
                point=(i / M, j / M), value=vals[i, j],
            )
    return acc


def trust_diagnostics(jet, t, M=VERIFY_GRID):
    """Tail size and conformal-factor floor at deformation time ``t``."""
    tail = jet.coeffs[jet.order].max_norm(M) * abs(t) ** jet.order
    lam0_min = float(np.min(jet.coeffs[0].lam.to_grid(M)))
    U = evaluate_jet(jet, t, check=False, M=M)
    lam_min = float(np.min(U.lam.to_grid(M)))
    ok = tail < TAIL_TOL and lam_min >= 0.5 * lam0_min
    return {"t": float(t), "tail": float(tail), "lam_min": lam_min,
            "lam0_min": lam0_min, "trusted": bool(ok)}


def max_trusted_t(jet, M=VERIFY_GRID, t_hi=1.0, iters=40):
    """Largest ``t`` (by bisection) accepted by :func:`trust_diagnostics`."""
    lo, hi = 0.0, t_hi
    if trust_diagnostics(jet, hi, M)["trusted"]:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if trust_diagnostics(jet, mid, M)["trusted"]:
            lo = mid
        else:
            hi = mid
    return lo


def evaluate_trusted(jet, t, M=VERIFY_GRID):
    """:func:`evaluate_jet` that also enforces the trust radius policy."""
    diag = trust_diagnostics(jet, t, M)
    if not diag["trusted"]:
        t_max = max_trusted_t(jet, M, t_hi=max(abs(t), 1e-12))
        raise PositivityViolation(
            f"t={t} outside the trust radius (tail {diag['tail']:.3e}, "
            f"min lam {diag['lam_min']:.4g}); largest accepted t is about {t_max:.4g}",
            value=diag["lam_min"], suggested_t=t_max,
        )
    return evaluate_jet(jet, t, M=M)


def jet_convergence_report(jet, t, M=VERIFY_GRID):
    """Per-order term sizes ``||U_k|| |t|^k`` and a ratio-test radius.

    The radius estimate at order ``k`` is ``(||U_{k-2}|| / ||U_k||)^(1/2)``;
    the two-step ratio smooths the even/odd structure of the jet.
    """
    norms = [U.max_norm(M) for U in jet.coeffs]
    terms = [n * abs(t) ** k for k, n in enumerate(norms)]
    radii = [None, None]
    for k in range(2, len(norms)):
        if norms[k] > 0 and norms[k - 2] > 0:
            radii.append(float(np.sqrt(norms[k - 2] / norms[k])))
        else:
            radii.append(None)
    return {
        "t": float(t),
        "order": jet.order,
        "norms": norms,
        "terms": terms,
        "radius_estimates": radii,
        "radius": radii[-1],
        "discarded_mass": jet.discarded_mass,
    }
