"""Checks for quadratic integrals valid on every energy level.

A candidate is ``F2 = a0 p1^2 + 2 a1 p1 p2 + a2 p2^2 + b0 p1 + b1 p2 + c0``.
Expanding ``{F2, H}`` with the magnetic bracket and collecting powers of
the momenta gives three groups of equations (cubic, quadratic, linear).
They are evaluated here in a form valid for any normalisation of the
candidate, with ``f = b0 / 2`` and ``g = -b1 / 2``::

    (a1) (a0)_x / lam - a0 (1/lam)_x - a1 (1/lam)_y
    (a2) (a0)_y / lam + 2 (a1)_x / lam - a1 (1/lam)_x - a2 (1/lam)_y
    (a3) (a2)_x / lam + 2 (a1)_y / lam - a0 (1/lam)_x - a1 (1/lam)_y
    (a4) (a2)_y / lam - a1 (1/lam)_x - a2 (1/lam)_y
    (b1) f_x + lam_x f / (2 lam) - lam_y g / (2 lam) - omega a1
    (b2) f_x + g_y - 2 omega a1
    (b3) omega (a0 - a2) / 4 - (g_x - f_y) / 4
    (c1) (c0)_x + 2 g omega
    (c2) (c0)_y + 2 f omega

Under ``a1 = 0`` and ``a0 - a2 = 4`` the b- and c-rows reduce to
``f_x + lam_x f/(2 lam) - lam_y g/(2 lam)``, ``f_x + g_y``,
``omega - (g_x - f_y)/4``, ``(c0)_x + g (g_x - f_y)/2`` and
``(c0)_y + f (g_x - f_y)/2``.

Derivation of (b1): the ``p1^2`` coefficient of ``{F2, H}`` is
``(b0)_x/lam - b0 (1/(2 lam))_x - b1 (1/(2 lam))_y - 2 omega a1 / lam``;
substituting ``b0 = 2f``, ``b1 = -2g`` and multiplying by ``lam/2`` gives
``f_x + lam_x f/(2 lam) - lam_y g/(2 lam) - omega a1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import MagneticSystem, aux_grid
from .deformation import VERIFY_GRID
from .errors import ConfigError, PositivityViolation
from .fields import (
    TWO_PI,
    Field2,
    constant,
    cosine_polynomial_y,
    dx,
    dy,
    field_from_modes,
    pointwise,
)

RESIDUAL_NAMES = ("a1", "a2", "a3", "a4", "b1", "b2", "b3", "c1", "c2")
PASS_TOL = 1e-10


@dataclass(frozen=True)
class ExampleOneData:
    """Metric ``lam(y) (dx^2 + dy^2)`` and potential ``u(y)``.

    ``lam_coeffs`` are cosine coefficients of ``lam``; ``u_cos`` and
    ``u_sin`` are cosine and sine coefficients of ``u`` (index = harmonic).
    """

    lam_coeffs: tuple
    u_cos: tuple = (0.0,)
    u_sin: tuple = (0.0,)

    def __post_init__(self):
        for name in ("lam_coeffs", "u_cos", "u_sin"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))
        s = np.linspace(0.0, 1.0, 4097)
        v = sum(a * np.cos(TWO_PI * k * s) for k, a in enumerate(self.lam_coeffs))
        if not np.min(v) > 0:
            i = int(np.argmin(v))
            raise PositivityViolation(f"lam(y) not positive: {v[i]:.6g} at y={s[i]:.6g}",
                                      point=(0.0, s[i]), value=v[i])

    @property
    def band(self):
        return max(len(self.lam_coeffs), len(self.u_cos), len(self.u_sin)) - 1

    def lam_field(self, N=None):
        return cosine_polynomial_y(self.lam_coeffs, N)

    def u_field(self, N=None):
        N = self.band if N is None else N
        modes = [(0, 0, self.u_cos[0] if self.u_cos else 0.0)]
        for k in range(1, N + 1):
            a = self.u_cos[k] if k < len(self.u_cos) else 0.0
            b = self.u_sin[k] if k < len(self.u_sin) else 0.0
            # a cos + b sin = (a - i b)/2 e^{i k y} + c.c.
            modes.append((0, k, 0.5 * (a - 1j * b)))
        return field_from_modes(modes, N, symmetrize=True)


@dataclass(frozen=True)
class AllLevelsQuadratic:
    """Coefficients of ``a0 p1^2 + 2 a1 p1 p2 + a2 p2^2 + b0 p1 + b1 p2 + c0``."""

    a0: Field2
    a1: Field2
    a2: Field2
    b0: Field2
    b1: Field2
    c0: Field2

    def evaluate(self, x, y, p1, p2):
        return (self.a0(x, y) * p1 ** 2 + 2.0 * self.a1(x, y) * p1 * p2
                + self.a2(x, y) * p2 ** 2 + self.b0(x, y) * p1 + self.b1(x, y) * p2
                + self.c0(x, y))

    def monitor(self):
        def mon(traj):
            if traj.form != "cotangent":
                raise ConfigError("all-levels quadratic needs a cotangent trajectory")
            s = traj.states
            return self.evaluate(s[:, 0], s[:, 1], s[:, 2], s[:, 3])
        return mon


class LinearIntegral:
    """``F1 = p1 + u(y)`` as a callable and a trajectory monitor."""

    def __init__(self, u):
        self.u = u

    def __call__(self, x, y, p1, p2):
        return p1 + self.u(x, y)

    def monitor(self):
        def mon(traj):
            if traj.form != "cotangent":
                raise ConfigError("linear integral needs a cotangent trajectory")
            s = traj.states
            return self(s[:, 0], s[:, 1], s[:, 2], s[:, 3])
        return mon


def example_one_system(d):
    """Metric ``lam(y)``, field ``omega = -u'(y)`` and the integral ``p1 + u(y)``."""
    N = max(1, d.band)
    lam = d.lam_field(N)
    u = d.u_field(N)
    sys = MagneticSystem(lam, -dy(u))
    return sys, LinearIntegral(u)


def example_one_candidate(d, scale=1.0):
    """``scale * F1^2 + 2H`` as an all-levels quadratic."""
    N = max(1, d.band)
    lam = d.lam_field(N)
    u = d.u_field(N)
    M = aux_grid(N)
    inv = pointwise(lambda L: 1.0 / L, [lam], M)
    zero = Field2.zeros(N)
    return AllLevelsQuadratic(
        a0=inv + scale,
        a1=zero,
        a2=inv,
        b0=2.0 * scale * u,
        b1=zero,
        c0=scale * (u * u),
    )


def liouville_candidate(data, N=None):
    """Four times the Liouville integral, ``4 (lam2 p1^2 - lam1 p2^2) / (lam1 + lam2)``."""
    N = max(1, data.degree) if N is None else N
    l1, l2 = data.lam1_field(N), data.lam2_field(N)
    M = aux_grid(N)
    zero = Field2.zeros(N)
    return (
        MagneticSystem(l1 + l2, zero),
        AllLevelsQuadratic(
            a0=pointwise(lambda a, b: 4.0 * b / (a + b), [l1, l2], M),
            a1=zero,
            a2=pointwise(lambda a, b: -4.0 * a / (a + b), [l1, l2], M),
            b0=zero,
            b1=zero,
            c0=zero,
        ),
    )


def deformed_candidate(U):
    """The level integral of ``U`` written as a quadratic on all of phase space.

    On ``H = 1/2`` it equals ``u0 + 2 sqrt(lam)(f cos - g sin) + 2 lam cos 2phi``.
    """
    N = U.band_limit
    zero = Field2.zeros(N)
    return AllLevelsQuadratic(
        a0=constant(2.0, N),
        a1=zero,
        a2=constant(-2.0, N),
        b0=2.0 * U.f,
        b1=-2.0 * U.g,
        c0=U.u0,
    )


def _band(*fields):
    return max(f.effective_band() for f in fields)


def all_levels_residuals(sys, q, M=None):
    """The nine residual fields of the all-levels conditions.

    Returns
    -------
    dict
        ``{"fields": {name: Field2}, "max_norms": {name: float}, "max": float}``
    """
    parts = [sys.lam, sys.omega, q.a0, q.a1, q.a2, q.b0, q.b1, q.c0]
    N = max(1, _band(*parts))
    M = max(VERIFY_GRID, aux_grid(N)) if M is None else M

    def g_(f):
        return f.to_grid(M)

    L = g_(sys.lam)
    if not np.min(L) > 0:
        i, j = np.unravel_index(np.argmin(L), L.shape)
        raise PositivityViolation("conformal factor not positive", point=(i / M, j / M),
                                  value=L[i, j])
    Lx, Ly = g_(dx(sys.lam)), g_(dy(sys.lam))
    W = g_(sys.omega)
    ix, iy = -Lx / L ** 2, -Ly / L ** 2
    a0, a1, a2 = g_(q.a0), g_(q.a1), g_(q.a2)
    f, g = 0.5 * g_(q.b0), -0.5 * g_(q.b1)
    fx, fy = 0.5 * g_(dx(q.b0)), 0.5 * g_(dy(q.b0))
    gx, gy = -0.5 * g_(dx(q.b1)), -0.5 * g_(dy(q.b1))
    res = {
        "a1": g_(dx(q.a0)) / L - a0 * ix - a1 * iy,
        "a2": g_(dy(q.a0)) / L + 2 * g_(dx(q.a1)) / L - a1 * ix - a2 * iy,
        "a3": g_(dx(q.a2)) / L + 2 * g_(dy(q.a1)) / L - a0 * ix - a1 * iy,
        "a4": g_(dy(q.a2)) / L - a1 * ix - a2 * iy,
        "b1": fx + Lx * f / (2 * L) - Ly * g / (2 * L) - W * a1,
        "b2": fx + gy - 2 * W * a1,
        "b3": W * (a0 - a2) / 4 - (gx - fy) / 4,
        "c1": g_(dx(q.c0)) + 2 * g * W,
        "c2": g_(dy(q.c0)) + 2 * f * W,
    }
    band = M // 2 - 1
    fields = {k: Field2.from_grid(v, band) for k, v in res.items()}
    norms = {k: float(np.max(np.abs(v))) for k, v in res.items()}
    return {"fields": fields, "max_norms": norms, "max": max(norms.values())}


def bracket_from_residuals(sys, res, x, y, p1, p2):
    """Rebuild ``{F2, H}`` at phase points from the residual fields."""
    r = {k: v(x, y) for k, v in res["fields"].items()}
    L = sys.lam(x, y)
    cubic = r["a1"] * p1 ** 3 + r["a2"] * p1 ** 2 * p2 + r["a3"] * p1 * p2 ** 2 + r["a4"] * p2 ** 3
    # p1^2 row = 2 (b1)/lam, p2^2 row = 2 ((b1) - (b2))/lam, p1 p2 row = 8 (b3)/lam
    quad = (2 * r["b1"] * p1 ** 2 + 2 * (r["b1"] - r["b2"]) * p2 ** 2 + 8 * r["b3"] * p1 * p2) / L
    lin = (r["c1"] * p1 + r["c2"] * p2) / L
    return cubic + quad + lin


def proof_consequence_checks(sys, q, M=VERIFY_GRID):
    """Mean and variance over the grid of ``f g`` and ``c0 + (g^2 - f^2)/4``.

    The candidate is first rescaled so that ``a0 - a2 = 4``, the
    normalisation under which both quantities are constant for a genuine
    all-levels integral.  Adding multiples of ``H`` leaves ``a0 - a2``
    unchanged, so the scale is the grid mean of ``(a0 - a2) / 4``.
    """
    kappa = float(np.mean(q.a0.to_grid(M) - q.a2.to_grid(M))) / 4.0
    if abs(kappa) < 1e-12:
        return {"K1": None, "K2": None, "scale": kappa, "constant": False}
    f = 0.5 * q.b0.to_grid(M) / kappa
    g = -0.5 * q.b1.to_grid(M) / kappa
    K1 = q.c0.to_grid(M) / kappa + (g ** 2 - f ** 2) / 4
    K2 = f * g
    out = {
        "K1": {"mean": float(np.mean(K1)), "variance": float(np.var(K1))},
        "K2": {"mean": float(np.mean(K2)), "variance": float(np.var(K2))},
        "scale": kappa,
    }
    out["constant"] = bool(out["K1"]["variance"] < PASS_TOL and out["K2"]["variance"] < PASS_TOL)
    return out


def classify(sys, q, M=None):
    """Residuals, proof consequences, and a PASS/FAIL verdict."""
    res = all_levels_residuals(sys, q, M)
    pc = proof_consequence_checks(sys, q)
    passed = res["max"] < PASS_TOL
    return {
        "verdict": "PASS" if passed else "FAIL",
        "residual_max_norms": res["max_norms"],
        "residual_max": res["max"],
        "proof_consequences": pc,
    }


def energy_drift_table(sys, q, energies=(0.25, 0.5, 1.0), starts=None, T=20.0,
                       tol=1e-10, sample_dt=0.05, backend=None):
    """Maximum relative drift of ``q`` along the flow on several energy levels.

    ``starts`` are angle points; each is lifted to the level ``H = E`` with
    the same momentum direction.
    """
    from .dynamics import IntegratorSettings, cotangent_from_angle, drift_stats, integrate
    from .dynamics import start_lattice

    starts = start_lattice(2, 2) if starts is None else starts
    settings = IntegratorSettings(tol=tol, sample_dt=sample_dt)
    mon = q.monitor()
    rows = []
    for E in energies:
        worst = 0.0
        for p in starts:
            traj = integrate(sys, cotangent_from_angle(sys, p, E), T, settings, backend=backend)
            worst = max(worst, drift_stats(mon(traj))["rel_drift"])
        rows.append({"energy": float(E), "max_rel_drift": worst})
    return rows
