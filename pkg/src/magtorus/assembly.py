"""Magnetic system, level-set quadratic integral, and stationary residuals.

On the level ``H = 1/2`` the momenta are ``p = sqrt(lam) (cos phi, sin phi)``
and the candidate integral is

    F(x, y, phi) = a0 + 2 Re(a1 e^{i phi}) + 2 Re(a2 e^{2 i phi})

with ``a0 = u0``, ``a1 = sqrt(lam) (f + i g)`` and ``a2 = lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deformation import VERIFY_GRID, StateU
from .errors import PositivityViolation
from .fields import (
    Field2,
    dx,
    dy,
    grid_points,
    l2_norm,
    linear_combine,
    max_norm,
    mul,
    sqrt_field,
)

OMEGA_MEAN_TOL = 1e-13


def aux_grid(N):
    """Even grid side used for pointwise maps of band-``N`` fields."""
    return max(64, 4 * N + 16)


@dataclass(frozen=True)
class MagneticSystem:
    """Conformal factor ``lam`` and magnetic density ``omega`` on the torus.

    ``omega`` must have zero mean (an exact form) unless ``require_exact``
    is switched off, which test problems such as a constant field need.
    """

    lam: Field2
    omega: Field2
    require_exact: bool = True

    def __post_init__(self):
        if self.require_exact and abs(self.omega.mean()) > OMEGA_MEAN_TOL:
            raise ValueError(f"magnetic field is not exact: mean {self.omega.mean():.3e}")
        M = aux_grid(self.lam.band_limit)
        vals = self.lam.to_grid(M)
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        if not vals[i, j] > 0.0:
            raise PositivityViolation(
                f"conformal factor not positive: {vals[i, j]:.6g}",
                point=(i / M, j / M), value=vals[i, j],
            )

    def packed(self):
        """``(4, 2N+1, 2N+1)`` stack ``[lam, lam_x, lam_y, omega]`` at the smallest exact band."""
        fields = [self.lam, dx(self.lam), dy(self.lam), self.omega]
        N = max(1, max(f.effective_band() for f in fields))
        return np.stack([f.truncate(N)[0].pad(N).coeffs for f in fields]).astype(np.complex128)

    def lam_min(self, M=VERIFY_GRID):
        return float(np.min(self.lam.to_grid(M)))


@dataclass(frozen=True)
class QuadraticIntegralOnLevel:
    """Fourier-in-angle coefficients of ``F`` on the level ``H = 1/2``."""

    a0: Field2
    a1_re: Field2
    a1_im: Field2
    a2: Field2


def magnetic_field(U):
    """``(g_x - f_y) / 4``; its mean vanishes identically."""
    omega = linear_combine([(0.25, dx(U.g)), (-0.25, dy(U.f))])
    assert abs(omega.mean()) < OMEGA_MEAN_TOL
    return omega


def magnetic_system(U):
    return MagneticSystem(U.lam, magnetic_field(U))


def _trim(U):
    N = max(1, max(c.effective_band() for c in U.components()))
    return StateU(*(c.truncate(N)[0] for c in U.components()))


def assemble_integral(U, M=None):
    """Coefficients ``a0 = u0``, ``a1 = sqrt(lam)(f + i g)``, ``a2 = lam``.

    ``a2`` is the very same object as ``U.lam``.
    """
    T = _trim(U)
    M = aux_grid(T.band_limit) if M is None else M
    root = sqrt_field(T.lam, M)
    return QuadraticIntegralOnLevel(
        a0=U.u0,
        a1_re=mul(root, T.f),
        a1_im=mul(root, T.g),
        a2=U.lam,
    )


def eval_integral(F, x, y, phi):
    """``F(x, y, phi)``; broadcasts over array arguments."""
    phi = np.asarray(phi, dtype=float)
    return (F.a0(x, y)
            + 2.0 * (F.a1_re(x, y) * np.cos(phi) - F.a1_im(x, y) * np.sin(phi))
            + 2.0 * F.a2(x, y) * np.cos(2.0 * phi))


def system_residual(U):
    """The four stationary equations evaluated on ``U``.

    ``R1 = f_x + g_y``, ``R2 = (f lam)_x - (g lam)_y``,
    ``R3 = u0_x + 2 lam_x - g (f_y - g_x) / 2``,
    ``R4 = -u0_y + 2 lam_y + f (f_y - g_x) / 2``.
    """
    T = _trim(U)
    lam, u0, f, g = T.components()
    curl = linear_combine([(1.0, dy(f)), (-1.0, dx(g))])
    R1 = linear_combine([(1.0, dx(f)), (1.0, dy(g))])
    R2 = linear_combine([(1.0, dx(mul(f, lam))), (-1.0, dy(mul(g, lam)))])
    R3 = linear_combine([(1.0, dx(u0)), (2.0, dx(lam)), (-0.5, mul(g, curl))])
    R4 = linear_combine([(-1.0, dy(u0)), (2.0, dy(lam)), (0.5, mul(f, curl))])
    return [R1, R2, R3, R4]


def fourier_condition_residual(U, M=VERIFY_GRID):
    """Residuals of the angular-harmonic conditions for ``k = 0, 1, 2, 3``.

    Built from :func:`assemble_integral` and :func:`magnetic_field` alone,
    with the divisions by ``lam`` and ``sqrt(lam)`` done pointwise on the
    ``M x M`` grid.  Each entry is a ``(real part, imaginary part)`` pair
    of fields.
    """
    F = assemble_integral(U)
    omega = magnetic_field(U)
    lam = U.lam

    def grid(field):
        return field.to_grid(M)

    L = grid(lam)
    if not np.min(L) > 0.0:
        i, j = np.unravel_index(np.argmin(L), L.shape)
        raise PositivityViolation("conformal factor not positive", point=(i / M, j / M),
                                  value=L[i, j])
    Lx, Ly = grid(dx(lam)), grid(dy(lam))
    W = grid(omega)
    a = {
        0: grid(F.a0) + 0j,
        1: grid(F.a1_re) + 1j * grid(F.a1_im),
        2: grid(F.a2) + 0j,
    }
    ax = {0: grid(dx(F.a0)) + 0j, 1: grid(dx(F.a1_re)) + 1j * grid(dx(F.a1_im)),
          2: grid(dx(F.a2)) + 0j}
    ay = {0: grid(dy(F.a0)) + 0j, 1: grid(dy(F.a1_re)) + 1j * grid(dy(F.a1_im)),
          2: grid(dy(F.a2)) + 0j}

    def coef(table, k):
        if abs(k) > 2:
            return 0.0
        return table[k] if k >= 0 else np.conj(table[-k])

    out = []
    for k in range(4):
        am, ap = coef(a, k - 1), coef(a, k + 1)
        res = (Ly / (2 * L) * (1j * (k - 1) * am + 1j * (k + 1) * ap) / 2
               - Lx / (2 * L) * (1j * (k - 1) * am - 1j * (k + 1) * ap) / 2j
               + (coef(ax, k - 1) + coef(ax, k + 1)) / 2
               + (coef(ay, k - 1) - coef(ay, k + 1)) / 2j
               - 1j * k * W * coef(a, k) / np.sqrt(L))
        band = M // 2 - 1
        out.append((Field2.from_grid(res.real, band), Field2.from_grid(res.imag, band)))
    return out


def complex_max_norm(pair, M=VERIFY_GRID):
    re, im = pair
    return float(np.max(np.hypot(re.to_grid(M), im.to_grid(M))))


def liouville_reference_integral(data, x, y, phi):
    """Liouville quadratic integral restricted to the level, ``lam2 cos^2 - lam1 sin^2``."""
    l1 = data.lam1_values(np.mod(x, 1.0))
    l2 = data.lam2_values(np.mod(y, 1.0))
    return l2 * np.cos(phi) ** 2 - l1 * np.sin(phi) ** 2


def norm_pair(field, M=VERIFY_GRID):
    return (max_norm(field, M), l2_norm(field, M))


def verify_report(U, t=None, K=None, M=VERIFY_GRID):
    """Residual norms of ``U`` as ``(max, L2)`` pairs plus exactness and positivity."""
    R = system_residual(U)
    E = fourier_condition_residual(U, M)
    norms = {f"R{i + 1}": list(norm_pair(r, M)) for i, r in enumerate(R)}
    for k, pair in enumerate(E):
        mx = complex_max_norm(pair, M)
        l2 = float(np.sqrt(np.mean(pair[0].to_grid(M) ** 2 + pair[1].to_grid(M) ** 2)))
        norms[f"eq8_k{k}"] = [mx, l2]
    omega = magnetic_field(U)
    return {
        "t": t,
        "K": K,
        "residual_norms": norms,
        "omega_mean": omega.mean(),
        "omega_max": max_norm(omega, M),
        "lam_min": float(np.min(U.lam.to_grid(M))),
    }


def mixed_mode_mass(field):
    """l2 size ``sqrt(sum |c_mn|^2)`` of the modes with ``m != 0`` and ``n != 0``.

    By Parseval this is the RMS over the torus of ``F - A(x) - B(y)`` for
    the best separated approximation; zero exactly for separated fields.
    """
    N = field.band_limit
    c = np.array(field.coeffs)
    c[N, :] = 0
    c[:, N] = 0
    return float(np.sqrt(np.sum(np.abs(c) ** 2)))


def grid_axes(M):
    pts = grid_points(M)
    return pts[:, None], pts[None, :]
