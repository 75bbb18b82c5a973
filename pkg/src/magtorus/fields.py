"""Truncated Fourier series on the unit torus [0, 1)^2.

A :class:`Field2` stores the complex coefficients ``c[m, n]`` of

    F(x, y) = sum_{|m|, |n| <= N} c[m, n] exp(2 pi i (m x + n y))

as a dense ``(2N+1, 2N+1)`` array whose index ``[m + N, n + N]`` holds
mode ``(m, n)``.  Fields are real valued, so the array is kept Hermitian
(``c[-m, -n] == conj(c[m, n])``) after every operation.  Products are
evaluated on an oversampled grid large enough to hold the full product
spectrum, so they are alias free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from numbers import Number

import numpy as np
import scipy.fft

from .errors import ConfigError, PositivityViolation

TWO_PI = 2.0 * np.pi

__all__ = [
    "Field2",
    "GridSampling",
    "field_from_modes",
    "constant",
    "cosine_polynomial_x",
    "cosine_polynomial_y",
    "evaluate",
    "dx",
    "dy",
    "mul",
    "linear_combine",
    "sqrt_field",
    "shift",
    "pointwise",
    "mean",
    "max_norm",
    "l2_norm",
    "grid_points",
    "coeffs_to_grid",
    "grid_to_coeffs",
    "write_grid_csv",
    "read_grid_csv",
    "spectrum_to_list",
    "spectrum_from_list",
    "write_spectrum_json",
    "read_spectrum_json",
]


def _symmetrize(c):
    return 0.5 * (c + np.conj(c[::-1, ::-1]))


def _band_of(c):
    return (c.shape[0] - 1) // 2


class Field2:
    """Real 1-periodic function of ``(x, y)`` held as a truncated Fourier series.

    Instances are immutable: the coefficient array is copied on
    construction and marked read-only.

    Parameters
    ----------
    coeffs : array_like, shape (2N+1, 2N+1)
        Complex coefficients, index ``[m + N, n + N]`` for mode ``(m, n)``.
    symmetrize : bool
        Project onto the Hermitian (real-valued) subspace.  Disable only
        when the input is already exactly Hermitian.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, *, symmetrize=True):
        c = np.array(coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] % 2 != 1:
            raise ConfigError(f"coefficient array must be square with odd side, got {c.shape}")
        if symmetrize:
            c = _symmetrize(c)
        c.flags.writeable = False
        self._c = c

    @classmethod
    def zeros(cls, band_limit):
        return cls(np.zeros((2 * band_limit + 1,) * 2), symmetrize=False)

    @property
    def coeffs(self):
        return self._c

    @property
    def band_limit(self):
        return _band_of(self._c)

    def coefficient(self, m, n):
        N = self.band_limit
        if abs(m) > N or abs(n) > N:
            return 0j
        return complex(self._c[m + N, n + N])

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def __repr__(self):
        return f"Field2(band_limit={self.band_limit}, mean={self.mean():.6g})"

    # -- spectral bookkeeping -------------------------------------------------

    def pad(self, band_limit):
        """Return the same field stored with a larger band limit."""
        N = self.band_limit
        if band_limit < N:
            raise ConfigError("pad() cannot shrink; use truncate()")
        if band_limit == N:
            return self
        out = np.zeros((2 * band_limit + 1,) * 2, dtype=np.complex128)
        s = band_limit - N
        out[s:s + 2 * N + 1, s:s + 2 * N + 1] = self._c
        return Field2(out, symmetrize=False)

    def truncate(self, band_limit):
        """Drop modes with ``|m| > band_limit`` or ``|n| > band_limit``.

        Returns
        -------
        field : Field2
        discarded : float
            Spectral mass ``sum |c|^2`` of the removed modes.
        """
        N = self.band_limit
        if band_limit >= N:
            return self.pad(band_limit), 0.0
        s = N - band_limit
        kept = self._c[s:s + 2 * band_limit + 1, s:s + 2 * band_limit + 1]
        k = np.abs(np.arange(-N, N + 1))
        outside = np.maximum.outer(k, k) > band_limit
        discarded = float(np.sum(np.abs(self._c[outside]) ** 2))
        return Field2(kept, symmetrize=False), discarded

    def effective_band(self):
        """Smallest band limit holding every nonzero coefficient."""
        nz = np.argwhere(self._c != 0)
        if nz.size == 0:
            return 0
        return int(np.max(np.abs(nz - self.band_limit)))

    def trimmed(self):
        """Same field stored at :meth:`effective_band` (exact, no rounding)."""
        return self.truncate(self.effective_band())[0]

    def hermitian_asymmetry(self):
        return float(np.max(np.abs(self._c - np.conj(self._c[::-1, ::-1]))))

    def mean(self):
        N = self.band_limit
        return float(self._c[N, N].real)

    def to_grid(self, M):
        return coeffs_to_grid(self._c, M)

    @classmethod
    def from_grid(cls, values, band_limit):
        return cls(grid_to_coeffs(values, band_limit))

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Number):
            return _add_constant(self, other)
        if isinstance(other, Field2):
            return linear_combine([(1.0, self), (1.0, other)])
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Field2(-self._c, symmetrize=False)

    def __sub__(self, other):
        if isinstance(other, Number):
            return _add_constant(self, -other)
        if isinstance(other, Field2):
            return linear_combine([(1.0, self), (-1.0, other)])
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Field2):
            return mul(self, other)
        if isinstance(other, Number):
            if isinstance(other, complex) and other.imag != 0:
                raise ConfigError("Field2 holds real functions; complex scale not allowed")
            return Field2(self._c * float(np.real(other)), symmetrize=False)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return self * (1.0 / other)
        return NotImplemented


def _add_constant(field, value):
    c = np.array(field.coeffs)
    N = field.band_limit
    c[N, N] += float(value)
    return Field2(c, symmetrize=False)


@dataclass(frozen=True)
class GridSampling:
    """Field values on the uniform ``M x M`` grid ``(i/M, j/M)``."""

    resolution: int
    values: np.ndarray

    @classmethod
    def sample(cls, field, M):
        if M < 3 * field.band_limit:
            raise ConfigError(f"grid resolution {M} below 3 * band limit {field.band_limit}")
        return cls(M, field.to_grid(M))


# -- construction -------------------------------------------------------------

def field_from_modes(modes, N, *, symmetrize=False, atol=1e-14):
    """Build a field from ``(m, n, amplitude)`` triples.

    With ``symmetrize=False`` the list must already be closed under
    ``(m, n, a) -> (-m, -n, conj(a))``.  With ``symmetrize=True`` each
    entry is read one-sided: ``(m, n, a)`` stands for
    ``a e(m, n) + conj(a) e(-m, -n)``; a ``(0, 0, a)`` entry adds ``Re a``.
    """
    c = np.zeros((2 * N + 1, 2 * N + 1), dtype=np.complex128)
    for m, n, a in modes:
        if abs(m) > N or abs(n) > N:
            raise ConfigError(f"mode ({m}, {n}) outside band limit {N}")
        a = complex(a)
        if symmetrize:
            if m == 0 and n == 0:
                c[N, N] += a.real
            else:
                c[m + N, n + N] += a
                c[-m + N, -n + N] += np.conj(a)
        else:
            c[m + N, n + N] += a
    if not symmetrize:
        asym = np.max(np.abs(c - np.conj(c[::-1, ::-1])))
        if asym > atol * max(1.0, np.max(np.abs(c))):
            raise ConfigError(
                f"mode list is not Hermitian (asymmetry {asym:.3e}); pass symmetrize=True"
            )
    return Field2(c)


def constant(value, N=0):
    return field_from_modes([(0, 0, float(value))], N)


def cosine_polynomial_x(coeffs, N=None):
    """``sum_k coeffs[k] cos(2 pi k x)`` as a field."""
    return _cosine_polynomial(coeffs, axis=0, N=N)


def cosine_polynomial_y(coeffs, N=None):
    """``sum_k coeffs[k] cos(2 pi k y)`` as a field."""
    return _cosine_polynomial(coeffs, axis=1, N=N)


def _cosine_polynomial(coeffs, axis, N):
    coeffs = [float(a) for a in coeffs]
    deg = len(coeffs) - 1
    N = deg if N is None else N
    if deg > N:
        raise ConfigError(f"cosine degree {deg} exceeds band limit {N}")
    modes = [(0, 0, coeffs[0] if coeffs else 0.0)]
    for k, a in enumerate(coeffs[1:], start=1):
        mn = (k, 0) if axis == 0 else (0, k)
        modes.append((*mn, 0.5 * a))
    return field_from_modes(modes, max(N, 0), symmetrize=True)


# -- evaluation ---------------------------------------------------------------

def evaluate(field, x, y):
    """Value of the trigonometric polynomial at ``(x, y)``; broadcasts."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb, yb = np.broadcast_arrays(x, y)
    N = field.band_limit
    k = np.arange(-N, N + 1)
    ex = np.exp(1j * TWO_PI * np.outer(np.mod(xb.ravel(), 1.0), k))
    ey = np.exp(1j * TWO_PI * np.outer(np.mod(yb.ravel(), 1.0), k))
    vals = np.einsum("pm,mn,pn->p", ex, field.coeffs, ey).real
    if xb.ndim == 0:
        return float(vals[0])
    return vals.reshape(xb.shape)


def grid_points(M):
    return np.arange(M) / M


def coeffs_to_grid(c, M):
    """Sample the series with coefficients ``c`` on the ``M x M`` grid.

    ``values[i, j]`` is the value at ``(i / M, j / M)``.
    """
    N = _band_of(c)
    if M >= 2 * N + 1:
        idx = np.arange(-N, N + 1) % M
        half = np.zeros((M, M // 2 + 1), dtype=np.complex128)
        pos = np.arange(0, N + 1)
        half[np.ix_(idx, pos)] = c[:, N:]
        return scipy.fft.irfft2(half, s=(M, M)) * (M * M)
    k = np.arange(-N, N + 1)
    e = np.exp(1j * TWO_PI * np.outer(grid_points(M), k))
    return (e @ c @ e.T).real


def grid_to_coeffs(values, N):
    """Fourier coefficients ``|m|, |n| <= N`` of real grid samples.

    Exact for band-limited data whenever ``M >= 2N + 1``.
    """
    values = np.asarray(values, dtype=float)
    M = values.shape[0]
    if values.shape != (M, M):
        raise ConfigError("grid must be square")
    if M < 2 * N + 1:
        raise ConfigError(f"grid {M} too coarse for band limit {N}")
    half = scipy.fft.rfft2(values) / (M * M)
    rows = np.arange(-N, N + 1) % M
    c = np.empty((2 * N + 1, 2 * N + 1), dtype=np.complex128)
    c[:, N:] = half[np.ix_(rows, np.arange(0, N + 1))]
    neg_rows = (-np.arange(-N, N + 1)) % M
    c[:, :N] = np.conj(half[np.ix_(neg_rows, np.arange(N, 0, -1))])
    return c


# -- calculus and algebra -----------------------------------------------------

def dx(field):
    N = field.band_limit
    m = np.arange(-N, N + 1)[:, None]
    return Field2(field.coeffs * (1j * TWO_PI * m), symmetrize=False)


def dy(field):
    N = field.band_limit
    n = np.arange(-N, N + 1)[None, :]
    return Field2(field.coeffs * (1j * TWO_PI * n), symmetrize=False)


def product_grid_size(Na, Nb):
    """Grid side that resolves a product of band ``Na`` and ``Nb`` fields exactly."""
    return scipy.fft.next_fast_len(2 * (Na + Nb) + 2, real=True)


def mul(a, b, band_limit=None, *, report=False):
    """Alias-free product ``a * b``.

    The result carries band limit ``Na + Nb`` unless ``band_limit`` is
    given, in which case it is truncated.  With ``report=True`` the
    discarded spectral mass is returned alongside the field.
    """
    Na, Nb = a.band_limit, b.band_limit
    Np = Na + Nb
    M = product_grid_size(Na, Nb)
    prod = Field2(grid_to_coeffs(a.to_grid(M) * b.to_grid(M), Np))
    discarded = 0.0
    if band_limit is not None:
        prod, discarded = prod.truncate(band_limit)
    if report:
        return prod, discarded
    return prod


def linear_combine(terms):
    """``sum_k s_k f_k`` for ``terms = [(s_k, f_k), ...]``."""
    terms = list(terms)
    if not terms:
        raise ConfigError("linear_combine needs at least one term")
    N = max(f.band_limit for _, f in terms)
    out = np.zeros((2 * N + 1, 2 * N + 1), dtype=np.complex128)
    for s, f in terms:
        s = float(s)
        k = f.band_limit
        o = N - k
        out[o:o + 2 * k + 1, o:o + 2 * k + 1] += s * f.coeffs
    return Field2(out, symmetrize=False)


def sqrt_field(field, M=64, *, return_residual=False):
    """Pointwise square root, interpolated on the ``M x M`` grid.

    The result has band limit ``M // 2 - 1``.

    Raises
    ------
    PositivityViolation
        If any grid sample is ``<= 0``; carries the grid point and value.
    """
    vals = field.to_grid(M)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    vmin = vals[i, j]
    if not vmin > 0.0:
        raise PositivityViolation(
            f"field not positive on the {M}x{M} grid: {vmin:.6g} at ({i / M}, {j / M})",
            point=(i / M, j / M),
            value=vmin,
        )
    root = Field2.from_grid(np.sqrt(vals), M // 2 - 1)
    if not return_residual:
        return root
    resid = linear_combine([(1.0, mul(root, root)), (-1.0, field)])
    return root, max_norm(resid, max(M, 2 * resid.band_limit + 2))


def shift(field, sx, sy):
    """The field ``(x, y) -> F(x + sx, y + sy)``."""
    N = field.band_limit
    k = np.arange(-N, N + 1)
    phase = np.exp(1j * TWO_PI * (np.outer(k * sx, np.ones(2 * N + 1)) + np.outer(np.ones(2 * N + 1), k * sy)))
    return Field2(field.coeffs * phase)


def pointwise(func, fields, M, band_limit=None):
    """Interpolate ``func(*values)`` from samples on the ``M x M`` grid.

    Used for quotients and other non-polynomial maps of fields; exact
    only up to the interpolation error of the result at band
    ``band_limit`` (default ``M // 2 - 1``).
    """
    vals = func(*(f.to_grid(M) for f in fields))
    return Field2.from_grid(vals, M // 2 - 1 if band_limit is None else band_limit)


def mean(field):
    return field.mean()


def max_norm(field, M):
    """``max |F|`` over the ``M x M`` grid."""
    return float(np.max(np.abs(field.to_grid(M))))


def l2_norm(field, M):
    """Root-mean-square of ``F`` over the ``M x M`` grid."""
    return float(np.sqrt(np.mean(field.to_grid(M) ** 2)))


# -- export -------------------------------------------------------------------

def write_grid_csv(path, field, M):
    """Write ``x,y,value`` rows, x outer and y inner, 17 significant digits."""
    vals = field.to_grid(M) if isinstance(field, Field2) else np.asarray(field)
    M = vals.shape[0]
    pts = grid_points(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for i in range(M):
            for j in range(M):
                w.writerow([f"{pts[i]:.17g}", f"{pts[j]:.17g}", f"{vals[i, j]:.17g}"])


def read_grid_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    M = int(round(np.sqrt(rows.shape[0])))
    return rows[:, 2].reshape(M, M)


def spectrum_to_list(field):
    """Nonzero coefficients as ``[{m, n, re, im}, ...]``."""
    N = field.band_limit
    out = []
    for (i, j) in np.argwhere(field.coeffs != 0):
        c = field.coeffs[i, j]
        out.append({"m": int(i - N), "n": int(j - N), "re": float(c.real), "im": float(c.imag)})
    return out


def spectrum_from_list(items, N=None):
    items = list(items)
    if N is None:
        N = max([max(abs(d["m"]), abs(d["n"])) for d in items], default=0)
    c = np.zeros((2 * N + 1, 2 * N + 1), dtype=np.complex128)
    for d in items:
        c[d["m"] + N, d["n"] + N] = complex(d["re"], d["im"])
    return Field2(c, symmetrize=False)


def write_spectrum_json(path, field):
    with open(path, "w") as fh:
        json.dump(spectrum_to_list(field), fh)


def read_spectrum_json(path, N=None):
    with open(path) as fh:
        return spectrum_from_list(json.load(fh), N)
