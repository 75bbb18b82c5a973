"""Hot loops of the trajectory integrator, with numba and pure-numpy paths.

Both backends share one source for the right-hand sides and the
Runge-Kutta loops; they differ in how the point evaluation of the
packed field stack is done and in whether the loops are compiled.

The numba path is used unless ``MAGTORUS_DISABLE_NUMBA`` is set to a
non-empty value other than ``0`` (``NUMBA_DISABLE_JIT`` is honored as
well), or numba cannot be imported.

Field stacks are complex arrays ``C[f, m + N, n + N]`` holding
``[lam, lam_x, lam_y, omega]`` in that order.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

ANGLE = 0
COTANGENT = 1

OK = 0
UNDERFLOW = 1
MAX_STEPS = 2
NONPOSITIVE = 3

STATUS_NAMES = {OK: "ok", UNDERFLOW: "step underflow", MAX_STEPS: "max steps",
                NONPOSITIVE: "conformal factor not positive"}


def _env_flag(name):
    v = os.environ.get(name, "")
    return v not in ("", "0")


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not (_env_flag("MAGTORUS_DISABLE_NUMBA")
                                     or _env_flag("NUMBA_DISABLE_JIT"))

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)


def eval_stack_loops(C, x, y, out):
    nf = C.shape[0]
    L = C.shape[1]
    N = (L - 1) // 2
    w = 2.0 * math.pi
    ex = np.empty(L, dtype=np.complex128)
    ey = np.empty(L, dtype=np.complex128)
    for i in range(L):
        m = i - N
        ex[i] = complex(math.cos(w * m * x), math.sin(w * m * x))
        ey[i] = complex(math.cos(w * m * y), math.sin(w * m * y))
    for f in range(nf):
        acc = 0.0 + 0.0j
        for i in range(L):
            row = 0.0 + 0.0j
            for j in range(L):
                row += C[f, i, j] * ey[j]
            acc += ex[i] * row
        out[f] = acc.real


def eval_stack_numpy(C, x, y, out):
    N = (C.shape[1] - 1) // 2
    k = np.arange(-N, N + 1)
    ex = np.exp(2j * np.pi * k * x)
    ey = np.exp(2j * np.pi * k * y)
    out[:] = np.einsum("i,fij,j->f", ex, C, ey).real


def _build(jit, eval_stack):

    @jit
    def rhs(kind, C, s, out, buf):
        eval_stack(C, s[0], s[1], buf)
        L = buf[0]
        Lx = buf[1]
        Ly = buf[2]
        W = buf[3]
        if not L > 0.0:
            return False
        if kind == ANGLE:
            sL = math.sqrt(L)
            c = math.cos(s[2])
            sn = math.sin(s[2])
            out[0] = c / sL
            out[1] = sn / sL
            out[2] = (Ly * c - Lx * sn) / (2.0 * L * sL) - W / L
        else:
            p1 = s[2]
            p2 = s[3]
            psq = p1 * p1 + p2 * p2
            out[0] = p1 / L
            out[1] = p2 / L
            out[2] = psq * Lx / (2.0 * L * L) + W * p2 / L
            out[3] = psq * Ly / (2.0 * L * L) - W * p1 / L
        return True

    @jit
    def dopri(kind, C, y0, t_out, tol, h0, max_steps):
        d = y0.shape[0]
        n_out = t_out.shape[0]
        Y = np.empty((n_out, d))
        Y[0, :] = y0
        y = y0.copy()
        k1 = np.empty(d)
        k2 = np.empty(d)
        k3 = np.empty(d)
        k4 = np.empty(d)
        k5 = np.empty(d)
        k6 = np.empty(d)
        k7 = np.empty(d)
        tmp = np.empty(d)
        ynew = np.empty(d)
        buf = np.empty(C.shape[0])
        n_acc = 0
        n_rej = 0
        if not rhs(kind, C, y, k1, buf):
            return Y, NONPOSITIVE, n_acc, n_rej, 0.0
        t = t_out[0]
        h = h0
        r_prev = 1e-4
        idx = 1
        while idx < n_out:
            if n_acc + n_rej >= max_steps:
                return Y[:idx], MAX_STEPS, n_acc, n_rej, h
            t_next = t_out[idx]
            hit = False
            step = h
            if t + step >= t_next - 1e-13 * max(1.0, abs(t_next)):
                step = t_next - t
                hit = True
            for i in range(d):
                tmp[i] = y[i] + step * _A21 * k1[i]
            ok = rhs(kind, C, tmp, k2, buf)
            for i in range(d):
                tmp[i] = y[i] + step * (_A31 * k1[i] + _A32 * k2[i])
            ok = ok and rhs(kind, C, tmp, k3, buf)
            for i in range(d):
                tmp[i] = y[i] + step * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            ok = ok and rhs(kind, C, tmp, k4, buf)
            for i in range(d):
                tmp[i] = y[i] + step * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                                        + _A54 * k4[i])
            ok = ok and rhs(kind, C, tmp, k5, buf)
            for i in range(d):
                tmp[i] = y[i] + step * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                        + _A64 * k4[i] + _A65 * k5[i])
            ok = ok and rhs(kind, C, tmp, k6, buf)
            for i in range(d):
                ynew[i] = y[i] + step * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                         + _B5 * k5[i] + _B6 * k6[i])
            ok = ok and rhs(kind, C, ynew, k7, buf)
            if not ok:
                return Y[:idx], NONPOSITIVE, n_acc, n_rej, step
            # error per unit step, mixed absolute/relative scale
            err = 0.0
            for i in range(d):
                e = step * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                            + _E6 * k6[i] + _E7 * k7[i])
                sc = tol * max(1.0, abs(y[i]), abs(ynew[i]))
                e = abs(e) / sc
                if e > err:
                    err = e
            r = err / step
            if r <= 1.0:
                t = t_next if hit else t + step
                for i in range(d):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                n_acc += 1
                if hit:
                    Y[idx, :] = y
                    idx += 1
                r = max(r, 1e-10)
                fac = 0.9 * r ** (-0.7 / 4.0) * r_prev ** (0.4 / 4.0)
                fac = min(5.0, max(0.2, fac))
                r_prev = r
                if not hit or step >= h:
                    h = step * fac
                else:
                    h = max(h, step * fac)
            else:
                n_rej += 1
                fac = max(0.2, 0.9 * r ** (-1.0 / 4.0))
                h = step * fac
            if h < 1e-14 * max(1.0, abs(t)):
                return Y[:idx], UNDERFLOW, n_acc, n_rej, h
        return Y, OK, n_acc, n_rej, h

    @jit
    def rk4(kind, C, y0, t_out, h):
        d = y0.shape[0]
        n_out = t_out.shape[0]
        Y = np.empty((n_out, d))
        Y[0, :] = y0
        y = y0.copy()
        k1 = np.empty(d)
        k2 = np.empty(d)
        k3 = np.empty(d)
        k4 = np.empty(d)
        tmp = np.empty(d)
        buf = np.empty(C.shape[0])
        n_steps = 0
        for idx in range(1, n_out):
            span = t_out[idx] - t_out[idx - 1]
            n_sub = max(1, int(math.ceil(span / h - 1e-9)))
            step = span / n_sub
            for _ in range(n_sub):
                ok = rhs(kind, C, y, k1, buf)
                for i in range(d):
                    tmp[i] = y[i] + 0.5 * step * k1[i]
                ok = ok and rhs(kind, C, tmp, k2, buf)
                for i in range(d):
                    tmp[i] = y[i] + 0.5 * step * k2[i]
                ok = ok and rhs(kind, C, tmp, k3, buf)
                for i in range(d):
                    tmp[i] = y[i] + step * k3[i]
                ok = ok and rhs(kind, C, tmp, k4, buf)
                if not ok:
                    return Y[:idx], NONPOSITIVE, n_steps, 0, step
                for i in range(d):
                    y[i] += step * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
                n_steps += 1
            Y[idx, :] = y
        return Y, OK, n_steps, 0, h

    return SimpleNamespace(eval_stack=eval_stack, rhs=rhs, dopri=dopri, rk4=rk4)


def _identity(f):
    return f


numpy_kernels = _build(_identity, eval_stack_numpy)
numpy_kernels.name = "numpy"

if NUMBA_AVAILABLE:
    _njit = numba.njit(cache=False, nogil=True)
    numba_kernels = _build(_njit, _njit(eval_stack_loops))
    numba_kernels.name = "numba"
else:  # pragma: no cover
    numba_kernels = None

kernels = numba_kernels if USE_NUMBA else numpy_kernels


def get_kernels(backend=None):
    """Kernel namespace for ``backend`` in ``{None, 'numba', 'numpy'}``."""
    if backend is None:
        return kernels
    if backend == "numba":
        if numba_kernels is None:
            raise RuntimeError("numba is not installed")
        return numba_kernels
    if backend == "numpy":
        return numpy_kernels
    raise ValueError(f"unknown backend {backend!r}")
