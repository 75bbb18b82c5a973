"""Magnetic geodesic flow: angle form on ``H = 1/2`` and full cotangent form.

Angle form, state ``(x, y, phi)`` with ``p = sqrt(lam) (cos phi, sin phi)``::

    x'   = cos(phi) / sqrt(lam)
    y'   = sin(phi) / sqrt(lam)
    phi' = (lam_y cos(phi) - lam_x sin(phi)) / (2 lam sqrt(lam)) - omega / lam

Cotangent form, state ``(x, y, p1, p2)`` with ``H = (p1^2 + p2^2) / (2 lam)``::

    x'  = p1 / lam,   p1' = -H_x + omega p2 / lam
    y'  = p2 / lam,   p2' = -H_y - omega p1 / lam
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PositivityViolation, StepUnderflow
from .kernels import (
    ANGLE,
    COTANGENT,
    NONPOSITIVE,
    OK,
    STATUS_NAMES,
    get_kernels,
)

DEFAULT_TOL = 1e-10
DEFAULT_SAMPLE_DT = 0.05
LATTICE_Y = 0.37


@dataclass(frozen=True)
class PhasePointAngle:
    x: float
    y: float
    phi: float

    def as_array(self):
        return np.array([self.x, self.y, self.phi], dtype=float)


@dataclass(frozen=True)
class PhasePointCotangent:
    x: float
    y: float
    p1: float
    p2: float

    def as_array(self):
        return np.array([self.x, self.y, self.p1, self.p2], dtype=float)


@dataclass(frozen=True)
class IntegratorSettings:
    """Step control for :func:`integrate`.

    ``scheme`` is ``"dopri5"`` (embedded 5(4) pair, PI control, error per
    unit step at most ``tol`` in the scaled max-norm) or ``"rk4"`` (fixed
    step ``step``, bit-reproducible).
    """

    step: float = 0.01
    tol: float = DEFAULT_TOL
    scheme: str = "dopri5"
    sample_dt: float = DEFAULT_SAMPLE_DT
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.step > 0 or not self.tol > 0 or not self.sample_dt > 0:
            raise ConfigError("step, tol and sample_dt must be positive")
        if self.scheme not in ("dopri5", "rk4"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    """Sampled solution; positions are stored mod 1 with separate windings."""

    form: str
    times: np.ndarray
    states: np.ndarray
    winding: np.ndarray
    invariant_samples: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def unwrapped(self):
        """States with the torus coordinates lifted to the plane."""
        s = np.array(self.states)
        s[:, :2] += self.winding
        return s

    @property
    def x(self):
        return self.states[:, 0]

    @property
    def y(self):
        return self.states[:, 1]


def _packed(sys):
    C = getattr(sys, "_packed_cache", None)
    if C is None:
        C = sys.packed()
        object.__setattr__(sys, "_packed_cache", C)
    return C


def _rhs(sys, kind, state, backend=None):
    k = get_kernels(backend)
    out = np.empty(len(state))
    buf = np.empty(4)
    if not k.rhs(kind, _packed(sys), np.asarray(state, dtype=float), out, buf):
        raise PositivityViolation(f"conformal factor not positive at ({state[0]}, {state[1]})",
                                  point=(state[0], state[1]), value=buf[0])
    return out


def angle_flow_rhs(sys, p, backend=None):
    """``(x', y', phi')`` at ``p``."""
    return tuple(_rhs(sys, ANGLE, p.as_array(), backend))


def hamiltonian_flow_rhs(sys, p, backend=None):
    """``(x', y', p1', p2')`` at ``p``."""
    return tuple(_rhs(sys, COTANGENT, p.as_array(), backend))


def cotangent_from_angle(sys, p, energy=0.5):
    """Point on ``{H = energy}`` with momentum direction ``phi``."""
    lam = float(sys.lam(p.x, p.y))
    if not lam > 0:
        raise PositivityViolation("conformal factor not positive", point=(p.x, p.y), value=lam)
    r = math.sqrt(2.0 * energy * lam)
    return PhasePointCotangent(p.x, p.y, r * math.cos(p.phi), r * math.sin(p.phi))


def sample_times(T, sample_dt):
    n = max(1, int(math.ceil(T / sample_dt - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def integrate(sys, start, T, settings=None, *, times=None, backend=None):
    """Integrate the flow from ``start`` over ``[0, T]``.

    The form (angle or cotangent) follows the type of ``start``.  Samples
    are taken at ``times`` (default: uniform spacing ``settings.sample_dt``)
    and every sample time is hit exactly by the step sequence.

    Raises
    ------
    StepUnderflow
        If the adaptive step collapses or the step budget runs out.
    PositivityViolation
        If the conformal factor is not positive along the path.
    """
    settings = settings or IntegratorSettings()
    if isinstance(start, PhasePointAngle):
        kind, form = ANGLE, "angle"
    elif isinstance(start, PhasePointCotangent):
        kind, form = COTANGENT, "cotangent"
    else:
        raise ConfigError(f"unsupported start point {start!r}")
    t_out = sample_times(T, settings.sample_dt) if times is None else np.asarray(times, float)
    k = get_kernels(backend)
    C = _packed(sys)
    y0 = start.as_array()
    if settings.scheme == "dopri5":
        Y, status, n_acc, n_rej, h = k.dopri(kind, C, y0, t_out, settings.tol,
                                             settings.step, settings.max_steps)
    else:
        Y, status, n_acc, n_rej, h = k.rk4(kind, C, y0, t_out, settings.step)
    if status == NONPOSITIVE:
        raise PositivityViolation("conformal factor not positive along the trajectory")
    if status != OK:
        t_fail = t_out[len(Y) - 1] if len(Y) else 0.0
        raise StepUnderflow(f"integration aborted ({STATUS_NAMES[status]}) after t={t_fail:.6g}, "
                            f"{n_acc} accepted / {n_rej} rejected steps, last step {h:.3e}",
                            t=t_fail, step=h)
    Y = np.array(Y)
    wind = np.floor(Y[:, :2])
    Y[:, :2] -= wind
    return Trajectory(form, t_out, Y, wind.astype(np.int64),
                      stats={"accepted": int(n_acc), "rejected": int(n_rej),
                             "scheme": settings.scheme, "tol": settings.tol,
                             "backend": k.name})


# -- monitors -----------------------------------------------------------------

def _positions(traj):
    return traj.states[:, 0], traj.states[:, 1]


def hamiltonian_monitor(sys):
    """``H`` along a cotangent trajectory (identically 1/2 in angle form)."""
    def monitor(traj):
        x, y = _positions(traj)
        if traj.form == "angle":
            return np.full(len(traj.times), 0.5)
        return (traj.states[:, 2] ** 2 + traj.states[:, 3] ** 2) / (2.0 * sys.lam(x, y))
    return monitor


def level_integral_monitor(F, U=None):
    """The level integral ``F`` along a trajectory.

    Angle form uses the Fourier-in-angle coefficients of ``F``.  Cotangent
    form needs the state ``U`` and evaluates the quadratic polynomial
    ``2 p1^2 - 2 p2^2 + 2 f p1 - 2 g p2 + u0``, which agrees with ``F`` on
    ``H = 1/2``.
    """
    from .assembly import eval_integral

    def monitor(traj):
        x, y = _positions(traj)
        if traj.form == "angle":
            return eval_integral(F, x, y, traj.states[:, 2])
        if U is None:
            raise ConfigError("cotangent monitor needs the state U")
        p1, p2 = traj.states[:, 2], traj.states[:, 3]
        return (2.0 * (p1 ** 2 - p2 ** 2) + 2.0 * U.f(x, y) * p1 - 2.0 * U.g(x, y) * p2
                + U.u0(x, y))
    return monitor


def drift_stats(values):
    values = np.asarray(values, dtype=float)
    f0 = float(values[0])
    max_abs = float(np.max(np.abs(values - f0)))
    return {"initial": f0, "max_abs_drift": max_abs, "rel_drift": max_abs / max(1.0, abs(f0))}


def conservation_report(traj, monitors):
    """Drift of each monitor along ``traj``.

    ``monitors`` maps names to callables ``traj -> values``.  The sampled
    values are stored in ``traj.invariant_samples``.
    """
    out = {}
    for name, mon in monitors.items():
        vals = np.asarray(mon(traj), dtype=float)
        traj.invariant_samples[name] = vals
        out[name] = drift_stats(vals)
    return out


def tolerance_slope(sys, start, T, monitor, tols=(1e-7, 1e-9), sample_dt=None, backend=None):
    """Slope of ``log(drift)`` against ``log(tol)`` from runs at two tolerances.

    Sparse sampling (``sample_dt = T / 20`` by default) keeps the step
    sequence driven by the tolerance rather than by the sample grid.
    """
    sample_dt = T / 20 if sample_dt is None else sample_dt
    drifts = []
    for tol in tols:
        traj = integrate(sys, start, T, IntegratorSettings(tol=tol, sample_dt=sample_dt),
                         backend=backend)
        drifts.append(drift_stats(monitor(traj))["max_abs_drift"])
    slope = math.log(drifts[0] / drifts[1]) / math.log(tols[0] / tols[1])
    return {"tols": list(tols), "drifts": drifts, "slope": slope}


def cross_check(sys, start, T, settings=None, backend=None):
    """Maximum position gap between the angle and cotangent integrations.

    ``start`` is an angle point; the cotangent start is its image on
    ``H = 1/2``.
    """
    settings = settings or IntegratorSettings()
    a = integrate(sys, start, T, settings, backend=backend)
    c = integrate(sys, cotangent_from_angle(sys, start), T, settings, times=a.times,
                  backend=backend)
    gap = a.unwrapped()[:, :2] - c.unwrapped()[:, :2]
    return float(np.max(np.hypot(gap[:, 0], gap[:, 1])))


def start_lattice(n_x=4, n_phi=4, y=LATTICE_Y, seed=0):
    """``n_x * n_phi`` angle starts on a shifted ``(x, phi)`` lattice at fixed ``y``.

    The shift of the lattice is drawn from ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    ox = rng.uniform(0.0, 1.0 / n_x)
    op = rng.uniform(0.0, 2.0 * np.pi / n_phi)
    return [PhasePointAngle(float(ox + i / n_x), float(y), float(op + 2.0 * np.pi * j / n_phi))
            for i in range(n_x) for j in range(n_phi)]


def reversed_start(traj):
    """Final state with velocity reversed, for time-reversal checks."""
    s = traj.unwrapped()[-1]
    if traj.form == "angle":
        return PhasePointAngle(s[0], s[1], s[2] + np.pi)
    return PhasePointCotangent(s[0], s[1], -s[2], -s[3])
