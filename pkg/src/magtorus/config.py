"""Run configuration, presets and JSON round-trip."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .errors import ConfigError

PRESETS = ("default", "flat", "example1")
SCHEMES = ("dopri5", "rk4")


def _tuple(v):
    return tuple(float(c) for c in v)


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; one JSON object per run.

    ``preset`` selects the system family: ``default`` and ``flat`` deform
    the Liouville data ``lam1_coeffs``/``lam2_coeffs``; ``example1`` uses
    the metric ``lam(y)`` with potential ``u(y)`` from ``example1_*``.
    """

    preset: str = "default"
    lam1_coeffs: tuple = (1.0, 0.1)
    lam2_coeffs: tuple = (1.0, 0.1)
    K: int = 12
    N_work: int = 64
    t: float = 0.01
    M_verify: int = 128
    T: float = 20.0
    tol: float = 1e-10
    scheme: str = "dopri5"
    step: float = 0.01
    sample_dt: float = 0.05
    seed: int = 0
    n_x: int = 4
    n_phi: int = 4
    y_start: float = 0.37
    K_sweep: tuple = (4, 8, 12)
    energies: tuple = (0.25, 0.5, 1.0)
    example1_lam: tuple = (1.0, 0.2)
    example1_u_cos: tuple = (0.0,)
    example1_u_sin: tuple = (0.0, 1.0)
    residual_tol: float = 1e-8
    drift_tol: float = 1e-6
    classify_T: float = 5.0
    candidates: tuple = ("liouville", "example1", "deformed")

    def __post_init__(self):
        for name in ("lam1_coeffs", "lam2_coeffs", "energies", "example1_lam",
                     "example1_u_cos", "example1_u_sin"):
            try:
                object.__setattr__(self, name, _tuple(getattr(self, name)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name} must be a list of numbers") from exc
        try:
            object.__setattr__(self, "K_sweep", tuple(int(k) for k in self.K_sweep))
        except (TypeError, ValueError) as exc:
            raise ConfigError("K_sweep must be a list of integers") from exc
        object.__setattr__(self, "candidates", tuple(str(c) for c in self.candidates))
        self.validate()

    def validate(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("K", "N_work", "M_verify", "n_x", "n_phi"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name in ("T", "tol", "step", "sample_dt", "residual_tol", "drift_tol", "classify_T"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ConfigError(f"t must be a non-negative number, got {self.t!r}")
        if not 0.0 <= self.y_start < 1.0:
            raise ConfigError("y_start must lie in [0, 1)")
        if not self.lam1_coeffs or not self.lam2_coeffs or not self.example1_lam:
            raise ConfigError("coefficient lists must be non-empty")
        if max(len(self.lam1_coeffs), len(self.lam2_coeffs)) - 1 > self.N_work:
            raise ConfigError("N_work is smaller than the degree of the Liouville data")
        from .classifier import ExampleOneData
        from .deformation import LiouvilleData
        from .errors import PositivityViolation

        try:
            LiouvilleData(self.lam1_coeffs, self.lam2_coeffs)
            ExampleOneData(self.example1_lam, self.example1_u_cos, self.example1_u_sin)
        except PositivityViolation as exc:
            raise ConfigError(f"input data rejected: {exc}") from exc
        if any(k < 1 or k > self.K for k in self.K_sweep):
            raise ConfigError(f"K_sweep entries must lie in [1, K={self.K}]")
        if any(not (math.isfinite(e) and e > 0) for e in self.energies):
            raise ConfigError("energies must be positive")
        if self.M_verify < 3 * self.N_work // 2:
            raise ConfigError("M_verify too small for N_work")
        for c in self.candidates:
            if not c:
                raise ConfigError("empty candidate name")

    def to_dict(self):
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in dataclasses.fields(self) for v in [getattr(self, f.name)]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d, base=None):
        """Build from ``d``, filling missing keys from ``base`` (or the preset)."""
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if base is None:
            base = preset_config(d.get("preset", "default"))
        merged = base.to_dict()
        merged.update(d)
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text, base=None):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d, base)

    @classmethod
    def load(cls, path, base=None):
        try:
            with open(path) as fh:
                return cls.from_json(fh.read(), base)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def preset_config(name):
    """The built-in configuration called ``name``."""
    if name == "default":
        return RunConfig()
    if name == "flat":
        return RunConfig(preset="flat", lam1_coeffs=(1.0,), lam2_coeffs=(1.0,))
    if name == "example1":
        return RunConfig(preset="example1", drift_tol=1e-9)
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def resolve_config(preset=None, path=None):
    """Preset defaults overridden by the JSON file at ``path``.

    A ``preset`` key inside the file wins over the command-line preset.
    """
    base = preset_config(preset or "default")
    if path is None:
        return base
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if isinstance(d, dict) and "preset" in d:
        base = preset_config(d["preset"])
    return RunConfig.from_dict(d, base)


__all__ = ["PRESETS", "RunConfig", "preset_config", "resolve_config"]
