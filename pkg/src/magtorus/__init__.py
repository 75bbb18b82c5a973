"""Magnetic geodesic flows on the 2-torus with a quadratic integral on one energy level.

The package builds the Taylor jet of a deformation of Liouville metrics,
assembles the magnetic system and its level integral, and checks the
result by residuals and by integrating the flow.
"""

from importlib.metadata import PackageNotFoundError, version

from .assembly import (
    MagneticSystem,
    QuadraticIntegralOnLevel,
    assemble_integral,
    eval_integral,
    fourier_condition_residual,
    liouville_reference_integral,
    magnetic_field,
    magnetic_system,
    mixed_mode_mass,
    system_residual,
    verify_report,
)
from .classifier import (
    AllLevelsQuadratic,
    ExampleOneData,
    all_levels_residuals,
    classify,
    example_one_system,
    proof_consequence_checks,
)
from .deformation import (
    DEFAULT_DATA,
    LiouvilleData,
    StateJet,
    StateU,
    ck_jet,
    evaluate_jet,
    evaluate_trusted,
    jet_convergence_report,
    liouville_initial_state,
    symmetry_rhs,
)
from .dynamics import (
    IntegratorSettings,
    PhasePointAngle,
    PhasePointCotangent,
    Trajectory,
    conservation_report,
    cross_check,
    integrate,
    level_integral_monitor,
    start_lattice,
)
from .errors import (
    ConfigError,
    MagtorusError,
    NumericalError,
    PositivityViolation,
    StepUnderflow,
    VerificationFailure,
)
from .fields import Field2, dx, dy, field_from_modes, mul, sqrt_field

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "AllLevelsQuadratic",
    "ConfigError",
    "DEFAULT_DATA",
    "ExampleOneData",
    "Field2",
    "IntegratorSettings",
    "LiouvilleData",
    "MagneticSystem",
    "MagtorusError",
    "NumericalError",
    "PhasePointAngle",
    "PhasePointCotangent",
    "PositivityViolation",
    "QuadraticIntegralOnLevel",
    "StateJet",
    "StateU",
    "StepUnderflow",
    "Trajectory",
    "VerificationFailure",
    "all_levels_residuals",
    "assemble_integral",
    "ck_jet",
    "classify",
    "conservation_report",
    "cross_check",
    "dx",
    "dy",
    "eval_integral",
    "evaluate_jet",
    "evaluate_trusted",
    "example_one_system",
    "field_from_modes",
    "fourier_condition_residual",
    "integrate",
    "jet_convergence_report",
    "level_integral_monitor",
    "liouville_initial_state",
    "liouville_reference_integral",
    "magnetic_field",
    "magnetic_system",
    "mixed_mode_mass",
    "mul",
    "proof_consequence_checks",
    "sqrt_field",
    "start_lattice",
    "symmetry_rhs",
    "system_residual",
    "verify_report",
]
