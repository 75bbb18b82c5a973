"""Exception types shared across the package."""

from __future__ import annotations


class MagtorusError(Exception):
    """Base class for all package errors."""


class ConfigError(MagtorusError, ValueError):
    """Invalid run configuration or invalid operation arguments."""


class NumericalError(MagtorusError):
    """A numerical precondition failed during a computation."""


class PositivityViolation(NumericalError):
    """A field required to be strictly positive was not.

    Attributes
    ----------
    point : tuple of float or None
        Grid point ``(x, y)`` where the smallest value was found.
    value : float or None
        The offending value.
    suggested_t : float or None
        When raised while evaluating a deformation jet, the largest
        deformation time that passed the trust checks.
    """

    def __init__(self, message, point=None, value=None, suggested_t=None):
        super().__init__(message)
        self.point = point
        self.value = value
        self.suggested_t = suggested_t

    def to_dict(self):
        return {
            "error": "PositivityViolation",
            "message": str(self),
            "point": None if self.point is None else [float(v) for v in self.point],
            "value": None if self.value is None else float(self.value),
            "suggested_t": self.suggested_t,
        }


class StepUnderflow(NumericalError):
    """The adaptive integrator could not meet its tolerance."""

    def __init__(self, message, t=None, step=None):
        super().__init__(message)
        self.t = t
        self.step = step


class VerificationFailure(MagtorusError):
    """A verification threshold was not met."""
