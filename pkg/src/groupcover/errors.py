"""Exception types shared across the package."""


class GroupcoverError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GroupcoverError):
    """Invalid or inconsistent configuration values."""


class ParseError(GroupcoverError):
    """Malformed input file; message names the offending line."""


class FitError(GroupcoverError):
    """A parametric fit could not reach the required moment fidelity."""


class PlanningError(GroupcoverError):
    """No group count satisfies the requested design target."""


class NumericError(GroupcoverError):
    """Numerical evaluation failed to reach the required tolerance."""

    def __init__(self, message: str, achieved_tolerance: float | None = None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance
