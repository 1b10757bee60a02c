"""Exception types raised across the package."""


class QLockError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QLockError, ValueError):
    """Inconsistent or incomplete scenario/run description."""


class DomainError(QLockError, ValueError):
    """A numerical argument lies outside its allowed domain."""


class UnitsError(ConfigurationError):
    """SI and normalized quantities were mixed in one computation."""


class NumericError(QLockError, ArithmeticError):
    """Base class for failures of the numerical machinery."""


class SingularDynamicsError(NumericError):
    """The per-frequency linear system (or an impedance) is singular."""

    def __init__(self, message, omega=None, scenario=None):
        parts = [message]
        if omega is not None:
            parts.append(f"omega={omega:.6g}")
        if scenario is not None:
            parts.append(f"scenario={scenario}")
        super().__init__(", ".join(parts))
        self.omega = omega
        self.scenario = scenario


class DegenerateReadoutError(NumericError):
    """Homodyne angle with sin(theta) == 0 carries no displacement signal."""


class NumericConditioningError(NumericError):
    """A quadratic form needed by the optimizer is not positive definite."""
