"""Frequency-domain noise budgets for interferometers with quantum-locked mirrors."""

from .errors import (
    ConfigurationError,
    DegenerateReadoutError,
    DomainError,
    NumericConditioningError,
    QLockError,
    SingularDynamicsError,
    UnitsError,
)
from .network import FrequencyGrid, NoiseBudget, Scenario, assemble, budget, solve
from .specalg import Units

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateReadoutError",
    "DomainError",
    "FrequencyGrid",
    "NoiseBudget",
    "NumericConditioningError",
    "QLockError",
    "Scenario",
    "SingularDynamicsError",
    "Units",
    "UnitsError",
    "assemble",
    "budget",
    "solve",
]
