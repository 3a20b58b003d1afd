"""Positive steady states of structured population models.

Spectral bounds of the linearised generators, level-set tracing of their zero
set and fixed-point searches along it, with scalar and state-space routes
for cross-checking.
"""
from .errors import ConfigError, SolverError, SteadyStateError
from .models import (ConsumerResourceModel, EarlyHumanModel, Environment, JuvenileAdultModel,
                     SelectionMutationModel)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConsumerResourceModel", "EarlyHumanModel", "Environment",
    "JuvenileAdultModel", "SelectionMutationModel", "SolverError", "SteadyStateError",
]
