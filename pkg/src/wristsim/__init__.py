"""Simulated robotic wrist proprioception assessment and its statistics."""
from .errors import (
    DegenerateError, DomainError, FeatureError, InsufficientDataError, SchemaError,
    SimulationTimeout, StateError, WristSimError,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateError", "DomainError", "FeatureError", "InsufficientDataError", "SchemaError",
    "SimulationTimeout", "StateError", "WristSimError", "__version__",
]
