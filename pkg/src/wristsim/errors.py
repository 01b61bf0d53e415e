"""Exception hierarchy shared across the package."""


class WristSimError(Exception):
    pass


class DomainError(WristSimError, ValueError):
    """An argument is outside the operation's domain."""


class StateError(WristSimError, RuntimeError):
    """An object was used in a state that does not allow the call."""


class InsufficientDataError(WristSimError):
    """Not enough observations to form the requested estimate."""


class FeatureError(WristSimError):
    """A trajectory feature could not be extracted."""


class DegenerateError(WristSimError, ValueError):
    """The statistic is undefined for this input (e.g. zero variance)."""


class SchemaError(WristSimError, ValueError):
    """A table or config file does not match the expected layout."""


class SimulationTimeout(WristSimError):
    """A simulated task did not terminate within its step cap."""
