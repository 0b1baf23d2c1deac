"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Input array does not match the expected dimensions."""


class InvalidCacheError(ValueError):
    """A forward cache does not belong to the network it is used with."""


class NumericError(FloatingPointError):
    """A loss, gradient or network output is not finite."""


class ProtocolError(RuntimeError):
    """An environment was used out of order (e.g. step after done)."""


class NotReadyError(RuntimeError):
    """The good-trajectory buffer is empty and cannot be sampled."""


class ConfigError(ValueError):
    """Invalid experiment or environment configuration."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class UsageError(ValueError):
    """A plotting or CLI call was given nothing usable (e.g. no records)."""


class UnsupportedEnvError(ValueError):
    """An operation only defined for the point-mass task got something else."""


class IncidentLimitError(RuntimeError):
    """A run recorded more numeric incidents than ``max_incidents`` allows."""
