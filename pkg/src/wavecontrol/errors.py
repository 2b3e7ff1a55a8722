"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid grid, region, nonlinearity, or experiment configuration."""


class BlowupError(RuntimeError):
    """Nonfinite values appeared during time stepping."""

    def __init__(self, time_level, message=None):
        self.time_level = time_level
        super().__init__(message or f"nonfinite values at time level {time_level}")


class InsufficientRecords(ValueError):
    """Not enough usable iterates for a convergence-order fit."""
