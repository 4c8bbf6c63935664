"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A run or grid configuration is invalid (bad key, bad value, bad combination)."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite mid-run. Carries the partial run record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
