"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition."""


class InfeasiblePowerError(ValueError):
    """Requested discharge power exceeds what the battery can deliver."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation is undefined (zero rank variance)."""


class TrainingFailureError(RuntimeError):
    """Model training diverged (loss became non-finite)."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
