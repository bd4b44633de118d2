"""Exception types shared across the toolkit."""


class InputError(ValueError):
    """Raised when runtime data (images, tables, counts) violates a precondition."""


class ConfigError(ValueError):
    """Raised when a configuration is internally inconsistent or unsatisfiable."""


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""
