"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor shapes do not conform for the requested operation."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class ParameterError(ValueError):
    """A hyperparameter is outside its legal range."""


class DataError(ValueError):
    """Dataset content or structure is invalid."""


class ConfigError(ValueError):
    """A run configuration is missing or malformed."""


class TrainingError(RuntimeError):
    """Optimization hit a non-recoverable numeric condition."""


class CheckpointError(RuntimeError):
    """A checkpoint file could not be written or read back."""
