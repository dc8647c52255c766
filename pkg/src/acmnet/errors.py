"""Exception types shared across the package."""


class AcmnetError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AcmnetError):
    """Invalid configuration or incompatible layer/tensor shapes."""


class FormatError(AcmnetError):
    """A file on disk does not match the expected format."""


class CheckpointMismatch(AcmnetError):
    """Checkpoint contents do not match the model built from the config."""


class MissingGradient(AcmnetError):
    """A parameter handed to the optimizer carries no gradient.

    This indicates a subgraph that is detached from the loss.
    """


class TrainingDiverged(AcmnetError):
    """Loss became non-finite during training."""

    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value
