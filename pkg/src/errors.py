"""Exception hierarchy for the canvas-drawer pipeline.

Every error carries the process exit code the CLI reports for it.
"""


class CanvasDrawerError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(CanvasDrawerError):
    """Invalid run configuration, incompatible task/domain, or a refused overwrite."""

    exit_code = 2


class FrozenCanvasError(ConfigError):
    """Drawer training was attempted against a canvas network that is not frozen."""


class MissingPrerequisiteError(CanvasDrawerError):
    """A required artifact (checkpoint, rollout set, dataset file) does not exist."""

    exit_code = 3

    def __init__(self, path, what: str = "artifact"):
        self.path = str(path)
        super().__init__(f"Missing {what}: {self.path}")


class ArtifactError(CanvasDrawerError):
    """An artifact exists but cannot be decoded (bad magic, version, truncation)."""

    exit_code = 3


class UntrainedModelError(CanvasDrawerError):
    exit_code = 3


class InputMismatchError(CanvasDrawerError):
    """Input image or tensor sizes do not match what a model expects."""

    exit_code = 4


class ShapeError(InputMismatchError, ValueError):
    """Descriptive dimension error raised by tensor operations."""


class DatasetError(CanvasDrawerError):
    """Empty, truncated or malformed dataset."""

    exit_code = 4


class NumericError(CanvasDrawerError, ArithmeticError):
    """NaN or Inf surfaced at an op boundary or in a loss."""

    exit_code = 5
