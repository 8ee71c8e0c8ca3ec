from plugnorm.constants import ExitCodes


class PlugnormError(Exception):
    """Base exception for every failure the CLI knows how to report."""

    exit_code = ExitCodes.failure


class ConfigError(PlugnormError):
    """The experiment configuration is invalid."""

    exit_code = ExitCodes.config_error


class ConfigMismatchError(ConfigError):
    """The configuration disagrees with the manifest of a checkpoint."""


class InvariantViolation(PlugnormError):
    """A contract of the numerical pipeline was broken."""

    exit_code = ExitCodes.invariant_violation


class ShapeError(InvariantViolation, ValueError):
    """Tensor shapes are inconsistent with the requested operation."""


class GraphError(InvariantViolation):
    """Backward was requested on something the tape cannot differentiate."""


class NonFiniteError(InvariantViolation):
    """An operation produced NaN or Inf values."""


class FrozenEncoderViolation(InvariantViolation):
    """The frozen segmentation encoder changed during DIN-net training."""


class TrainingDivergedError(InvariantViolation):
    """A training loss became non-finite."""


class UndefinedDistanceError(InvariantViolation):
    """A boundary distance was requested for an empty mask."""


class PlugSiteError(InvariantViolation):
    """A plug spec references an unknown site or mismatched channel count."""


class PlugnormIOError(PlugnormError):
    """Reading or writing an artifact failed."""

    exit_code = ExitCodes.io_error


class DatasetExistsError(PlugnormIOError):
    """The dataset root is not empty and overwriting was not requested."""


class ImageFormatError(PlugnormIOError):
    """An image or tensor file is malformed or uses an unsupported layout."""


class CheckpointError(PlugnormIOError):
    """A checkpoint container is missing or incomplete."""
