"""Exception hierarchy shared across the package.

Errors are grouped loosely by the CLI exit code they map to: usage/config
problems, data problems (generation, files, preprocessing), and training
problems.
"""


class TraindiagError(Exception):
    """Base class for all package-specific errors."""


# --- signals / spectra ---

class InvalidSignal(TraindiagError):
    """Signal contains NaN/Inf or has an unusable length."""


class EmptySliceSet(TraindiagError):
    """Recording is shorter than a single slice."""


# --- labels / dataset semantics ---

class InvalidLabel(TraindiagError):
    """Compound-label string or component sets violate the label grammar."""


class InvalidFaultCode(TraindiagError):
    """Fault code is not one of the 17 known codes."""


class InvalidCondition(TraindiagError):
    """Working condition outside the 9 supported (speed, load) combinations."""


class InvalidComponent(TraindiagError):
    """Component tag is not one of M, G, LA, RA."""


# --- recording / manifest I/O ---

class BadHeader(TraindiagError):
    """Recording file header is malformed or has the wrong magic/version."""


class ChannelCountMismatch(TraindiagError):
    """Recording file does not carry the expected 21 channels."""


class TruncatedPayload(TraindiagError):
    """Recording payload is shorter than the header promises."""


class BadManifest(TraindiagError):
    """Manifest file is malformed or references missing files."""


# --- preprocessing ---

class SpeedUnidentified(TraindiagError):
    """No speed candidate within tolerance of the dominant current peak."""

    def __init__(self, peak_hz: float, message: str | None = None):
        self.peak_hz = peak_hz
        super().__init__(message or f"no speed candidate within tolerance of peak at {peak_hz:.2f} Hz")


class MissingConditionStats(TraindiagError):
    """Normalization statistics missing for a (speed, channel) pair."""


# --- neural net ---

class ShapeError(TraindiagError):
    """Operand shapes are inconsistent for the requested operation."""


class InvalidTarget(TraindiagError):
    """Classification targets must be exactly 0 or 1."""


class DegenerateBatch(TraindiagError):
    """Batch statistics undefined (single value per channel in train mode)."""


class StaleCache(TraindiagError):
    """backward() called without a matching forward() pass."""


class BadCheckpoint(TraindiagError):
    """Checkpoint file is malformed or does not match its header."""


# --- training / evaluation ---

class InsufficientPositives(TraindiagError):
    """Training split has no positive sample for the requested fault."""


class TrainingDiverged(TraindiagError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class AblationIncomplete(TraindiagError):
    """A requested ablation cell has no trained model set."""


class EmptyEvaluation(TraindiagError):
    """No samples to evaluate."""


class InvalidK(TraindiagError):
    """Requested more principal components than feature dimensions."""


class ConfigError(TraindiagError):
    """Run configuration file contains unknown or invalid keys."""
