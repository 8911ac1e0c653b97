"""Exception types shared across the stack."""


class Sg3EditError(Exception):
    """Base class for all library errors."""


class DegenerateLandmarks(Sg3EditError):
    """Eye separation below the resolvable threshold."""


class NoFaceDetected(Sg3EditError):
    def __init__(self, message: str = "no face detected", frame_index: int | None = None):
        super().__init__(message if frame_index is None else f"{message} (frame {frame_index})")
        self.frame_index = frame_index


class SpaceMismatch(Sg3EditError):
    """Latent-space tag of a direction or code does not match the operation."""


class DegenerateLabels(Sg3EditError):
    """Attribute scores cannot be split into two nonempty classes."""


class DegenerateDirection(Sg3EditError):
    """Relevance filtering left no channels in an edit direction."""


class MissingMetricClient(Sg3EditError):
    """A loss term has nonzero weight but no metric client was supplied."""


class TrainingDiverged(Sg3EditError):
    def __init__(self, step: int, checkpoint_path=None):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
        self.checkpoint_path = checkpoint_path


class InsufficientSamples(Sg3EditError):
    """Too few samples for the requested statistical procedure."""


class StageOrderError(Sg3EditError):
    """A pipeline stage was invoked before its prerequisites completed."""


class ContainerFormatError(Sg3EditError):
    """Malformed tensor-container file."""


class SessionLockError(Sg3EditError):
    """A writer stage is already running on this session."""


class EyeDistanceDrift(UserWarning):
    """Eye distance deviates from the canonical scale by more than the tolerance."""
