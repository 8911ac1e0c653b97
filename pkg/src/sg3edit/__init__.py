"""Transform-aware GAN editing stack.

Synthesis with explicit rotation/translation control, latent-space
disentanglement analysis, aligned-only inversion of unaligned images, and a
temporally consistent video inversion/editing pipeline with field-of-view
expansion. A miniature exactly-equivariant generator doubles as the numeric
oracle for the whole stack.
"""

from sg3edit.errors import (
    DegenerateDirection,
    DegenerateLabels,
    DegenerateLandmarks,
    InsufficientSamples,
    MissingMetricClient,
    NoFaceDetected,
    SpaceMismatch,
    StageOrderError,
    TrainingDiverged,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateDirection",
    "DegenerateLabels",
    "DegenerateLandmarks",
    "InsufficientSamples",
    "MissingMetricClient",
    "NoFaceDetected",
    "SpaceMismatch",
    "StageOrderError",
    "TrainingDiverged",
]
