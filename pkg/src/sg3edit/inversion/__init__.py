from sg3edit.inversion.encoder import EncoderConfig, EncoderHandle, RefinementEncoder
from sg3edit.inversion.invert import (
    InversionResult,
    encode,
    invert_unaligned,
    restyle_invert,
)
from sg3edit.inversion.losses import (
    FixedConvIdentity,
    FixedConvPerceptual,
    TrainConfig,
    l2_gradient,
    l2_loss,
    reconstruction_loss,
)
from sg3edit.inversion.train import AlignedImageDataset, evaluate_l2, train_encoder

__all__ = [
    "AlignedImageDataset",
    "EncoderConfig",
    "EncoderHandle",
    "FixedConvIdentity",
    "FixedConvPerceptual",
    "InversionResult",
    "RefinementEncoder",
    "TrainConfig",
    "encode",
    "evaluate_l2",
    "invert_unaligned",
    "l2_gradient",
    "l2_loss",
    "reconstruction_loss",
    "restyle_invert",
    "train_encoder",
]
