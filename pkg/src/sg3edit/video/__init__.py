from sg3edit.video.pipeline import (
    DEFAULT_CANONICAL,
    PreprocessConfig,
    encode_frames,
    expand,
    preprocess,
    pti,
    pti_eval_loss,
    render,
    set_edit_spec,
    smooth,
)
from sg3edit.video.pti import PTIConfig, eval_loss, fourier_input_state, pti_finetune
from sg3edit.video.session import STAGES, FrameRecord, VideoSession
from sg3edit.video.smoothing import (
    SMOOTHING_WEIGHTS,
    smooth_codes,
    smooth_matrices,
    smooth_sequence,
)

__all__ = [
    "DEFAULT_CANONICAL",
    "FrameRecord",
    "PTIConfig",
    "PreprocessConfig",
    "SMOOTHING_WEIGHTS",
    "STAGES",
    "VideoSession",
    "encode_frames",
    "eval_loss",
    "expand",
    "fourier_input_state",
    "preprocess",
    "pti",
    "pti_eval_loss",
    "pti_finetune",
    "render",
    "set_edit_spec",
    "smooth",
    "smooth_codes",
    "smooth_matrices",
    "smooth_sequence",
]
