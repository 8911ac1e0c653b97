"""Iterative inversion and unaligned-image inversion via alignment.

The encoder is trained on canonical-pose imagery only. Unaligned inputs are
aligned first, encoded, and re-posed through the generator's explicit
transform, so the predicted code never has to carry pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import Box, LandmarkSet, TransformParams, align_crop
from sg3edit.inversion.encoder import EncoderHandle
from sg3edit.inversion.losses import l2_loss
from sg3edit.latents import LatentWPlus


@dataclass
class InversionResult:
    code: LatentWPlus
    params: TransformParams
    per_iter_losses: list[float] = field(default_factory=list)


def _to_tensor(image: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {arr.shape}")
    return torch.as_tensor(arr, dtype=dtype).permute(2, 0, 1)[None]


def initial_state(handle: GeneratorHandle) -> tuple[torch.Tensor, torch.Tensor]:
    """Average-latent starting point: lifted code and its rendering."""
    w_bar = handle.stored_average_latent
    codes = torch.as_tensor(
        LatentWPlus.from_w(w_bar).codes, dtype=handle.torch_dtype
    )[None]
    with torch.no_grad():
        recon = handle.network(codes)
    return codes, recon


def restyle_invert(
    enc: EncoderHandle,
    handle: GeneratorHandle,
    x_aligned: np.ndarray,
    n_iters: int = 3,
    params: TransformParams = TransformParams(),
) -> InversionResult:
    """Refine the code prediction over n_iters forward passes.

    Each pass sees (target, current reconstruction) and predicts a code
    residual; losses are recorded per iteration against the target.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    if x_aligned.shape[0] != enc.config.resolution:
        raise ValueError(
            f"encoder expects {enc.config.resolution}px input, got {x_aligned.shape[0]}"
        )
    target = _to_tensor(x_aligned, enc.torch_dtype)
    codes, recon = initial_state(handle)
    losses: list[float] = []
    with torch.no_grad():
        for _ in range(n_iters):
            delta = enc.network(target, recon.to(enc.torch_dtype))
            codes = codes + delta.to(codes.dtype)
            recon = handle.network(codes)
            losses.append(float(l2_loss(target, recon.to(enc.torch_dtype))))
    return InversionResult(code=LatentWPlus(codes[0].numpy()), params=params, per_iter_losses=losses)


def encode(enc: EncoderHandle, handle: GeneratorHandle, x_aligned: np.ndarray) -> LatentWPlus:
    """Single-pass encoding: one refinement from the average-latent state."""
    return restyle_invert(enc, handle, x_aligned, n_iters=1).code


def invert_unaligned(
    enc: EncoderHandle,
    handle: GeneratorHandle,
    x_unaligned: np.ndarray,
    detector_client,
    canonical: LandmarkSet,
    crop: Box | None = None,
    n_iters: int = 3,
    frame_index: int | None = None,
) -> InversionResult:
    """Align, encode, and return the code with the recovered pose params.

    ``synthesize(result.code, result.params)`` re-targets the unaligned
    input even though the encoder only ever saw the aligned crop.
    """
    h, w = x_unaligned.shape[:2]
    box = crop or Box(0, 0, w, h)
    landmarks = detector_client.detect(x_unaligned, frame_index)
    aligned, params = align_crop(
        x_unaligned, landmarks, box, canonical, output_size=enc.config.resolution
    )
    return restyle_invert(enc, handle, aligned, n_iters=n_iters, params=params)
