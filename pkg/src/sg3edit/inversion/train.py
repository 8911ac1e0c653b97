"""Aligned-only encoder training with gradient accumulation.

The dataset is asserted to be canonical-pose: the encoder never observes an
unaligned image during training; pose is recovered at inference through the
generator's transform input. Optimization steps are seed-deterministic, and
micro-batches are consecutive slices of each step's index draw, so
(batch=2, accumulation=4) consumes exactly the samples of (batch=8,
accumulation=1) and matches its parameter update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from sg3edit.errors import TrainingDiverged
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import TransformParams
from sg3edit.inversion.encoder import EncoderHandle
from sg3edit.inversion.invert import initial_state
from sg3edit.inversion.losses import TrainConfig, reconstruction_loss


@dataclass
class AlignedImageDataset:
    """Canonical-pose image set; construction enforces canonicality."""

    images: np.ndarray
    params: list[TransformParams]

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim != 4 or self.images.shape[3] != 3:
            raise ValueError("images must be (N, H, W, 3)")
        if len(self.params) != self.images.shape[0]:
            raise ValueError("params length must match image count")
        offenders = [i for i, p in enumerate(self.params) if not p.is_identity]
        if offenders:
            raise ValueError(
                f"training images must be canonical-pose; frames {offenders[:5]} are not"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    @classmethod
    def from_renders(cls, images: np.ndarray) -> "AlignedImageDataset":
        return cls(images, [TransformParams()] * len(images))


def _batch_tensor(images: np.ndarray, idx: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    return torch.as_tensor(images[idx], dtype=dtype).permute(0, 3, 1, 2)


def train_encoder(
    enc: EncoderHandle,
    handle: GeneratorHandle,
    dataset: AlignedImageDataset,
    cfg: TrainConfig,
    perceptual_client=None,
    identity_client=None,
    out_dir: str | Path | None = None,
    log_name: str = "train_log.jsonl",
) -> tuple[EncoderHandle, list[dict]]:
    """Minimize the weighted reconstruction objective over the dataset.

    Per optimizer step the loss is averaged over ``accumulation``
    micro-batches of ``batch`` images and over the refinement iterations
    (codes detach between iterations). Checkpoints are written every
    ``checkpoint_every`` steps; a non-finite loss aborts with a checkpoint.
    """
    if cfg.deterministic:
        torch.manual_seed(cfg.seed)
        torch.use_deterministic_algorithms(True, warn_only=True)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    net = enc.network
    net.train()
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    gen_dtype = handle.torch_dtype
    init_codes, init_recon = initial_state(handle)
    log: list[dict] = []

    def checkpoint(tag: str) -> Path | None:
        if out_path is None:
            return None
        path = out_path / f"encoder_{tag}.sg3t"
        enc.save(path)
        return path

    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.effective_batch)
        optimizer.zero_grad(set_to_none=True)
        step_components = {"l2": 0.0, "lpips": 0.0, "id": 0.0, "total": 0.0}
        row_norm_sum, penalty_sum = 0.0, 0.0
        for micro in range(cfg.accumulation):
            sel = idx[micro * cfg.batch : (micro + 1) * cfg.batch]
            target = _batch_tensor(dataset.images, sel, enc.torch_dtype)
            codes = init_codes.expand(len(sel), -1, -1)
            recon = init_recon.expand(len(sel), -1, -1, -1)
            micro_loss = torch.zeros((), dtype=enc.torch_dtype)
            for _ in range(cfg.restyle_iters):
                delta, offsets = net.predict(target, recon.detach().to(enc.torch_dtype))
                codes = codes.detach() + delta.to(gen_dtype)
                recon = handle.network(codes)
                loss, components = reconstruction_loss(
                    target,
                    recon.to(enc.torch_dtype),
                    cfg,
                    perceptual_client,
                    identity_client,
                )
                if offsets is not None and cfg.offset_penalty > 0:
                    penalty = cfg.offset_penalty * offsets.square().mean()
                    loss = loss + penalty
                    penalty_sum += float(penalty.detach())
                micro_loss = micro_loss + loss / cfg.restyle_iters
                for key in ("l2", "lpips", "id", "total"):
                    step_components[key] += components[key] / (
                        cfg.restyle_iters * cfg.accumulation
                    )
            row_norm_sum += float(codes.detach().norm(dim=2).mean())
            (micro_loss / cfg.accumulation).backward()
        if not np.isfinite(step_components["total"]):
            path = checkpoint(f"diverged_step{step:06d}")
            raise TrainingDiverged(step, path)
        if cfg.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip)
        optimizer.step()
        entry = {
            "step": step,
            **{k: round(v, 8) for k, v in step_components.items()},
            "row_norm_mean": round(row_norm_sum / cfg.accumulation, 6),
        }
        if penalty_sum:
            entry["offset_penalty"] = round(penalty_sum / cfg.accumulation, 10)
        log.append(entry)
        if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
            checkpoint(f"step{step + 1:06d}")

    net.eval()
    checkpoint("final")
    if out_path is not None:
        with open(out_path / log_name, "w", encoding="utf-8") as fh:
            for entry in log:
                fh.write(json.dumps(entry) + "\n")
    return enc, log


def evaluate_l2(
    enc: EncoderHandle,
    handle: GeneratorHandle,
    images: np.ndarray,
    n_iters: int = 1,
) -> float:
    """Mean final-iteration reconstruction L2 over an evaluation set."""
    from sg3edit.inversion.invert import restyle_invert

    losses = [
        restyle_invert(enc, handle, img, n_iters=n_iters).per_iter_losses[-1] for img in images
    ]
    return float(np.mean(losses))
