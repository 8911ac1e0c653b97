"""Pivotal tuning: per-video generator fine-tuning around fixed codes.

The frame codes act as pivots; generator weights are optimized so that
renders under each frame's recovered transform match the *unaligned* source
frames. The Fourier-input layer stays frozen by default (its parameters are
bit-identical afterwards), as does the mapping network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from sg3edit.errors import TrainingDiverged
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.inversion.losses import l2_loss


@dataclass
class PTIConfig:
    steps: int = 8000
    batch: int = 2
    lambda_l2: float = 1.0
    lambda_lpips: float = 1.0
    freeze_fourier_input: bool = True
    freeze_mapping: bool = True
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


def fourier_input_state(handle: GeneratorHandle) -> dict[str, np.ndarray]:
    return {
        k: v.detach().numpy().copy()
        for k, v in handle.network.input.state_dict().items()
    }


def pti_finetune(
    handle: GeneratorHandle,
    codes: np.ndarray,
    targets: np.ndarray,
    matrices: np.ndarray,
    cfg: PTIConfig,
    perceptual_client=None,
) -> tuple[GeneratorHandle, list[dict]]:
    """Fine-tune a cloned generator against per-frame targets.

    codes: (N, 16, D) pivots; targets: (N, H, W, 3) unaligned frames;
    matrices: (N, 3, 3) per-frame user transforms. Returns the tuned handle
    and a per-step loss log. steps=0 returns a bit-identical clone.
    """
    n = codes.shape[0]
    if targets.shape[0] != n or matrices.shape[0] != n:
        raise ValueError("codes, targets, and matrices must agree on frame count")
    tuned = handle.clone()
    net = tuned.network
    dtype = tuned.torch_dtype

    frozen_modules = [net.input] if cfg.freeze_fourier_input else []
    if cfg.freeze_mapping:
        frozen_modules.append(net.mapping)
    frozen_params = {id(p) for m in frozen_modules for p in m.parameters()}
    trainable = [p for p in net.parameters() if id(p) not in frozen_params]
    for p in net.parameters():
        p.requires_grad_(id(p) not in frozen_params)

    if cfg.steps == 0:
        return tuned, []

    code_t = torch.as_tensor(codes, dtype=dtype)
    target_t = torch.as_tensor(targets, dtype=dtype).permute(0, 3, 1, 2)
    matrix_t = torch.as_tensor(matrices, dtype=dtype)
    optimizer = torch.optim.Adam(trainable, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    log: list[dict] = []

    net.train()
    for step in range(cfg.steps):
        sel = rng.integers(0, n, size=min(cfg.batch, n))
        sel_t = torch.as_tensor(sel, dtype=torch.long)
        optimizer.zero_grad(set_to_none=True)
        recon = net(code_t[sel_t], matrix_t[sel_t])
        l2 = l2_loss(target_t[sel_t], recon)
        loss = cfg.lambda_l2 * l2
        lpips_val = 0.0
        if cfg.lambda_lpips > 0 and perceptual_client is not None:
            lp = perceptual_client(target_t[sel_t], recon)
            loss = loss + cfg.lambda_lpips * lp
            lpips_val = float(lp.detach())
        total = float(loss.detach())
        if not np.isfinite(total):
            raise TrainingDiverged(step)
        loss.backward()
        optimizer.step()
        log.append({"step": step, "l2": float(l2.detach()), "lpips": lpips_val, "total": total})
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return tuned, log


def eval_loss(
    handle: GeneratorHandle,
    codes: np.ndarray,
    targets: np.ndarray,
    matrices: np.ndarray,
) -> float:
    """Mean L2 over all frames under their recovered transforms."""
    dtype = handle.torch_dtype
    with torch.no_grad():
        recon = handle.network(
            torch.as_tensor(codes, dtype=dtype), torch.as_tensor(matrices, dtype=dtype)
        )
        target_t = torch.as_tensor(targets, dtype=dtype).permute(0, 3, 1, 2)
        return float(l2_loss(target_t, recon))
