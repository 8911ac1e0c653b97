"""Reconstruction losses with pluggable perceptual/identity metrics.

The perceptual and identity terms are external pretrained embedders in
production; here they are protocol callables so desk-scale runs can plug in
deterministic stand-ins and stay hermetic. Both must be differentiable
torch modules when used inside training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import torch
from torch import nn

from sg3edit.errors import MissingMetricClient


class PerceptualMetric(Protocol):
    def __call__(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor: ...


class IdentityMetric(Protocol):
    def similarity(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor: ...


@dataclass
class TrainConfig:
    """Loss weights and optimization schedule for encoder training."""

    lambda_l2: float = 1.0
    lambda_lpips: float = 0.8
    lambda_id: float = 0.1
    batch: int = 2
    accumulation: int = 4
    steps: int = 1000
    restyle_iters: int = 1
    seed: int = 0
    lr: float = 1e-4
    offset_penalty: float = 2e-5
    grad_clip: float | None = None
    checkpoint_every: int = 500
    deterministic: bool = False

    def __post_init__(self):
        if min(self.lambda_l2, self.lambda_lpips, self.lambda_id) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.batch < 1 or self.accumulation < 1:
            raise ValueError("batch and accumulation must be >= 1")

    @property
    def effective_batch(self) -> int:
        return self.batch * self.accumulation


def l2_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return (x - y).square().mean()


def l2_gradient(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Closed-form gradient of l2_loss with respect to y."""
    return 2.0 * (y - x) / x.numel()


def reconstruction_loss(
    x: torch.Tensor,
    y: torch.Tensor,
    cfg: TrainConfig,
    perceptual_client: PerceptualMetric | None = None,
    identity_client: IdentityMetric | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted L2 + perceptual + (1 - identity similarity) between x and y."""
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {tuple(x.shape)} vs {tuple(y.shape)}")
    total = torch.zeros((), dtype=y.dtype)
    components: dict[str, float] = {}

    l2 = l2_loss(x, y)
    total = total + cfg.lambda_l2 * l2
    components["l2"] = float(l2.detach())

    if cfg.lambda_lpips > 0:
        if perceptual_client is None:
            raise MissingMetricClient("lambda_lpips > 0 but no perceptual client")
        lp = perceptual_client(x, y)
        total = total + cfg.lambda_lpips * lp
        components["lpips"] = float(lp.detach())
    else:
        components["lpips"] = 0.0

    if cfg.lambda_id > 0:
        if identity_client is None:
            raise MissingMetricClient("lambda_id > 0 but no identity client")
        sim = identity_client.similarity(x, y)
        id_term = 1.0 - sim
        total = total + cfg.lambda_id * id_term
        components["id"] = float(id_term.detach())
    else:
        components["id"] = 0.0

    components["total"] = float(total.detach())
    return total, components


class FixedConvPerceptual(nn.Module):
    """Deterministic random-feature perceptual distance (LPIPS stand-in).

    Frozen random convolutions at two scales; the distance is the mean
    squared feature difference. Differentiable, seeded, and hermetic.
    """

    def __init__(self, channels: int = 12, seed: int = 0, dtype: torch.dtype = torch.float64):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        k1 = torch.randn(channels, 3, 3, 3, generator=gen, dtype=dtype) / math.sqrt(27)
        k2 = torch.randn(channels, channels, 3, 3, generator=gen, dtype=dtype) / math.sqrt(
            9 * channels
        )
        self.register_buffer("k1", k1)
        self.register_buffer("k2", k2)

    def features(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        f1 = torch.tanh(nn.functional.conv2d(x, self.k1.to(x.dtype), padding=1))
        f2 = torch.tanh(nn.functional.conv2d(nn.functional.avg_pool2d(f1, 2), self.k2.to(x.dtype), padding=1))
        return f1, f2

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        if x.ndim == 3:
            x, y = x[None], y[None]
        fx1, fx2 = self.features(x)
        fy1, fy2 = self.features(y)
        return (fx1 - fy1).square().mean() + (fx2 - fy2).square().mean()


class FixedConvIdentity(nn.Module):
    """Deterministic embedding-cosine identity metric stand-in."""

    def __init__(self, dim: int = 32, seed: int = 1, dtype: torch.dtype = torch.float64):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.register_buffer(
            "kernel", torch.randn(dim, 3, 5, 5, generator=gen, dtype=dtype) / math.sqrt(75)
        )

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim == 3:
            x = x[None]
        f = nn.functional.conv2d(x, self.kernel.to(x.dtype), stride=3)
        v = torch.tanh(f).mean(dim=(2, 3))
        return v / (v.norm(dim=1, keepdim=True) + 1e-12)

    def similarity(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        return (self.embed(x) * self.embed(y)).sum(dim=1).mean()
