"""Refinement encoders: image (+ current reconstruction) to 16 latent rows.

Two head variants mirror the established encoder families: ``psp_like``
predicts all rows directly; ``e4e_like`` predicts a base row plus 15
offsets whose final layers start at zero, so all rows equal the base row at
initialization. Both consume a 6-channel input (target stacked with the
current reconstruction) and emit residual codes for iterative refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from sg3edit.container import read_checkpoint, write_checkpoint
from sg3edit.latents import NUM_LAYERS

VARIANTS = ("psp_like", "e4e_like")


@dataclass(frozen=True)
class EncoderConfig:
    resolution: int = 64
    latent_dim: int = 16
    variant: str = "psp_like"
    base_channels: int = 16
    dtype: str = "float64"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


class RefinementEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        dtype = torch.float64 if cfg.dtype == "float64" else torch.float32
        torch.manual_seed(seed)
        c = cfg.base_channels
        self.backbone = nn.Sequential(
            nn.Conv2d(6, c, 3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.AdaptiveAvgPool2d((4, 4)),
        )
        flat = 4 * c * 16
        d = cfg.latent_dim
        if cfg.variant == "psp_like":
            self.head = nn.Linear(flat, NUM_LAYERS * d)
        else:
            self.base_head = nn.Linear(flat, d)
            self.offset_head = nn.Linear(flat, (NUM_LAYERS - 1) * d)
            nn.init.zeros_(self.offset_head.weight)
            nn.init.zeros_(self.offset_head.bias)
        self.to(dtype)

    def predict(self, target: torch.Tensor, current: torch.Tensor):
        """Residual codes (B, 16, D) plus the e4e offsets (or None)."""
        x = torch.cat([target, current], dim=1)
        feats = self.backbone(x).flatten(1)
        d = self.cfg.latent_dim
        if self.cfg.variant == "psp_like":
            return self.head(feats).view(-1, NUM_LAYERS, d), None
        base = self.base_head(feats)
        offsets = self.offset_head(feats).view(-1, NUM_LAYERS - 1, d)
        codes = torch.cat([base[:, None, :], base[:, None, :] + offsets], dim=1)
        return codes, offsets

    def forward(self, target: torch.Tensor, current: torch.Tensor) -> torch.Tensor:
        return self.predict(target, current)[0]


@dataclass
class EncoderHandle:
    """Encoder network plus its static configuration."""

    config: EncoderConfig
    network: RefinementEncoder

    @classmethod
    def create(cls, config: EncoderConfig, seed: int = 0) -> "EncoderHandle":
        return cls(config=config, network=RefinementEncoder(config, seed=seed))

    @property
    def variant(self) -> str:
        return self.config.variant

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.config.dtype == "float64" else torch.float32

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {k: v.detach().numpy().copy() for k, v in self.network.state_dict().items()}

    def save(self, path: str | Path) -> None:
        write_checkpoint(
            path, self.state_tensors(), {"kind": "encoder", "config": asdict(self.config)}
        )

    @classmethod
    def load(cls, path: str | Path) -> "EncoderHandle":
        tensors, manifest = read_checkpoint(path)
        if manifest.get("kind") != "encoder":
            raise ValueError(f"{path} is not an encoder checkpoint")
        cfg = EncoderConfig(**manifest["config"])
        handle = cls.create(cfg)
        handle.network.load_state_dict({k: torch.as_tensor(v) for k, v in tensors.items()})
        return handle
