"""Public generator abstraction: sampling, synthesis, styles, probes.

A handle owns the torch modules and exposes numpy-facing operations. The
forward pass has no hidden randomness and is safe for concurrent readers;
weight-mutating fine-tuning clones the handle first (see the video module).
"""

from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import torch

from sg3edit.container import read_checkpoint, write_checkpoint
from sg3edit.generator.config import GeneratorConfig
from sg3edit.generator.network import SynthesisNetwork, _TORCH_DTYPES
from sg3edit.geometry import TransformParams, params_to_matrix
from sg3edit.latents import NUM_LAYERS, LatentW, LatentWPlus, LatentZ, StyleVector, pseudo_align

__all__ = ["GeneratorHandle", "pseudo_align"]


class GeneratorHandle:
    def __init__(self, config: GeneratorConfig):
        self.config = config
        self.network = SynthesisNetwork(config)
        self.network.eval()
        self._average_latent: LatentW | None = None

    # ------------------------------------------------------------------ #
    # latent sampling
    # ------------------------------------------------------------------ #

    @property
    def torch_dtype(self) -> torch.dtype:
        return _TORCH_DTYPES[self.config.dtype]

    def sample_z(self, n: int, seed: int) -> np.ndarray:
        gen = torch.Generator().manual_seed(seed)
        return torch.randn(n, self.config.latent_dim, generator=gen, dtype=self.torch_dtype).numpy()

    def map_z_to_w(self, z: LatentZ | np.ndarray) -> LatentW:
        vec = z.vector if isinstance(z, LatentZ) else np.asarray(z, dtype=np.float64)
        if vec.shape != (self.config.latent_dim,):
            raise ValueError(f"z must have shape ({self.config.latent_dim},), got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValueError("z contains non-finite entries")
        with torch.no_grad():
            w = self.network.mapping(torch.as_tensor(vec, dtype=self.torch_dtype)[None])[0]
        return LatentW(w.numpy())

    def map_z_batch(self, z: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.network.mapping(torch.as_tensor(z, dtype=self.torch_dtype)).numpy()

    def average_latent(self, n_samples: int | None = None, seed: int | None = None) -> LatentW:
        """Seeded Monte-Carlo estimate of the mean mapped latent; cached."""
        n = self.config.avg_samples if n_samples is None else n_samples
        s = self.config.avg_seed if seed is None else seed
        if n < 1:
            raise ValueError("n_samples must be >= 1")
        gen = torch.Generator().manual_seed(s)
        total = torch.zeros(self.config.latent_dim, dtype=torch.float64)
        remaining, chunk = n, 8192
        with torch.no_grad():
            while remaining:
                take = min(chunk, remaining)
                z = torch.randn(take, self.config.latent_dim, generator=gen, dtype=self.torch_dtype)
                total += self.network.mapping(z).double().sum(dim=0)
                remaining -= take
        avg = LatentW((total / n).numpy())
        self._average_latent = avg
        return avg

    @property
    def stored_average_latent(self) -> LatentW:
        if self._average_latent is None:
            self.average_latent()
        return self._average_latent

    @property
    def true_average_latent(self) -> LatentW:
        """Closed-form population mean of the affine mapping (exact)."""
        return LatentW(self.network.mapping.population_mean.numpy())

    # ------------------------------------------------------------------ #
    # synthesis
    # ------------------------------------------------------------------ #

    @staticmethod
    def _as_matrix(transform: TransformParams | np.ndarray | None) -> np.ndarray | None:
        if transform is None:
            return None
        if isinstance(transform, TransformParams):
            return params_to_matrix(transform)
        return np.asarray(transform, dtype=np.float64)

    def _codes_tensor(self, code: LatentWPlus) -> torch.Tensor:
        if code.dim != self.config.latent_dim:
            raise ValueError(f"code dim {code.dim} does not match config {self.config.latent_dim}")
        return torch.as_tensor(code.codes, dtype=self.torch_dtype)[None]

    def synthesize(
        self,
        code: LatentWPlus,
        transform: TransformParams | np.ndarray | None = None,
        resolution: int | None = None,
    ) -> np.ndarray:
        """Render one image (H, W, 3), float in roughly [-1, 1].

        ``resolution`` samples the continuous image on a different grid
        (reduced-size previews); default is the configured resolution.
        """
        with torch.no_grad():
            img = self.network(self._codes_tensor(code), self._as_matrix(transform), res=resolution)
        return img[0].permute(1, 2, 0).numpy()

    def compute_styles(self, code: LatentWPlus) -> StyleVector:
        with torch.no_grad():
            values = self.network.styles(self._codes_tensor(code))[0].numpy()
        return StyleVector(values, self.config.style_offsets)

    def synthesize_from_styles(
        self,
        styles: StyleVector,
        transform: TransformParams | np.ndarray | None = None,
        resolution: int | None = None,
    ) -> np.ndarray:
        if styles.dim != self.config.style_dim:
            raise ValueError(f"style dim {styles.dim} does not match config {self.config.style_dim}")
        tens = torch.as_tensor(styles.values, dtype=self.torch_dtype)[None]
        with torch.no_grad():
            img = self.network.forward_styles(tens, self._as_matrix(transform), res=resolution)
        return img[0].permute(1, 2, 0).numpy()

    def pseudo_align(self, code: LatentWPlus, w_bar: LatentW | None = None) -> LatentWPlus:
        return pseudo_align(code, w_bar if w_bar is not None else self.stored_average_latent)

    def read_transform_style(self, code: LatentWPlus) -> np.ndarray:
        """The learned first-layer transform channels (r_c, r_s, tx, ty)."""
        return self.compute_styles(code).layer_values(0)

    # ------------------------------------------------------------------ #
    # probes and sampling helpers
    # ------------------------------------------------------------------ #

    def sample_wplus_random(self, n: int, seed: int) -> list[LatentWPlus]:
        """Codes whose rows are independent mapped latents."""
        if n < 1:
            raise ValueError("n must be >= 1")
        z = self.sample_z(n * NUM_LAYERS, seed)
        w = self.map_z_batch(z).reshape(n, NUM_LAYERS, -1)
        return [LatentWPlus(rows) for rows in w]

    def layer_role_probe(
        self, mode: str, n: int, seed: int
    ) -> list[tuple[LatentWPlus, np.ndarray]]:
        """Image series isolating the geometric role of the first two rows.

        ``vary_w1``: rows fixed to a base latent while row 1 is resampled.
        ``fix_w0_w1``: rows 0 and 1 fixed while all later rows are jointly
        resampled per series element.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        z = self.sample_z(n + 2, seed)
        w = self.map_z_batch(z)
        base, w0, w1 = w[0], w[1], w[2]
        out = []
        for k in range(n):
            if mode == "vary_w1":
                w1_k = self.map_z_batch(self.sample_z(1, seed + 1000 + k))[0]
                code = LatentWPlus.from_w(LatentW(base)).with_row(1, w1_k)
            elif mode == "fix_w0_w1":
                w_star = self.map_z_batch(self.sample_z(1, seed + 1000 + k))[0]
                rows = np.tile(w_star, (NUM_LAYERS, 1))
                rows[0], rows[1] = w0, w1
                code = LatentWPlus(rows)
            else:
                raise ValueError(f"unknown probe mode {mode!r}")
            out.append((code, self.synthesize(code)))
        return out

    # ------------------------------------------------------------------ #
    # persistence and cloning
    # ------------------------------------------------------------------ #

    def clone(self) -> "GeneratorHandle":
        other = GeneratorHandle.__new__(GeneratorHandle)
        other.config = self.config
        other.network = copy.deepcopy(self.network)
        other._average_latent = self._average_latent
        return other

    def state_tensors(self) -> dict[str, np.ndarray]:
        state = {k: v.detach().numpy().copy() for k, v in self.network.state_dict().items()}
        if self._average_latent is not None:
            state["__average_latent__"] = self._average_latent.vector.copy()
        return state

    def save(self, path: str | Path) -> None:
        write_checkpoint(path, self.state_tensors(), {"kind": "generator", "config": self.config.to_manifest()})

    @classmethod
    def load(cls, path: str | Path) -> "GeneratorHandle":
        tensors, manifest = read_checkpoint(path)
        if manifest.get("kind") != "generator":
            raise ValueError(f"{path} is not a generator checkpoint")
        handle = cls(GeneratorConfig.from_manifest(manifest["config"]))
        avg = tensors.pop("__average_latent__", None)
        state = {k: torch.as_tensor(v) for k, v in tensors.items()}
        handle.network.load_state_dict(state)
        if avg is not None:
            handle._average_latent = LatentW(avg)
        return handle
