"""Torch synthesis network with exact translation equivariance.

The synthesis input is a bank of sinusoidal features with *integer* canvas
frequencies, so the continuous image is periodic on the unit torus and
band-limited well below Nyquist. Every later operation is per-pixel (styled
1x1 mixing), which preserves that structure exactly. Coordinates are kept
dyadic through the user-transform stage and wrapped before the learned
shift, which makes integer-pixel translation equivariance hold bit-for-bit
and fractional/rotated cases verifiable against Fourier resampling.

The learned first-layer transform is translation-only (its rotation
channels are pinned to the identity); an arbitrary learned rotation would
destroy canvas periodicity and with it the exact oracle property.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from sg3edit.generator.config import GeneratorConfig
from sg3edit.latents import NUM_LAYERS

_TORCH_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def _sample_integer_freqs(gen: torch.Generator, count: int, radius: int) -> torch.Tensor:
    """Nonzero integer lattice frequencies with max-norm <= radius."""
    lattice = [
        (fx, fy)
        for fx in range(-radius, radius + 1)
        for fy in range(-radius, radius + 1)
        if (fx, fy) != (0, 0)
    ]
    idx = torch.randint(len(lattice), (count,), generator=gen)
    return torch.tensor([lattice[i] for i in idx.tolist()], dtype=torch.float64)


class MappingNetwork(nn.Module):
    """Affine map from normalized z to w; the population mean is the bias."""

    def __init__(self, cfg: GeneratorConfig, gen: torch.Generator, dtype: torch.dtype):
        super().__init__()
        d = cfg.latent_dim
        weight = torch.randn(d, d, generator=gen, dtype=dtype) / math.sqrt(d)
        offset = cfg.mapping_offset_gain * torch.randn(d, generator=gen, dtype=dtype)
        self.weight = nn.Parameter(weight)
        self.offset = nn.Parameter(offset)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z_hat = z * torch.rsqrt(z.square().mean(dim=-1, keepdim=True) + 1e-8)
        return z_hat @ self.weight.T + self.offset

    @property
    def population_mean(self) -> torch.Tensor:
        # z_hat is symmetric about zero, so E[w] equals the bias exactly.
        return self.offset.detach()


class FourierInput(nn.Module):
    """Sinusoidal features under learned shift and user rigid transform."""

    def __init__(self, cfg: GeneratorConfig, gen: torch.Generator, dtype: torch.dtype):
        super().__init__()
        k, d = cfg.num_features, cfg.latent_dim
        freqs = _sample_integer_freqs(gen, k, cfg.freq_radius).to(dtype)
        # Dyadic phases keep integer-shift arguments exactly representable.
        phases = torch.randint(0, 512, (k,), generator=gen).to(dtype) / 512.0
        self.register_buffer("freqs", freqs)
        self.register_buffer("phases", phases)
        self.mix = nn.Parameter(
            torch.randn(cfg.layer_channels[0], k, generator=gen, dtype=dtype) / math.sqrt(k)
        )
        # Transform affine: rows for (r_c, r_s) stay zero with bias (1, 0) so
        # the learned transform is a pure shift; see the module docstring.
        weight = torch.zeros(4, d, dtype=dtype)
        if cfg.alignment == "unaligned":
            weight[2:] = (
                cfg.learned_translation_gain
                * torch.randn(2, d, generator=gen, dtype=dtype)
                / math.sqrt(d)
            )
        bias = torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=dtype)
        self.affine_weight = nn.Parameter(weight)
        self.affine_bias = nn.Parameter(bias)
        self.register_buffer("reference_w", torch.zeros(d, dtype=dtype))

    def transform_styles(self, w0: torch.Tensor) -> torch.Tensor:
        """The 4 style channels of layer 0: (r_c, r_s, tx, ty)."""
        return (w0 - self.reference_w) @ self.affine_weight.T + self.affine_bias

    def forward(self, transform_style: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
        """Features for user-inverse-transformed coords (B or 1, H, W, 2)."""
        rc, rs = transform_style[:, 0], transform_style[:, 1]
        # Degenerate edits may zero both rotation channels; clamping keeps
        # the canonical (1, 0) case bit-exact and avoids NaN elsewhere.
        norm = torch.sqrt(rc * rc + rs * rs).clamp_min(1e-12)
        rc, rs = rc / norm, rs / norm
        shift = transform_style[:, 2:4]
        # Wrap to the unit cell first: dyadic inputs wrap exactly, which is
        # what makes integer-pixel rolls reproduce bit-identical phases.
        v = coords - torch.floor(coords)
        if coords.shape[0] == 1 and transform_style.shape[0] > 1:
            v = v.expand(transform_style.shape[0], -1, -1, -1)
        c = v - shift[:, None, None, :]
        rotation_free = bool(torch.all(rc == 1.0) and torch.all(rs == 0.0))
        if not rotation_free:
            cx = c[..., 0] - 0.5
            cy = c[..., 1] - 0.5
            qx = rc[:, None, None] * cx - rs[:, None, None] * cy + 0.5
            qy = rs[:, None, None] * cx + rc[:, None, None] * cy + 0.5
            c = torch.stack([qx, qy], dim=-1)
        u = c @ self.freqs.T + self.phases
        u = u - torch.floor(u)
        feats = torch.sin((2.0 * math.pi) * u)
        return feats @ self.mix.T


class StyledMixing(nn.Module):
    """Per-pixel channel mixing modulated by an affine style of the input."""

    def __init__(
        self,
        cfg: GeneratorConfig,
        in_channels: int,
        out_channels: int,
        gen: torch.Generator,
        dtype: torch.dtype,
    ):
        super().__init__()
        d = cfg.latent_dim
        self.affine_weight = nn.Parameter(
            cfg.style_gain * torch.randn(in_channels, d, generator=gen, dtype=dtype) / math.sqrt(d)
        )
        self.affine_bias = nn.Parameter(torch.ones(in_channels, dtype=dtype))
        square = torch.randn(
            max(in_channels, out_channels), max(in_channels, out_channels),
            generator=gen, dtype=dtype,
        )
        q, _ = torch.linalg.qr(square)
        self.weight = nn.Parameter(q[:out_channels, :in_channels].contiguous())
        self.bias = nn.Parameter(cfg.bias_gain * torch.randn(out_channels, generator=gen, dtype=dtype))

    def styles(self, w: torch.Tensor) -> torch.Tensor:
        return w @ self.affine_weight.T + self.affine_bias

    def forward(self, h: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        return (h * style[:, None, None, :]) @ self.weight.T + self.bias


class SynthesisNetwork(nn.Module):
    """16-layer synthesis: Fourier input (w0) plus 15 styled mixing layers."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        dtype = _TORCH_DTYPES[cfg.dtype]
        gen = torch.Generator().manual_seed(cfg.init_seed)
        self.mapping = MappingNetwork(cfg, gen, dtype)
        self.input = FourierInput(cfg, gen, dtype)
        self.input.reference_w.copy_(self.mapping.population_mean)
        layers = []
        channels = cfg.layer_channels
        for k in range(1, NUM_LAYERS):
            layers.append(StyledMixing(cfg, channels[k - 1], channels[k], gen, dtype))
        self.layers = nn.ModuleList(layers)
        self.register_buffer("output_gain", torch.ones((), dtype=dtype))
        self._calibrate(gen)

    def _calibrate(self, gen: torch.Generator) -> None:
        # Fix the output scale so typical renders sit around unit range. A
        # coarse grid suffices: the image statistics are resolution-free.
        dtype = self.output_gain.dtype
        z = torch.randn(8, self.cfg.latent_dim, generator=gen, dtype=dtype)
        with torch.no_grad():
            w = self.mapping(z)
            ws = w[:, None, :].expand(-1, NUM_LAYERS, -1)
            img = self.forward_styles(self.styles(ws), coords=self.base_coords(res=16))
            rms = img.square().mean().sqrt()
        self.output_gain.fill_(0.35 / float(rms))

    @property
    def torch_dtype(self) -> torch.dtype:
        return self.output_gain.dtype

    def base_coords(self, res: int | None = None) -> torch.Tensor:
        """Pixel-center canvas coordinates, (1, H, W, 2), dyadic for pow2 sizes."""
        res = res or self.cfg.resolution
        dtype = self.torch_dtype
        axis = (torch.arange(res, dtype=dtype) + 0.5) / res
        gy, gx = torch.meshgrid(axis, axis, indexing="ij")
        return torch.stack([gx, gy], dim=-1)[None]

    def user_inverse_coords(
        self, matrices: np.ndarray | torch.Tensor | None, res: int | None = None
    ) -> torch.Tensor:
        """Apply the inverse user transform to the pixel grid.

        The affine is evaluated as m00*x + m01*y + m02 even in the identity
        case: multiplying by exact 1.0/0.0 keeps dyadic coordinates intact,
        so pure translations stay exact without a separate code path.
        """
        coords = self.base_coords(res)
        if matrices is None:
            return coords
        m = torch.as_tensor(np.asarray(matrices), dtype=self.torch_dtype)
        if m.ndim == 2:
            m = m[None]
        inv = self._invert_rigid(m)
        x, y = coords[..., 0], coords[..., 1]
        vx = inv[:, 0, 0, None, None] * x + inv[:, 0, 1, None, None] * y + inv[:, 0, 2, None, None]
        vy = inv[:, 1, 0, None, None] * x + inv[:, 1, 1, None, None] * y + inv[:, 1, 2, None, None]
        return torch.stack([vx, vy], dim=-1)

    @staticmethod
    def _invert_rigid(m: torch.Tensor) -> torch.Tensor:
        # The transpose-as-inverse shortcut is only valid for rigid input.
        rot = m[:, :2, :2]
        gram = rot @ rot.transpose(1, 2)
        eye = torch.eye(2, dtype=m.dtype).expand_as(gram)
        if not torch.allclose(gram, eye, atol=1e-6) or not torch.allclose(
            m[:, 2], torch.tensor([0.0, 0.0, 1.0], dtype=m.dtype).expand_as(m[:, 2]), atol=1e-6
        ):
            raise ValueError("user transform must be a rigid homogeneous matrix")
        rot_t = rot.transpose(1, 2)
        inv = torch.zeros_like(m)
        inv[:, :2, :2] = rot_t
        inv[:, :2, 2] = -(rot_t @ m[:, :2, 2:]).squeeze(-1)
        inv[:, 2, 2] = 1.0
        return inv

    def styles(self, ws: torch.Tensor) -> torch.Tensor:
        """(B, 16, D) codes -> (B, S) concatenated affine outputs."""
        parts = [self.input.transform_styles(ws[:, 0])]
        parts += [layer.styles(ws[:, k + 1]) for k, layer in enumerate(self.layers)]
        return torch.cat(parts, dim=1)

    def forward_styles(
        self,
        styles: torch.Tensor,
        matrices: np.ndarray | torch.Tensor | None = None,
        coords: torch.Tensor | None = None,
        res: int | None = None,
    ) -> torch.Tensor:
        if styles.shape[1] != self.cfg.style_dim:
            raise ValueError(f"expected style dim {self.cfg.style_dim}, got {styles.shape[1]}")
        offsets = self.cfg.style_offsets
        if coords is None:
            coords = self.user_inverse_coords(matrices, res)
        h = self.input(styles[:, 0:4], coords)
        for k, layer in enumerate(self.layers):
            h = layer(h, styles[:, offsets[k + 1] : offsets[k + 2]])
        return (h * self.output_gain).permute(0, 3, 1, 2)

    def forward(
        self,
        ws: torch.Tensor,
        matrices: np.ndarray | torch.Tensor | None = None,
        res: int | None = None,
    ) -> torch.Tensor:
        """(B, 16, D) codes (+ optional user matrices) -> (B, 3, H, W)."""
        return self.forward_styles(self.styles(ws), matrices, res=res)
