"""Generator configuration and the reference channel schedule."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from sg3edit.latents import NUM_LAYERS

DEFAULT_AVG_SAMPLES = 100_000
DEFAULT_AVG_SEED = 711


def channel_schedule(
    resolution: int,
    channel_base: int = 65536,
    channel_max: int = 1024,
    num_layers: int = 14,
    num_critical: int = 2,
    first_cutoff: float = 2.0,
    img_channels: int = 3,
) -> tuple[int, ...]:
    """Per-layer channel widths following the geometric cutoff progression.

    Returns the 16 widths (input mixing output plus 15 modulated layers, the
    last being RGB). The affine that modulates layer k reads the previous
    layer's width, so the style dimensionality is
    ``4 + sum(widths[:-1])`` - 9,894 for the 1024px reference settings.
    """
    last_cutoff = resolution / 2
    exponents = np.minimum(np.arange(num_layers + 1) / (num_layers - num_critical), 1.0)
    cutoffs = first_cutoff * (last_cutoff / first_cutoff) ** exponents
    channels = np.rint(np.minimum((channel_base / 2) / cutoffs, channel_max)).astype(int)
    channels[-1] = img_channels
    # Width of layer k's input: channels[max(k-1, 0)] over 15 layers, then RGB.
    widths = [int(channels[0])] + [int(channels[max(i - 1, 0)]) for i in range(1, num_layers + 1)]
    return tuple(widths + [img_channels])


@dataclass(frozen=True)
class GeneratorConfig:
    """Static synthesis configuration; immutable once a handle is built."""

    resolution: int = 64
    latent_dim: int = 512
    num_features: int = 32
    layer_channels: tuple[int, ...] = ()
    freq_radius: int = 3
    alignment: str = "aligned"
    dtype: str = "float64"
    init_seed: int = 0
    avg_samples: int = DEFAULT_AVG_SAMPLES
    avg_seed: int = DEFAULT_AVG_SEED
    style_gain: float = 0.3
    bias_gain: float = 0.05
    learned_translation_gain: float = 0.08
    mapping_offset_gain: float = 0.25
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.alignment not in ("aligned", "unaligned"):
            raise ValueError("alignment must be 'aligned' or 'unaligned'")
        channels = tuple(self.layer_channels) or (16,) * (NUM_LAYERS - 1) + (3,)
        if len(channels) != NUM_LAYERS:
            raise ValueError(f"layer_channels must have {NUM_LAYERS} entries")
        if channels[-1] != 3:
            raise ValueError("last layer must emit 3 (RGB) channels")
        object.__setattr__(self, "layer_channels", channels)
        if self.freq_radius < 1:
            raise ValueError("freq_radius must be >= 1")
        if 2 * self.freq_radius >= self.resolution:
            raise ValueError("freq_radius must stay below Nyquist for the resolution")

    @property
    def style_widths(self) -> tuple[int, ...]:
        """Affine output width per layer: 4 transform params, then input widths."""
        return (4,) + self.layer_channels[:-1]

    @property
    def style_dim(self) -> int:
        return sum(self.style_widths)

    @property
    def style_offsets(self) -> tuple[int, ...]:
        offs = [0]
        for w in self.style_widths:
            offs.append(offs[-1] + w)
        return tuple(offs)

    def to_manifest(self) -> dict:
        d = asdict(self)
        d["layer_channels"] = list(self.layer_channels)
        return d

    @classmethod
    def from_manifest(cls, manifest: dict) -> "GeneratorConfig":
        manifest = dict(manifest)
        manifest["layer_channels"] = tuple(manifest.get("layer_channels", ()))
        return cls(**manifest)


def toy_config(
    resolution: int = 64,
    latent_dim: int = 16,
    channels: int = 16,
    num_features: int = 32,
    freq_radius: int = 3,
    alignment: str = "aligned",
    seed: int = 0,
    dtype: str = "float64",
    avg_samples: int = 4096,
) -> GeneratorConfig:
    """Miniature exactly-equivariant configuration used as the test oracle."""
    return GeneratorConfig(
        resolution=resolution,
        latent_dim=latent_dim,
        num_features=num_features,
        layer_channels=(channels,) * (NUM_LAYERS - 1) + (3,),
        freq_radius=freq_radius,
        alignment=alignment,
        dtype=dtype,
        init_seed=seed,
        avg_samples=avg_samples,
    )


def reference_config(resolution: int = 1024, alignment: str = "aligned") -> GeneratorConfig:
    """Full-scale configuration with the standard 1024px channel budget."""
    return GeneratorConfig(
        resolution=resolution,
        latent_dim=512,
        num_features=channel_schedule(resolution)[0],
        layer_channels=channel_schedule(resolution),
        freq_radius=2,
        alignment=alignment,
        dtype="float32",
    )
