"""Latent-code value types: Z, W, W+, and style vectors.

W+ always carries one row per synthesis layer (16); a W code lifts to W+ by
row replication. Style vectors concatenate every per-layer affine output in
fixed layer order, with the four first-layer transform parameters recorded
as layer 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NUM_LAYERS = 16


def _require_finite(arr: np.ndarray, label: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class LatentZ:
    vector: np.ndarray

    def __post_init__(self):
        v = _require_finite(self.vector, "z")
        if v.ndim != 1:
            raise ValueError("z must be a vector")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class LatentW:
    vector: np.ndarray

    def __post_init__(self):
        v = _require_finite(self.vector, "w")
        if v.ndim != 1:
            raise ValueError("w must be a vector")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class LatentWPlus:
    codes: np.ndarray

    def __post_init__(self):
        c = _require_finite(self.codes, "w+")
        if c.ndim != 2 or c.shape[0] != NUM_LAYERS:
            raise ValueError(f"w+ must have exactly {NUM_LAYERS} rows, got {c.shape}")
        object.__setattr__(self, "codes", c)

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    @classmethod
    def from_w(cls, w: LatentW) -> "LatentWPlus":
        return cls(np.tile(w.vector, (NUM_LAYERS, 1)))

    def with_row(self, index: int, row: np.ndarray | LatentW) -> "LatentWPlus":
        vec = row.vector if isinstance(row, LatentW) else np.asarray(row, dtype=np.float64)
        codes = self.codes.copy()
        codes[index] = vec
        return LatentWPlus(codes)

    def row(self, index: int) -> LatentW:
        return LatentW(self.codes[index])


def pseudo_align(code: LatentWPlus, w_bar: LatentW) -> LatentWPlus:
    """Replace row 0 with the average latent; rows 1..15 untouched. Idempotent."""
    return code.with_row(0, w_bar)


@dataclass(frozen=True)
class StyleVector:
    """Concatenation of all per-layer affine outputs.

    ``layer_offsets`` has one entry per layer plus a final end offset, so the
    slice for layer k is ``values[layer_offsets[k]:layer_offsets[k+1]]``.
    """

    values: np.ndarray
    layer_offsets: tuple[int, ...]

    def __post_init__(self):
        v = _require_finite(self.values, "styles")
        if v.ndim != 1:
            raise ValueError("style values must be a vector")
        offs = tuple(int(o) for o in self.layer_offsets)
        if len(offs) != NUM_LAYERS + 1 or offs[0] != 0 or offs[-1] != v.shape[0]:
            raise ValueError("layer_offsets must cover all style values across 16 layers")
        if any(b < a for a, b in zip(offs, offs[1:])):
            raise ValueError("layer_offsets must be non-decreasing")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "layer_offsets", offs)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def layer_slice(self, layer: int) -> slice:
        return slice(self.layer_offsets[layer], self.layer_offsets[layer + 1])

    def layer_values(self, layer: int) -> np.ndarray:
        return self.values[self.layer_slice(layer)]

    def replace(self, values: np.ndarray) -> "StyleVector":
        return StyleVector(values, self.layer_offsets)


@dataclass
class AttributeScoreSet:
    """Latents with per-attribute scores, the training set for boundaries."""

    latents: np.ndarray
    scores: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.latents = np.asarray(self.latents, dtype=np.float64)
        for name, vals in self.scores.items():
            vals = np.asarray(vals, dtype=np.float64)
            if vals.shape[0] != self.latents.shape[0]:
                raise ValueError(f"score length mismatch for {name!r}")
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"scores for {name!r} contain non-finite values")
            self.scores[name] = vals
