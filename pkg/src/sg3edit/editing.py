"""Edit directions: linear boundaries in W, global style-channel directions.

A direction is a named unit vector in W, W+ (flattened 16 rows), or the
style space, with application metadata. Boundary training follows the
max-margin recipe: score latents, keep the top/bottom quantiles, fit a
hard-margin linear separator, take its unit normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn import svm

from sg3edit.container import read_checkpoint, write_checkpoint
from sg3edit.errors import (
    DegenerateDirection,
    DegenerateLabels,
    SpaceMismatch,
)
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import IDENTITY_PARAMS
from sg3edit.latents import (
    NUM_LAYERS,
    AttributeScoreSet,
    LatentW,
    LatentWPlus,
    StyleVector,
)

SPACES = ("W", "Wplus", "S")


@dataclass(frozen=True)
class EditDirection:
    name: str
    space: str
    vector: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}")
        v = np.asarray(self.vector, dtype=np.float64)
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm == 0:
            raise DegenerateDirection(f"direction {self.name!r} has zero or non-finite norm")
        if abs(norm - 1.0) > 1e-9:
            v = v / norm
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class EditRequest:
    direction: EditDirection
    step: float
    channel_threshold: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.step):
            raise ValueError("step must be finite")


def train_linear_boundary(
    data: AttributeScoreSet,
    attribute: str,
    quantile: float = 0.02,
    margin_c: float = 1e6,
) -> EditDirection:
    """Unit normal of a max-margin separator between score extremes.

    The top and bottom ``quantile`` fractions of the scored latents form the
    two classes (at least one sample each). Scores enter only through their
    ranks, so any positive rescaling trains the identical boundary.
    """
    scores = data.scores.get(attribute)
    if scores is None:
        raise KeyError(f"no scores for attribute {attribute!r}")
    latents = data.latents
    space = "W"
    if latents.ndim == 3:
        if latents.shape[1] != NUM_LAYERS:
            raise ValueError("3D latents must be (n, 16, dim)")
        latents = latents.reshape(latents.shape[0], -1)
        space = "Wplus"
    if np.unique(scores).size < 2:
        raise DegenerateLabels(f"scores for {attribute!r} are constant")
    n = scores.shape[0]
    k = max(1, int(round(n * quantile)))
    order = np.argsort(scores, kind="stable")
    low, high = order[:k], order[-k:]
    if scores[high].min() <= scores[low].max():
        raise DegenerateLabels("quantile classes overlap in score")
    x = np.concatenate([latents[low], latents[high]], axis=0)
    y = np.concatenate([-np.ones(k), np.ones(k)])
    clf = svm.SVC(kernel="linear", C=margin_c, tol=1e-10)
    clf.fit(x, y)
    normal = clf.coef_.ravel()
    return EditDirection(
        name=attribute,
        space=space,
        vector=normal,
        metadata={
            "source": "linear_boundary",
            "attribute": attribute,
            "quantile": quantile,
            "recommended_step_range": [-3.0, 3.0],
        },
    )


def apply_linear_edit(code: LatentW | LatentWPlus, req: EditRequest):
    """w + step * direction; W directions broadcast over W+ rows."""
    d = req.direction
    if isinstance(code, LatentW):
        if d.space != "W" or d.dim != code.dim:
            raise SpaceMismatch(f"direction {d.name!r} ({d.space}) cannot edit a W code")
        return LatentW(code.vector + req.step * d.vector)
    if not isinstance(code, LatentWPlus):
        raise SpaceMismatch(f"cannot apply a latent edit to {type(code).__name__}")
    if d.space == "Wplus":
        if d.dim != code.codes.size:
            raise SpaceMismatch("W+ direction length mismatch")
        return LatentWPlus(code.codes + req.step * d.vector.reshape(code.codes.shape))
    if d.space != "W" or d.dim != code.dim:
        raise SpaceMismatch(f"direction {d.name!r} ({d.space}) cannot edit a W+ code")
    rows = d.metadata.get("layer_mask")
    delta = req.step * d.vector
    codes = code.codes.copy()
    for row in rows if rows is not None else range(NUM_LAYERS):
        codes[row] = codes[row] + delta
    return LatentWPlus(codes)


def apply_s_edit(styles: StyleVector, req: EditRequest) -> StyleVector:
    """styles + step * direction on the direction's support channels only."""
    d = req.direction
    if d.space != "S":
        raise SpaceMismatch(f"direction {d.name!r} is not a style-space direction")
    if d.dim != styles.dim:
        raise SpaceMismatch(f"style length {styles.dim} != direction length {d.dim}")
    vec = d.vector
    if req.channel_threshold is not None:
        cutoff = req.channel_threshold * np.abs(vec).max()
        vec = np.where(np.abs(vec) >= cutoff, vec, 0.0)
    return styles.replace(styles.values + req.step * vec)


def pseudo_aligned_score(
    handle: GeneratorHandle,
    code: LatentWPlus,
    classifier_client,
    attribute: str,
) -> float:
    """Classifier score on the pseudo-aligned rendering of the code."""
    aligned = handle.pseudo_align(code)
    image = handle.synthesize(aligned, IDENTITY_PARAMS)
    return float(classifier_client.score(image, attribute))


def style_channel_std(handle: GeneratorHandle, seed: int, n_samples: int = 64) -> np.ndarray:
    """Per-channel standard deviation of styles over sampled W latents.

    Constant channels get a floor so probe steps stay finite.
    """
    pool = np.stack(
        [
            handle.compute_styles(LatentWPlus.from_w(handle.map_z_to_w(z))).values
            for z in handle.sample_z(n_samples, seed)
        ]
    )
    sigma = pool.std(axis=0)
    return np.where(sigma > 1e-12, sigma, 1e-12)


def compute_global_s_direction(
    handle: GeneratorHandle,
    embedding_client,
    prompt_pair: tuple[str, str],
    n_probe: int = 4,
    threshold: float = 0.1,
    probe_step: float = 1.0,
    seed: int = 0,
    std_samples: int = 64,
) -> EditDirection:
    """Style channels ranked by how much they move image embeddings along
    the text delta; sub-threshold channels zeroed, result unit-normalized.

    Each channel is probed by a symmetric perturbation scaled to its
    empirical standard deviation over sampled latents.
    """
    neutral, target = prompt_pair
    delta_t = embedding_client.embed_text(target) - embedding_client.embed_text(neutral)
    norm = np.linalg.norm(delta_t)
    if norm < 1e-12:
        raise DegenerateDirection("text prompts produce a zero embedding delta")
    delta_t = delta_t / norm

    base_styles = [
        handle.compute_styles(c) for c in handle.sample_wplus_random(max(n_probe, 1), seed)
    ]
    sigma = style_channel_std(handle, seed + 1, std_samples)

    dim = handle.config.style_dim
    relevance = np.zeros(dim)
    for styles in base_styles:
        for c in range(dim):
            step = probe_step * sigma[c]
            plus = styles.values.copy()
            minus = styles.values.copy()
            plus[c] += step
            minus[c] -= step
            img_p = handle.synthesize_from_styles(styles.replace(plus), IDENTITY_PARAMS)
            img_m = handle.synthesize_from_styles(styles.replace(minus), IDENTITY_PARAMS)
            move = embedding_client.embed_image(img_p) - embedding_client.embed_image(img_m)
            relevance[c] += float(move @ delta_t) / (2.0 * len(base_styles))

    peak = np.abs(relevance).max()
    if peak <= 0:
        raise DegenerateDirection("no channel moves the embedding along the prompt delta")
    mask = np.abs(relevance) >= threshold * peak
    masked = np.where(mask, relevance, 0.0)
    if not np.any(masked):
        raise DegenerateDirection("relevance threshold removed every channel")
    return EditDirection(
        name=f"{neutral}->{target}",
        space="S",
        vector=masked,
        metadata={
            "source": "global_style_direction",
            "prompts": [neutral, target],
            "threshold": threshold,
            "recommended_step_range": [-8.0, 8.0],
        },
    )


def save_direction(path: str | Path, direction: EditDirection) -> None:
    write_checkpoint(
        path,
        {"vector": direction.vector},
        {
            "kind": "edit_direction",
            "name": direction.name,
            "space": direction.space,
            "metadata": direction.metadata,
        },
    )


def load_direction(path: str | Path) -> EditDirection:
    tensors, manifest = read_checkpoint(path)
    if manifest.get("kind") != "edit_direction":
        raise ValueError(f"{path} is not an edit-direction file")
    return EditDirection(
        name=manifest["name"],
        space=manifest["space"],
        vector=tensors["vector"],
        metadata=manifest.get("metadata", {}),
    )


def load_catalog(directory: str | Path) -> dict[str, EditDirection]:
    catalog: dict[str, EditDirection] = {}
    directory = Path(directory)
    if not directory.is_dir():
        return catalog
    for path in sorted(directory.glob("*.sg3t")):
        direction = load_direction(path)
        catalog[direction.name] = direction
    return catalog
