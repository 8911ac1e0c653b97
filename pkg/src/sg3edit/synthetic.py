"""Synthetic fixtures: scripted videos, landmark scripts, probe clients.

Everything here is derived from known ground truth (the miniature
generator plus explicit transforms), so pipelines can be verified without
any external detector, classifier, or embedding model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import LandmarkSet, TransformParams, params_to_matrix
from sg3edit.latents import LatentWPlus

CANONICAL_LANDMARKS = LandmarkSet(left_eye=(0.375, 0.5), right_eye=(0.625, 0.5), mouth=(0.5, 0.75))


def transform_landmarks(matrix: np.ndarray, landmarks: LandmarkSet) -> LandmarkSet:
    def apply(pt):
        v = matrix @ np.array([pt[0], pt[1], 1.0])
        return (float(v[0]), float(v[1]))

    return LandmarkSet(
        left_eye=apply(landmarks.left_eye),
        right_eye=apply(landmarks.right_eye),
        mouth=apply(landmarks.mouth) if landmarks.mouth else None,
    )


@dataclass
class ScriptedVideo:
    """Frames rendered at known transforms from one latent code."""

    frames: np.ndarray
    params: list[TransformParams]
    landmarks: list[LandmarkSet]
    code: LatentWPlus

    def save_landmarks(self, path: str | Path) -> None:
        payload = [
            {
                "left_eye": list(lm.left_eye),
                "right_eye": list(lm.right_eye),
                "mouth": list(lm.mouth) if lm.mouth else None,
            }
            for lm in self.landmarks
        ]
        Path(path).write_text(json.dumps(payload, indent=1))


def scripted_video(
    handle: GeneratorHandle,
    params: list[TransformParams],
    code: LatentWPlus | None = None,
    seed: int = 17,
) -> ScriptedVideo:
    """Render one code under a scripted transform trajectory.

    Landmarks are the canonical reference points pushed through each
    frame's forward transform - the exact ground truth a detector would
    ideally report.
    """
    if code is None:
        code = handle.sample_wplus_random(1, seed)[0]
    frames, landmarks = [], []
    for p in params:
        matrix = params_to_matrix(p)
        frames.append(handle.synthesize(code, matrix))
        landmarks.append(transform_landmarks(matrix, CANONICAL_LANDMARKS))
    return ScriptedVideo(np.stack(frames), list(params), landmarks, code)


class ScriptedLandmarkDetector:
    """Detector client that replays scripted ground-truth landmarks."""

    def __init__(self, landmarks: list[LandmarkSet | None]):
        self._landmarks = landmarks

    def detect(self, image: np.ndarray, frame_index: int | None = None):
        from sg3edit.errors import NoFaceDetected

        idx = frame_index or 0
        if idx >= len(self._landmarks) or self._landmarks[idx] is None:
            raise NoFaceDetected(frame_index=idx)
        return self._landmarks[idx]


class StyleProbeClassifier:
    """Reads selected style channels back from images, exactly.

    Valid when sampling varies only the probed layer's channels: the image
    is then affine in those styles, so a least-squares probe on the known
    Jacobian recovers them to float precision. Attribute names are
    ``"ch<k>"`` for probed channel index k.
    """

    def __init__(self, handle: GeneratorHandle, base: LatentWPlus, channels: list[int]):
        self.channels = list(channels)
        styles = handle.compute_styles(base)
        base_img = handle.synthesize_from_styles(styles)
        jac = []
        eps = 0.5
        for c in self.channels:
            plus, minus = styles.values.copy(), styles.values.copy()
            plus[c] += eps
            minus[c] -= eps
            img_p = handle.synthesize_from_styles(styles.replace(plus))
            img_m = handle.synthesize_from_styles(styles.replace(minus))
            jac.append(((img_p - img_m) / (2 * eps)).ravel())
        jac_mat = np.stack(jac, axis=1)
        self._probe = np.linalg.pinv(jac_mat)
        self._base_img = base_img.ravel()
        self._base_values = styles.values[self.channels]

    def score(self, image: np.ndarray, attribute: str) -> float:
        k = int(attribute.removeprefix("ch"))
        coeffs = self._probe @ (image.ravel() - self._base_img)
        idx = self.channels.index(k)
        return float(self._base_values[idx] + coeffs[idx])


class MixingClassifier:
    """Dense random mixtures of a probe classifier's channel read-backs."""

    def __init__(self, probe: StyleProbeClassifier, n_attributes: int, seed: int = 0):
        self._probe = probe
        rng = np.random.default_rng(seed)
        k = len(probe.channels)
        self._mix = rng.normal(size=(n_attributes, k)) / np.sqrt(k)

    def score(self, image: np.ndarray, attribute: str) -> float:
        j = int(attribute.removeprefix("mix"))
        reads = np.array([self._probe.score(image, f"ch{c}") for c in self._probe.channels])
        return float(self._mix[j] @ reads)


class ChannelEmbedding:
    """Embedding client that recognizes one style channel's probe renders.

    A per-pixel-linear generator confines every style response to a small
    image subspace, so no linear probe can separate one channel from the
    rest. Instead the mock precomputes the exact +-step renders of the
    designated channel and answers +-e0 only on a bit-exact match: by
    construction exactly that channel moves embeddings along the text
    delta, every other channel not at all.
    """

    def __init__(
        self,
        handle: GeneratorHandle,
        base: LatentWPlus,
        channel: int,
        step: float,
        dim: int = 8,
    ):
        styles = handle.compute_styles(base)
        plus, minus = styles.values.copy(), styles.values.copy()
        plus[channel] += step
        minus[channel] -= step
        self._anchor_plus = handle.synthesize_from_styles(styles.replace(plus))
        self._anchor_minus = handle.synthesize_from_styles(styles.replace(minus))
        self._dim = dim

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        out = np.zeros(self._dim)
        if np.array_equal(image, self._anchor_plus):
            out[0] = 1.0
        elif np.array_equal(image, self._anchor_minus):
            out[0] = -1.0
        return out

    def embed_text(self, text: str) -> np.ndarray:
        out = np.zeros(self._dim)
        if text == "target":
            out[0] = 1.0
        elif text != "neutral":
            out[1] = 1.0
        return out


def latent_probe_scores(
    handle: GeneratorHandle, w_batch: np.ndarray, dims: list[int]
) -> np.ndarray:
    """Attribute table = selected W coordinates (an identity factor model)."""
    return w_batch[:, dims]


def render_w_dataset(handle: GeneratorHandle, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(images, w) pairs for encoder training, canonical pose only."""
    z = handle.sample_z(n, seed)
    w = handle.map_z_batch(z)
    codes = torch.as_tensor(
        np.repeat(w[:, None, :], 16, axis=1), dtype=handle.torch_dtype
    )
    images = []
    with torch.no_grad():
        for start in range(0, n, 16):
            img = handle.network(codes[start : start + 16])
            images.append(img.permute(0, 2, 3, 1).numpy())
    return np.concatenate(images), w
