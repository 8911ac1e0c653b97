"""2D rigid-transform algebra, landmark alignment, and FOV-expansion geometry.

Conventions (documented once, used everywhere):

* Coordinates are normalized to the canvas: x in [0, 1] left-to-right,
  y in [0, 1] top-to-bottom (row-major image order).
* A transform moves *content*: ``synthesize(w, (0, tx, 0))`` shifts the
  rendered content ``tx`` canvas widths to the right, ``+ty`` moves it down.
* Rotation is in degrees, counter-clockwise positive as seen on screen,
  about the canvas center (configurable).
* Matrices are 3x3 homogeneous and map canonical-content coordinates to
  screen coordinates. No scale or shear: the upper-left 2x2 block is a
  rotation with det +1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from sg3edit.errors import DegenerateLandmarks, EyeDistanceDrift

CENTER = (0.5, 0.5)
EYE_DISTANCE_EPS = 1e-9
EYE_DISTANCE_DRIFT_TOL = 0.10


@dataclass(frozen=True)
class TransformParams:
    """Rotation (degrees, CCW positive) and normalized-width translation."""

    r: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.r, self.tx, self.ty)):
            raise ValueError("transform parameters must be finite")

    @property
    def is_identity(self) -> bool:
        return self.r == 0.0 and self.tx == 0.0 and self.ty == 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.tx, self.ty)


IDENTITY_PARAMS = TransformParams(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class LandmarkSet:
    """Eye (and optional mouth) positions in normalized image coordinates."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    mouth: tuple[float, float] | None = None

    def eye_vector(self) -> np.ndarray:
        return np.asarray(self.right_eye, dtype=float) - np.asarray(self.left_eye, dtype=float)

    def eye_distance(self) -> float:
        return float(np.linalg.norm(self.eye_vector()))


@dataclass(frozen=True)
class Box:
    """Pixel-space crop box: top-left corner plus size."""

    x0: int
    y0: int
    width: int
    height: int

    def within(self, frame_h: int, frame_w: int) -> bool:
        return (
            0 <= self.x0
            and 0 <= self.y0
            and self.x0 + self.width <= frame_w
            and self.y0 + self.height <= frame_h
        )


AXIS_DIRECTIONS = ("up", "down", "left", "right")
_ORTHOGONAL_PAIRS = {
    frozenset(("up", "left")): "up_left",
    frozenset(("up", "right")): "up_right",
    frozenset(("down", "left")): "down_left",
    frozenset(("down", "right")): "down_right",
}


@dataclass(frozen=True)
class ExpansionSpec:
    """Field-of-view expansion request: directions, size, corner handling."""

    directions: frozenset[str]
    delta: float
    include_corners: bool = True

    def __post_init__(self):
        dirs = frozenset(self.directions)
        object.__setattr__(self, "directions", dirs)
        if not dirs:
            raise ValueError("expansion needs at least one direction")
        unknown = dirs - set(AXIS_DIRECTIONS)
        if unknown:
            raise ValueError(f"unknown directions: {sorted(unknown)}")
        if not (self.delta > 0):
            raise ValueError("delta must be positive")


def _rotation_block(r_degrees: float) -> np.ndarray:
    # Screen-CCW in a y-down frame: +r moves the +x axis upward.
    t = math.radians(r_degrees)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]], dtype=float)


def params_to_matrix(p: TransformParams, center: tuple[float, float] = CENTER) -> np.ndarray:
    """Homogeneous matrix: rotate about ``center`` by ``p.r``, then translate."""
    if p.r == 0.0:
        # Exact pure-translation fast path; keeps integer-pixel shifts bit-clean.
        m = np.eye(3)
        m[0, 2] = p.tx
        m[1, 2] = p.ty
        return m
    rot = _rotation_block(p.r)
    cx, cy = center
    m = np.eye(3)
    m[:2, :2] = rot
    m[:2, 2] = np.array([cx, cy]) - rot @ np.array([cx, cy]) + np.array([p.tx, p.ty])
    return m


def matrix_to_params(m: np.ndarray, center: tuple[float, float] = CENTER) -> TransformParams:
    """Inverse of :func:`params_to_matrix` for rigid matrices."""
    r = math.degrees(math.atan2(m[0, 1], m[0, 0]))
    c = np.array([*center, 1.0])
    moved = m @ c
    return TransformParams(r, float(moved[0] - center[0]), float(moved[1] - center[1]))


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Apply ``inner`` first, then ``outer``."""
    return np.asarray(outer, dtype=float) @ np.asarray(inner, dtype=float)


def invert_matrix(m: np.ndarray) -> np.ndarray:
    """Closed-form inverse for rigid transforms (transpose of the rotation block)."""
    rot = m[:2, :2]
    out = np.eye(3)
    out[:2, :2] = rot.T
    out[:2, 2] = -rot.T @ m[:2, 2]
    return out


def is_rigid(m: np.ndarray, tol: float = 1e-10) -> bool:
    rot = m[:2, :2]
    if not np.allclose(rot @ rot.T, np.eye(2), atol=tol):
        return False
    if abs(np.linalg.det(rot) - 1.0) > tol:
        return False
    return bool(np.allclose(m[2], [0.0, 0.0, 1.0], atol=tol))


def project_to_rigid(m: np.ndarray) -> np.ndarray:
    """Nearest rigid transform (Frobenius): polar-project the 2x2 block.

    The translation column is the free parameter of the nearest rigid map,
    so it is kept as-is; the bottom row is reset to (0, 0, 1).
    """
    u, _, vt = np.linalg.svd(m[:2, :2])
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] *= -1
        rot = u @ vt
    out = np.eye(3)
    out[:2, :2] = rot
    out[:2, 2] = m[:2, 2]
    return out


def _signed_angle_between(v_from: np.ndarray, v_to: np.ndarray) -> float:
    # Angle r with rotation_block(r) @ v_from == v_to, in the y-down frame.
    a_from = math.atan2(v_from[1], v_from[0])
    a_to = math.atan2(v_to[1], v_to[0])
    return math.degrees(math.atan2(math.sin(a_from - a_to), math.cos(a_from - a_to)))


def estimate_alignment(
    unaligned: LandmarkSet,
    aligned: LandmarkSet,
    center: tuple[float, float] = CENTER,
) -> TransformParams:
    """Recover the (r, tx, ty) mapping aligned landmarks onto unaligned ones.

    Rotation is the signed angle between the eye lines. Translation is the
    residual displacement of the left eye after rotating the aligned set.
    Only the eye distance enters the scale check: a drift above 10 percent
    raises an :class:`EyeDistanceDrift` warning (transforms carry no scale).
    """
    v_a = aligned.eye_vector()
    v_u = unaligned.eye_vector()
    d_a, d_u = np.linalg.norm(v_a), np.linalg.norm(v_u)
    if d_a < EYE_DISTANCE_EPS or d_u < EYE_DISTANCE_EPS:
        raise DegenerateLandmarks("eye separation below epsilon")
    ratio = d_u / d_a
    if abs(ratio - 1.0) > EYE_DISTANCE_DRIFT_TOL:
        warnings.warn(
            f"eye distance drifted by {100 * (ratio - 1.0):+.1f}%; transforms carry no scale",
            EyeDistanceDrift,
        )
    r = _signed_angle_between(v_a, v_u)
    rot_m = params_to_matrix(TransformParams(r, 0.0, 0.0), center=center)
    rotated_left = rot_m @ np.array([*aligned.left_eye, 1.0])
    t = np.asarray(unaligned.left_eye, dtype=float) - rotated_left[:2]
    return TransformParams(r, float(t[0]), float(t[1]))


def warp_image(
    image: np.ndarray,
    matrix: np.ndarray,
    output_shape: tuple[int, int] | None = None,
    order: int = 3,
    mode: str = "nearest",
) -> np.ndarray:
    """Resample ``image`` so output(x) = image(matrix^-1 x).

    Spline interpolation on pixel data; intended for real photographs and
    cropped frames. The exact oracle for synthesized imagery lives in
    :mod:`sg3edit.oracle`.
    """
    h, w = image.shape[:2]
    out_h, out_w = output_shape or (h, w)
    inv = invert_matrix(matrix)
    rows, cols = np.meshgrid(np.arange(out_h), np.arange(out_w), indexing="ij")
    # Pixel centers -> normalized canvas coordinates of the *output* canvas.
    xs = (cols + 0.5) / out_w
    ys = (rows + 0.5) / out_h
    pts = np.stack([xs, ys, np.ones_like(xs)], axis=0).reshape(3, -1)
    src = inv @ pts
    src_cols = src[0].reshape(out_h, out_w) * w - 0.5
    src_rows = src[1].reshape(out_h, out_w) * h - 0.5
    if image.ndim == 2:
        return scipy.ndimage.map_coordinates(image, [src_rows, src_cols], order=order, mode=mode)
    channels = [
        scipy.ndimage.map_coordinates(image[..., c], [src_rows, src_cols], order=order, mode=mode)
        for c in range(image.shape[-1])
    ]
    return np.stack(channels, axis=-1)


def align_crop(
    frame: np.ndarray,
    landmarks: LandmarkSet,
    crop: Box,
    canonical: LandmarkSet,
    order: int = 3,
    output_size: int | None = None,
) -> tuple[np.ndarray, TransformParams]:
    """Extract the canonical-pose crop and the params mapping aligned -> unaligned.

    ``landmarks`` are in normalized frame coordinates; ``canonical`` is in
    normalized crop coordinates. The returned aligned image is the crop
    resampled to canonical pose (at ``output_size`` pixels when given, in a
    single resampling pass); warping it by the returned params reproduces
    the crop region up to interpolation error.
    """
    fh, fw = frame.shape[:2]
    if not crop.within(fh, fw):
        raise ValueError(f"crop {crop} outside frame bounds {fh}x{fw}")
    region = frame[crop.y0 : crop.y0 + crop.height, crop.x0 : crop.x0 + crop.width]

    def to_crop(pt):
        return (
            (pt[0] * fw - crop.x0) / crop.width,
            (pt[1] * fh - crop.y0) / crop.height,
        )

    in_crop = LandmarkSet(
        left_eye=to_crop(landmarks.left_eye),
        right_eye=to_crop(landmarks.right_eye),
        mouth=to_crop(landmarks.mouth) if landmarks.mouth else None,
    )
    params = estimate_alignment(in_crop, canonical)
    matrix = params_to_matrix(params)
    # aligned(q) = crop(M q): inverse-warp the crop by M.
    shape = (output_size, output_size) if output_size else None
    aligned = warp_image(region, invert_matrix(matrix), output_shape=shape, order=order)
    return aligned, params


_DIRECTION_PARAMS = {
    "right": lambda d: TransformParams(0.0, -d, 0.0),
    "left": lambda d: TransformParams(0.0, +d, 0.0),
    "down": lambda d: TransformParams(0.0, 0.0, -d),
    "up": lambda d: TransformParams(0.0, 0.0, +d),
}


def expansion_transforms(spec: ExpansionSpec) -> list[tuple[str, np.ndarray]]:
    """Shift matrices per active direction, plus corner compositions."""
    out: list[tuple[str, np.ndarray]] = []
    for tag in AXIS_DIRECTIONS:
        if tag in spec.directions:
            out.append((tag, params_to_matrix(_DIRECTION_PARAMS[tag](spec.delta))))
    if spec.include_corners:
        matrices = dict(out)
        for pair, corner_tag in _ORTHOGONAL_PAIRS.items():
            if pair <= spec.directions:
                a, b = sorted(pair)
                out.append((corner_tag, compose(matrices[a], matrices[b])))
    return out


def _delta_pixels(spec: ExpansionSpec, width: int, height: int) -> tuple[int, int]:
    dw = spec.delta * width
    dh = spec.delta * height
    if abs(dw - round(dw)) > 1e-9 or abs(dh - round(dh)) > 1e-9:
        warnings.warn("expansion delta is not an integer pixel count; seams may interpolate")
    return int(round(dw)), int(round(dh))


def expanded_canvas_shape(spec: ExpansionSpec, height: int, width: int) -> tuple[int, int]:
    dw, dh = _delta_pixels(spec, width, height)
    out_w = width + dw * (("left" in spec.directions) + ("right" in spec.directions))
    out_h = height + dh * (("up" in spec.directions) + ("down" in spec.directions))
    return out_h, out_w


def _band_slices(tag, h, w, dh, dw, row0, col0):
    """(source slice in the shifted render, destination slice in the canvas)."""
    if tag == "up":
        return (slice(0, dh), slice(0, w)), (slice(row0 - dh, row0), slice(col0, col0 + w))
    if tag == "down":
        return (slice(h - dh, h), slice(0, w)), (slice(row0 + h, row0 + h + dh), slice(col0, col0 + w))
    if tag == "left":
        return (slice(0, h), slice(0, dw)), (slice(row0, row0 + h), slice(col0 - dw, col0))
    if tag == "right":
        return (slice(0, h), slice(w - dw, w)), (slice(row0, row0 + h), slice(col0 + w, col0 + w + dw))
    vert, horiz = tag.split("_")
    (vs, _), (vd, _) = _band_slices(vert, h, w, dh, dw, row0, col0)
    (_, hs), (_, hd) = _band_slices(horiz, h, w, dh, dw, row0, col0)
    return (vs, hs), (vd, hd)


def stitch(
    base: np.ndarray,
    shifted: list[tuple[str, np.ndarray]],
    spec: ExpansionSpec,
    feather: bool = False,
) -> np.ndarray:
    """Assemble the expanded canvas from the base render and shifted renders.

    Each shifted render contributes only its non-overlapping band, so every
    output pixel is written exactly once (asserted). ``feather`` blends a
    linear ramp across the seam for imperfectly equivariant generators.
    """
    h, w = base.shape[:2]
    tags = [t for t, _ in shifted]
    if len(set(tags)) != len(tags):
        raise ValueError("duplicate direction tags")
    expected = {t for t, _ in expansion_transforms(spec)}
    if shifted and not set(tags) <= expected:
        raise ValueError(f"tags {sorted(set(tags) - expected)} not in spec")
    for _, img in shifted:
        if img.shape != base.shape:
            raise ValueError("all shifted renders must match the base resolution")
    if not shifted:
        return base.copy()
    missing = expected - set(tags)
    if missing:
        raise ValueError(f"spec requires renders for {sorted(missing)}")

    dw, dh = _delta_pixels(spec, w, h)
    out_h, out_w = expanded_canvas_shape(spec, h, w)
    row0 = dh if "up" in spec.directions else 0
    col0 = dw if "left" in spec.directions else 0
    out = np.zeros((out_h, out_w) + base.shape[2:], dtype=base.dtype)
    coverage = np.zeros((out_h, out_w), dtype=np.int32)

    out[row0 : row0 + h, col0 : col0 + w] = base
    coverage[row0 : row0 + h, col0 : col0 + w] += 1
    for tag, img in shifted:
        src, dst = _band_slices(tag, h, w, dh, dw, row0, col0)
        out[dst] = img[src]
        coverage[dst] += 1
    if not np.all(coverage == 1):
        raise AssertionError("stitch coverage is not an exact partition")

    if feather:
        ramp_px = max(2, min(dh, dw) // 4) if (dh and dw) else max(2, max(dh, dw) // 4)
        for tag, img in shifted:
            if "_" in tag:
                continue
            _feather_seam(out, img, tag, h, w, dh, dw, row0, col0, ramp_px)
    return out


def _feather_seam(out, img, tag, h, w, dh, dw, row0, col0, ramp_px):
    # Blend the inner edge of each axis band back into the base region.
    ramp = np.linspace(0.0, 1.0, ramp_px + 2)[1:-1]
    if tag in ("up", "down"):
        rows = range(ramp_px)
        for i, a in zip(rows, ramp):
            dst_r = row0 + (i if tag == "up" else h - 1 - i)
            src_r = (dh + i) if tag == "up" else (h - dh - 1 - i)
            out[dst_r, col0 : col0 + w] = a * out[dst_r, col0 : col0 + w] + (1 - a) * img[src_r]
    else:
        for i, a in zip(range(ramp_px), ramp):
            dst_c = col0 + (i if tag == "left" else w - 1 - i)
            src_c = (dw + i) if tag == "left" else (w - dw - 1 - i)
            out[row0 : row0 + h, dst_c] = a * out[row0 : row0 + h, dst_c] + (1 - a) * img[:, src_c]


def seam_residual(base: np.ndarray, shifted_img: np.ndarray, tag: str, spec: ExpansionSpec) -> float:
    """Max abs disagreement between base and a shifted render on their overlap.

    Zero for an exactly equivariant generator with integer-pixel deltas.
    """
    h, w = base.shape[:2]
    dw, dh = _delta_pixels(spec, w, h)
    if tag == "up":
        diff = shifted_img[dh:, :] - base[: h - dh, :]
    elif tag == "down":
        diff = shifted_img[: h - dh, :] - base[dh:, :]
    elif tag == "left":
        diff = shifted_img[:, dw:] - base[:, : w - dw]
    elif tag == "right":
        diff = shifted_img[:, : w - dw] - base[:, dw:]
    else:
        vert, horiz = tag.split("_")
        rows_s = slice(dh, h) if vert == "up" else slice(0, h - dh)
        rows_b = slice(0, h - dh) if vert == "up" else slice(dh, h)
        cols_s = slice(dw, w) if horiz == "left" else slice(0, w - dw)
        cols_b = slice(0, w - dw) if horiz == "left" else slice(dw, w)
        diff = shifted_img[rows_s, cols_s] - base[rows_b, cols_b]
    return float(np.max(np.abs(diff)))
