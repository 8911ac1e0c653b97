"""End-to-end video workflow: preprocess, encode, edit, smooth, PTI, render,
and field-of-view expansion.

Stages operate on a :class:`VideoSession` and are idempotent: re-running a
completed stage with the same inputs rewrites identical artifacts. Frame
work is independent per frame; smoothing is the only sequential stage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sg3edit import pngio
from sg3edit.editing import EditDirection, EditRequest, apply_linear_edit, apply_s_edit
from sg3edit.errors import EyeDistanceDrift, NoFaceDetected
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import (
    Box,
    ExpansionSpec,
    LandmarkSet,
    align_crop,
    compose,
    expansion_transforms,
    stitch,
)
from sg3edit.inversion.encoder import EncoderHandle
from sg3edit.inversion.invert import restyle_invert
from sg3edit.latents import LatentWPlus
from sg3edit.video.pti import PTIConfig, eval_loss, pti_finetune
from sg3edit.video.session import VideoSession
from sg3edit.video.smoothing import smooth_codes, smooth_matrices

DEFAULT_CANONICAL = LandmarkSet(left_eye=(0.375, 0.5), right_eye=(0.625, 0.5), mouth=(0.5, 0.75))


@dataclass
class PreprocessConfig:
    canonical: LandmarkSet = DEFAULT_CANONICAL
    box_scale: float = 4.0
    box_padding: float = 0.20
    eye_drift_tolerance: float = 0.10
    interpolation_order: int = 3


def _face_box(landmarks: LandmarkSet, frame_h: int, frame_w: int, scale: float) -> Box:
    mid = (np.asarray(landmarks.left_eye) + np.asarray(landmarks.right_eye)) / 2.0
    side = scale * landmarks.eye_distance()
    x0 = (mid[0] - side / 2.0) * frame_w
    y0 = (mid[1] - side / 2.0) * frame_h
    return Box(int(np.floor(x0)), int(np.floor(y0)), int(np.ceil(side * frame_w)), int(np.ceil(side * frame_h)))


def _union_box(boxes: list[Box], frame_h: int, frame_w: int, padding: float) -> Box:
    x0 = min(b.x0 for b in boxes)
    y0 = min(b.y0 for b in boxes)
    x1 = max(b.x0 + b.width for b in boxes)
    y1 = max(b.y0 + b.height for b in boxes)
    pad_x = int(round((x1 - x0) * padding / 2))
    pad_y = int(round((y1 - y0) * padding / 2))
    x0, y0 = x0 - pad_x, y0 - pad_y
    x1, y1 = x1 + pad_x, y1 + pad_y
    # Clamp, then squarify within bounds.
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(frame_w, x1), min(frame_h, y1)
    side = min(x1 - x0, y1 - y0)
    cx, cy = (x0 + x1) // 2, (y0 + y1) // 2
    x0 = int(np.clip(cx - side // 2, 0, frame_w - side))
    y0 = int(np.clip(cy - side // 2, 0, frame_h - side))
    return Box(x0, y0, side, side)


def preprocess(
    session: VideoSession,
    detector_client,
    config: PreprocessConfig | None = None,
    resolution: int | None = None,
) -> VideoSession:
    """Fix one crop box from frame statistics; align and record each frame.

    The crop is the padded union of per-frame face boxes (eye-distance
    scaled). Scaling uses the eye distance only; per-frame drift beyond the
    tolerance warns, since the pipeline assumes a constant camera distance.
    """
    cfg = config or PreprocessConfig()
    n = session.frame_count()
    if n < 1:
        raise ValueError("session has no ingested frames")

    frames, landmarks = [], []
    for rec in session.records:
        frame = session.load_frame(rec.index)
        lm = detector_client.detect(frame, rec.index)
        if lm is None:
            raise NoFaceDetected(frame_index=rec.index)
        frames.append(frame)
        landmarks.append(lm)

    h, w = frames[0].shape[:2]
    boxes = [_face_box(lm, h, w, cfg.box_scale) for lm in landmarks]
    crop = _union_box(boxes, h, w, cfg.box_padding)
    session.crop = crop

    ref_dist = landmarks[0].eye_distance()
    out_res = resolution or crop.width
    aligned_stack = np.zeros((n, out_res, out_res, 3))
    for rec, frame, lm in zip(session.records, frames, landmarks):
        drift = abs(lm.eye_distance() / ref_dist - 1.0)
        if drift > cfg.eye_drift_tolerance:
            warnings.warn(
                f"frame {rec.index}: eye distance drifted {100 * drift:.1f}% from frame 0",
                EyeDistanceDrift,
            )
        aligned, params = align_crop(
            frame, lm, crop, cfg.canonical, order=cfg.interpolation_order, output_size=out_res
        )
        rec.landmarks = lm
        rec.set_params(params)
        aligned_stack[rec.index] = aligned
    session.save_aligned(aligned_stack)
    session.complete("preprocess")
    return session


def encode_frames(
    session: VideoSession,
    enc: EncoderHandle,
    handle: GeneratorHandle,
    n_iters: int = 3,
    workers: int = 1,
    catalog: dict[str, EditDirection] | None = None,
) -> VideoSession:
    """Per-frame iterative inversion of the aligned crops.

    Frames are independent, so they may run on ``workers`` threads; results
    are written back by frame index, making parallel and serial runs
    bit-identical.
    """
    session.require("invert")
    aligned = session.load_aligned()
    previews = session.dir / "previews"
    previews.mkdir(parents=True, exist_ok=True)

    def invert_one(rec):
        result = restyle_invert(enc, handle, aligned[rec.index], n_iters=n_iters)
        recon = handle.synthesize(result.code, rec.matrix)
        return rec, result, recon

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(invert_one, session.records))
    else:
        outputs = [invert_one(rec) for rec in session.records]

    for rec, result, recon in outputs:
        rec.code = result.code.codes
        rec.edited_code = rec.code.copy()
        rec.per_iter_losses = result.per_iter_losses
        pngio.write_png(session.frame_png(rec.index, "previews"), pngio.float_to_uint8(recon))
    apply_edit_spec(session, catalog)
    session.complete("invert")
    return session


def set_edit_spec(session: VideoSession, entries: list[dict]) -> VideoSession:
    """Persist the edit spec and materialize latent-space edits.

    Committing an identical spec is a no-op, so commits are idempotent;
    an actual change invalidates the stages that consumed the old edit.
    """
    entries = list(entries)
    if entries == session.edit_spec:
        session.save()
        return session
    session.edit_spec = entries
    if session.flags.get("invert"):
        apply_edit_spec(session)
        for stage in ("smooth", "render", "expand"):
            session.flags[stage] = False
    session.save()
    return session


def apply_edit_spec(session: VideoSession, catalog: dict[str, EditDirection] | None = None) -> None:
    """Compute edited codes from the session's edit spec.

    Latent-space (W / W+) directions update ``edited_code``; style-space
    directions leave codes untouched and are applied at render time, after
    smoothing, through the style path.
    """
    catalog = catalog if catalog is not None else getattr(session, "direction_catalog", {})
    for rec in session.records:
        if rec.code is None:
            continue
        code = LatentWPlus(rec.code)
        for entry in session.edit_spec:
            direction = entry.get("_direction") or (catalog or {}).get(entry["name"])
            if direction is None:
                raise KeyError(f"unknown edit direction {entry['name']!r}")
            if direction.space in ("W", "Wplus"):
                code = apply_linear_edit(code, EditRequest(direction, entry["step"]))
        rec.edited_code = code.codes


def smooth(session: VideoSession, normalize: bool | None = None) -> VideoSession:
    """Temporally smooth edited codes and transform matrices."""
    session.require("smooth")
    if normalize is not None:
        session.normalize_smoothing = normalize
    codes = np.stack([rec.edited_code for rec in session.records])
    matrices = np.stack([rec.matrix for rec in session.records])
    sm_codes = smooth_codes(codes, normalize=session.normalize_smoothing)
    sm_matrices = smooth_matrices(matrices, normalize=session.normalize_smoothing)
    for rec, c, m in zip(session.records, sm_codes, sm_matrices):
        rec.smoothed_code = c
        rec.smoothed_matrix = m
    session.complete("smooth")
    return session


def pti(
    session: VideoSession,
    handle: GeneratorHandle,
    cfg: PTIConfig | None = None,
    perceptual_client=None,
) -> GeneratorHandle:
    """Pivotal tuning against the unaligned source frames.

    Pivots are the pre-smoothing inversion codes; losses compare renders
    under each frame's recovered transform with the unaligned crops.
    """
    session.require("pti")
    cfg = cfg or PTIConfig()
    codes = np.stack([rec.code for rec in session.records])
    matrices = np.stack([rec.matrix for rec in session.records])
    targets = np.stack(
        [_crop_region(session, rec.index, handle.config.resolution) for rec in session.records]
    )
    tuned, log = pti_finetune(handle, codes, targets, matrices, cfg, perceptual_client)
    ref = session.dir / "generator_pti.sg3t"
    tuned.save(ref)
    session.checkpoint_refs["pti"] = ref.name
    session.complete("pti")
    return tuned


def _crop_region(session: VideoSession, index: int, resolution: int | None = None) -> np.ndarray:
    frame = session.load_frame(index)
    crop = session.crop
    region = frame[crop.y0 : crop.y0 + crop.height, crop.x0 : crop.x0 + crop.width]
    if resolution is not None and region.shape[0] != resolution:
        from sg3edit.geometry import warp_image

        region = warp_image(region, np.eye(3), output_shape=(resolution, resolution))
    return region


def pti_eval_loss(session: VideoSession, handle: GeneratorHandle) -> float:
    codes = np.stack([rec.code for rec in session.records])
    matrices = np.stack([rec.matrix for rec in session.records])
    targets = np.stack(
        [_crop_region(session, rec.index, handle.config.resolution) for rec in session.records]
    )
    return eval_loss(handle, codes, targets, matrices)


def _render_frame(
    session: VideoSession,
    handle: GeneratorHandle,
    rec,
    matrix: np.ndarray,
    catalog: dict[str, EditDirection] | None,
) -> np.ndarray:
    code = LatentWPlus(rec.smoothed_code)
    s_edits = [e for e in session.edit_spec if _direction_for(e, catalog).space == "S"]
    if s_edits:
        styles = handle.compute_styles(code)
        for entry in s_edits:
            styles = apply_s_edit(
                styles,
                EditRequest(
                    _direction_for(entry, catalog),
                    entry["step"],
                    entry.get("channel_threshold"),
                ),
            )
        return handle.synthesize_from_styles(styles, matrix)
    return handle.synthesize(code, matrix)


def _direction_for(entry: dict, catalog: dict[str, EditDirection] | None) -> EditDirection:
    direction = entry.get("_direction") or (catalog or {}).get(entry["name"])
    if direction is None:
        raise KeyError(f"unknown edit direction {entry['name']!r}")
    return direction


def render(
    session: VideoSession,
    handle_pti: GeneratorHandle,
    catalog: dict[str, EditDirection] | None = None,
) -> np.ndarray:
    """Final frames: tuned generator, smoothed codes, smoothed matrices.

    The smoothed matrix is injected directly (it is already a matrix, not a
    parameter triple). Emits 16-bit PNGs plus exact float payloads.
    """
    session.require("render")
    out_dir = session.dir / "renders"
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    for rec in session.records:
        img = _render_frame(session, handle_pti, rec, rec.smoothed_matrix, catalog)
        frames.append(img)
        pngio.write_png(session.frame_png(rec.index, "renders"), pngio.float_to_uint16(img))
    stack = np.stack(frames)
    from sg3edit.container import write_container

    write_container(session.dir / "renders.sg3t", {"renders": stack})
    session.complete("render")
    return stack


def expand(
    session: VideoSession,
    handle_pti: GeneratorHandle,
    spec: ExpansionSpec | None,
    catalog: dict[str, EditDirection] | None = None,
) -> np.ndarray:
    """Widen the field of view by stitching shifted renders per frame.

    ``spec=None`` (the zero-expansion limit) returns the plain renders.
    """
    session.require("expand")
    out_dir = session.dir / "expanded"
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    transforms = expansion_transforms(spec) if spec is not None else []
    for rec in session.records:
        base = _render_frame(session, handle_pti, rec, rec.smoothed_matrix, catalog)
        if spec is None:
            wide = base
        else:
            shifted = [
                (tag, _render_frame(session, handle_pti, rec, compose(t_delta, rec.smoothed_matrix), catalog))
                for tag, t_delta in transforms
            ]
            wide = stitch(base, shifted, spec)
        frames.append(wide)
        pngio.write_png(session.frame_png(rec.index, "expanded"), pngio.float_to_uint16(wide))
    session.complete("expand")
    return np.stack(frames)
