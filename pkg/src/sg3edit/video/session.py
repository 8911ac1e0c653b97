"""Video session: per-frame records, stage flags, on-disk layout.

A session is one directory, fully filesystem-portable:

    manifest.json              stage flags, crop box, params, edit spec, refs
    frames/frame_%06d.png      ingested source frames (16-bit PNG)
    frames/frame_%06d.npy      float source payloads (exact)
    aligned.sg3t               aligned crops (float), after preprocess
    codes.sg3t                 inversion codes (+ edited/smoothed when ready)
    previews/frame_%06d.png    stored reconstruction previews
    renders/frame_%06d.png     rendered output frames (+ renders.sg3t floats)
    expanded/frame_%06d.png    FOV-expanded frames
    generator_pti.sg3t         fine-tuned generator checkpoint
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sg3edit.container import read_container, write_container
from sg3edit.errors import StageOrderError
from sg3edit.geometry import Box, LandmarkSet, TransformParams, params_to_matrix
from sg3edit import pngio

STAGES = ("preprocess", "invert", "smooth", "pti", "render", "expand")
_PREREQS = {
    "preprocess": (),
    "invert": ("preprocess",),
    "smooth": ("invert",),
    "pti": ("invert",),
    "render": ("smooth", "pti"),
    "expand": ("smooth", "pti"),
}


@dataclass
class FrameRecord:
    index: int
    source_ref: str
    crop: Box | None = None
    landmarks: LandmarkSet | None = None
    params: TransformParams | None = None
    matrix: np.ndarray | None = None
    code: np.ndarray | None = None
    edited_code: np.ndarray | None = None
    smoothed_code: np.ndarray | None = None
    smoothed_matrix: np.ndarray | None = None
    per_iter_losses: list[float] = field(default_factory=list)

    def set_params(self, params: TransformParams) -> None:
        self.params = params
        self.matrix = params_to_matrix(params)


class VideoSession:
    def __init__(self, directory: str | Path, kind: str = "video", session_id: str | None = None):
        self.dir = Path(directory)
        self.id = session_id or uuid.uuid4().hex[:12]
        self.kind = kind
        self.flags: dict[str, bool] = {stage: False for stage in STAGES}
        self.records: list[FrameRecord] = []
        self.crop: Box | None = None
        self.edit_spec: list[dict] = []
        self.normalize_smoothing: bool = False
        self.checkpoint_refs: dict[str, str] = {}

    # ------------------------------------------------------------------ #
    # stage management
    # ------------------------------------------------------------------ #

    def require(self, stage: str) -> None:
        missing = [pre for pre in _PREREQS[stage] if not self.flags.get(pre)]
        if missing:
            raise StageOrderError(f"stage '{stage}' requires completed {missing}")

    def complete(self, stage: str) -> None:
        self.flags[stage] = True
        self.save()

    # ------------------------------------------------------------------ #
    # frame storage
    # ------------------------------------------------------------------ #

    def frame_png(self, index: int, subdir: str = "frames") -> Path:
        return self.dir / subdir / f"frame_{index:06d}.png"

    def ingest_frames(self, frames: list[np.ndarray] | np.ndarray) -> int:
        """Store float frames as 16-bit PNG plus exact float payloads."""
        frames_dir = self.dir / "frames"
        frames_dir.mkdir(parents=True, exist_ok=True)
        self.records = []
        for i, frame in enumerate(frames):
            frame = np.asarray(frame, dtype=np.float64)
            pngio.write_png(self.frame_png(i), pngio.float_to_uint16(frame))
            np.save(frames_dir / f"frame_{i:06d}.npy", frame)
            self.records.append(FrameRecord(index=i, source_ref=f"frames/frame_{i:06d}.png"))
        self.save()
        return len(self.records)

    def ingest_directory(self, source: str | Path) -> int:
        """Ingest an existing zero-padded PNG (or .npy) frame sequence."""
        source = Path(source)
        paths = sorted(source.glob("frame_*.png")) or sorted(source.glob("frame_*.npy"))
        if not paths:
            raise FileNotFoundError(f"no frame_*.png or frame_*.npy under {source}")
        return self.ingest_frames([pngio.load_frame(p) for p in paths])

    def load_frame(self, index: int) -> np.ndarray:
        npy = self.dir / "frames" / f"frame_{index:06d}.npy"
        if npy.exists():
            return np.load(npy)
        return pngio.load_frame(self.frame_png(index))

    def frame_count(self) -> int:
        return len(self.records)

    # ------------------------------------------------------------------ #
    # tensor payloads
    # ------------------------------------------------------------------ #

    def save_aligned(self, aligned: np.ndarray) -> None:
        write_container(self.dir / "aligned.sg3t", {"aligned": aligned})

    def load_aligned(self) -> np.ndarray:
        return read_container(self.dir / "aligned.sg3t")["aligned"]

    def save_codes(self) -> None:
        payload: dict[str, np.ndarray] = {}
        for name in ("code", "edited_code", "smoothed_code", "smoothed_matrix"):
            rows = [getattr(rec, name) for rec in self.records]
            if all(r is not None for r in rows) and rows:
                payload[name] = np.stack(rows)
        if payload:
            write_container(self.dir / "codes.sg3t", payload)

    def load_codes(self) -> None:
        path = self.dir / "codes.sg3t"
        if not path.exists():
            return
        payload = read_container(path)
        for name, stack in payload.items():
            for rec, row in zip(self.records, stack):
                setattr(rec, name, row)

    # ------------------------------------------------------------------ #
    # persistence
    # ------------------------------------------------------------------ #

    def _landmark_json(self, lm: LandmarkSet | None):
        if lm is None:
            return None
        return {
            "left_eye": list(lm.left_eye),
            "right_eye": list(lm.right_eye),
            "mouth": list(lm.mouth) if lm.mouth else None,
        }

    def save(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "id": self.id,
            "kind": self.kind,
            "flags": self.flags,
            "crop": [self.crop.x0, self.crop.y0, self.crop.width, self.crop.height]
            if self.crop
            else None,
            "edit_spec": self.edit_spec,
            "normalize_smoothing": self.normalize_smoothing,
            "checkpoint_refs": self.checkpoint_refs,
            "frames": [
                {
                    "index": rec.index,
                    "source_ref": rec.source_ref,
                    "params": list(rec.params.as_tuple()) if rec.params else None,
                    "landmarks": self._landmark_json(rec.landmarks),
                    "per_iter_losses": rec.per_iter_losses,
                }
                for rec in self.records
            ],
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        self.save_codes()

    @classmethod
    def load(cls, directory: str | Path) -> "VideoSession":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        session = cls(directory, kind=manifest["kind"], session_id=manifest["id"])
        session.flags.update(manifest["flags"])
        if manifest.get("crop"):
            session.crop = Box(*manifest["crop"])
        session.edit_spec = manifest.get("edit_spec", [])
        session.normalize_smoothing = manifest.get("normalize_smoothing", False)
        session.checkpoint_refs = manifest.get("checkpoint_refs", {})
        for entry in manifest["frames"]:
            rec = FrameRecord(index=entry["index"], source_ref=entry["source_ref"])
            if entry.get("params") is not None:
                rec.set_params(TransformParams(*entry["params"]))
            lm = entry.get("landmarks")
            if lm:
                rec.landmarks = LandmarkSet(
                    left_eye=tuple(lm["left_eye"]),
                    right_eye=tuple(lm["right_eye"]),
                    mouth=tuple(lm["mouth"]) if lm.get("mouth") else None,
                )
            rec.per_iter_losses = entry.get("per_iter_losses", [])
            session.records.append(rec)
        session.load_codes()
        return session
