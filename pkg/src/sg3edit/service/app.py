"""HTTP API over the pipeline: sessions, stage jobs, synchronous previews.

Long stages (invert, smooth, pti, render, expand) run as writer jobs with
polling via the status endpoint; previews are synchronous readers and never
mutate a session. One writer at a time per session (409 on conflict);
unknown sessions 404; malformed bodies 422.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response, UploadFile

from sg3edit import pngio
from sg3edit.configfile import load_config
from sg3edit.editing import EditRequest, apply_linear_edit, apply_s_edit, load_catalog
from sg3edit.errors import SessionLockError, StageOrderError
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import ExpansionSpec, TransformParams
from sg3edit.inversion.encoder import EncoderHandle
from sg3edit.latents import LatentWPlus
from sg3edit.service.jobs import JobRunner
from sg3edit.service.locks import LockRegistry
from sg3edit.video import pipeline
from sg3edit.video.pti import PTIConfig
from sg3edit.video.session import VideoSession


class ServiceState:
    def __init__(self, config: dict):
        self.config = config
        self.sessions_dir = Path(config["sessions_dir"])
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.generator = GeneratorHandle.load(config["generator_checkpoint"])
        self.encoder = (
            EncoderHandle.load(config["encoder_checkpoint"])
            if config.get("encoder_checkpoint")
            else None
        )
        self.directions = (
            load_catalog(config["directions_dir"]) if config.get("directions_dir") else {}
        )
        self.locks = LockRegistry()
        self.jobs = JobRunner()
        self._pti_handles: dict[str, GeneratorHandle] = {}

    def session_path(self, session_id: str) -> Path:
        return self.sessions_dir / session_id

    def load_session(self, session_id: str) -> VideoSession:
        path = self.session_path(session_id)
        if not (path / "manifest.json").exists():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return VideoSession.load(path)

    def pti_handle(self, session: VideoSession) -> GeneratorHandle:
        ref = session.checkpoint_refs.get("pti")
        if ref is None:
            return self.generator
        if session.id not in self._pti_handles:
            self._pti_handles[session.id] = GeneratorHandle.load(session.dir / ref)
        return self._pti_handles[session.id]


def create_app(config: dict | str | Path) -> FastAPI:
    if not isinstance(config, dict):
        config = load_config(config)
    state = ServiceState(config)
    app = FastAPI(title="sg3edit service")
    app.state.service = state

    @app.exception_handler(SessionLockError)
    async def lock_conflict(_request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(StageOrderError)
    async def stage_order(_request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=409, content={"detail": str(exc)})

    def submit_stage(session_id: str, stage: str, fn):
        lock = state.locks.get(session_id)
        if not lock.try_acquire_write():
            raise HTTPException(status_code=409, detail="another stage job holds this session")
        try:
            job = state.jobs.submit(session_id, stage, fn, lock)
        except BaseException:
            lock.release_write()
            raise
        return {"job": job.summary()}

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        kind = body.get("kind", "video")
        if kind not in ("image", "video"):
            raise HTTPException(status_code=422, detail="kind must be image|video")
        session = VideoSession(state.sessions_dir / _new_id(), kind=kind)
        session.dir.mkdir(parents=True, exist_ok=True)
        session.id = session.dir.name
        session.normalize_smoothing = bool(state.config.get("normalize_smoothing", False))
        session.save()
        return {"id": session.id}

    @app.post("/sessions/{session_id}/frames")
    async def upload_frames(session_id: str, files: list[UploadFile]):
        session = state.load_session(session_id)
        lock = state.locks.get(session_id)
        with lock.write():
            frames = []
            for f in sorted(files, key=lambda u: u.filename or ""):
                data = await f.read()
                if (f.filename or "").endswith(".npy"):
                    frames.append(np.load(io.BytesIO(data)).astype(np.float64))
                else:
                    arr = pngio.decode_png(data)
                    frames.append(
                        pngio.uint16_to_float(arr)
                        if arr.dtype == np.uint16
                        else pngio.uint8_to_float(arr)
                    )
            count = session.ingest_frames(frames)
        return {"ingested": count}

    @app.post("/sessions/{session_id}/landmarks")
    async def upload_landmarks(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        lock = state.locks.get(session_id)
        with lock.write():
            (session.dir / "landmarks.json").write_text(json.dumps(body["landmarks"]))
        return {"ok": True}

    @app.post("/sessions/{session_id}/preprocess")
    async def preprocess_stage(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        resolution = body.get("resolution") or state.generator.config.resolution

        def run():
            from sg3edit.clients import StaticLandmarks

            detector = StaticLandmarks.from_json(session.dir / "landmarks.json")
            pipeline.preprocess(session, detector, resolution=resolution)

        return submit_stage(session_id, "preprocess", run)

    @app.post("/sessions/{session_id}/invert")
    async def invert_stage(session_id: str, request: Request):
        session = state.load_session(session_id)
        if state.encoder is None:
            raise HTTPException(status_code=422, detail="service has no encoder checkpoint")
        body = await _json_body(request)
        n_iters = int(body.get("restyle_iters") or state.config["restyle_iters"])
        _require_stage(session, "invert")

        def run():
            pipeline.encode_frames(
                session, state.encoder, state.generator, n_iters=n_iters, catalog=state.directions
            )

        return submit_stage(session_id, "invert", run)

    @app.post("/sessions/{session_id}/edit/commit")
    async def commit_edit(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        entries = body.get("directions", [])
        for entry in entries:
            if entry.get("name") not in state.directions:
                raise HTTPException(status_code=422, detail=f"unknown direction {entry.get('name')!r}")
            entry["_direction"] = state.directions[entry["name"]]
        lock = state.locks.get(session_id)
        with lock.write():
            for entry in entries:
                entry.pop("_direction", None)
            changed = entries != session.edit_spec
            session.edit_spec = entries
            if changed and session.flags.get("invert"):
                pipeline.apply_edit_spec(session, state.directions)
                for stage in ("smooth", "render", "expand"):
                    session.flags[stage] = False
            session.save()
        return {"edit_spec": session.edit_spec}

    @app.post("/sessions/{session_id}/edit/preview")
    async def preview(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        frame_index = int(body.get("frame_index", 0))
        if not session.flags.get("invert"):
            raise HTTPException(status_code=409, detail="preview requires completed inversion")
        if frame_index >= session.frame_count():
            raise HTTPException(status_code=422, detail="frame_index out of range")
        lock = state.locks.get(session_id)
        with lock.read():
            png = _render_preview(state, session, frame_index, body)
        return Response(content=png, media_type="image/png")

    @app.post("/sessions/{session_id}/smooth")
    async def smooth_stage(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        normalize = body.get("normalize")
        _require_stage(session, "smooth")

        def run():
            pipeline.smooth(session, normalize=normalize)

        return submit_stage(session_id, "smooth", run)

    @app.post("/sessions/{session_id}/pti")
    async def pti_stage(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        cfg = PTIConfig(
            steps=int(body.get("steps", state.config["pti_steps"])),
            batch=int(body.get("batch", state.config["pti_batch"])),
            lr=float(body.get("lr", state.config["pti_lr"])),
            lambda_lpips=float(body.get("lambda_lpips", 0.0)),
            freeze_fourier_input=bool(body.get("freeze_fourier_input", True)),
        )
        _require_stage(session, "pti")

        def run():
            tuned = pipeline.pti(session, state.generator, cfg)
            state._pti_handles[session.id] = tuned

        return submit_stage(session_id, "pti", run)

    @app.post("/sessions/{session_id}/render")
    async def render_stage(session_id: str):
        session = state.load_session(session_id)
        _require_stage(session, "render")

        def run():
            pipeline.render(session, state.pti_handle(session), state.directions)

        return submit_stage(session_id, "render", run)

    @app.post("/sessions/{session_id}/expand")
    async def expand_stage(session_id: str, request: Request):
        session = state.load_session(session_id)
        body = await _json_body(request)
        _require_stage(session, "expand")
        delta = body.get("delta", 0.0)
        spec = None
        if delta:
            try:
                spec = ExpansionSpec(
                    frozenset(body.get("directions", ["up"])),
                    float(delta),
                    bool(body.get("include_corners", True)),
                )
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))

        def run():
            pipeline.expand(session, state.pti_handle(session), spec, state.directions)

        return submit_stage(session_id, "expand", run)

    @app.get("/sessions/{session_id}/status")
    async def status(session_id: str):
        session = state.load_session(session_id)
        return {
            "id": session.id,
            "kind": session.kind,
            "stages": session.flags,
            "frames": session.frame_count(),
            "edit_spec": session.edit_spec,
            "jobs": [j.summary() for j in state.jobs.for_session(session_id)],
            "locked": state.locks.get(session_id).writing,
        }

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job.summary()

    @app.get("/directions")
    async def directions():
        return {
            "directions": [
                {
                    "name": d.name,
                    "space": d.space,
                    "dim": d.dim,
                    "metadata": d.metadata,
                }
                for d in state.directions.values()
            ]
        }

    return app


def _new_id() -> str:
    import uuid

    return uuid.uuid4().hex[:12]


async def _json_body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        body = json.loads(raw)
    except json.JSONDecodeError:
        raise HTTPException(status_code=422, detail="malformed JSON body")
    if not isinstance(body, dict):
        raise HTTPException(status_code=422, detail="body must be a JSON object")
    return body


def _require_stage(session: VideoSession, stage: str) -> None:
    try:
        session.require(stage)
    except StageOrderError as exc:
        raise HTTPException(status_code=409, detail=str(exc))


def _render_preview(state: ServiceState, session: VideoSession, frame_index: int, body: dict) -> bytes:
    """Synchronous preview: current codes, optional direction and params.

    ``resolution`` samples the continuous image on a coarser grid (the UI's
    reduced-size drag previews); omitted for full-size renders.
    """
    rec = session.records[frame_index]
    handle = state.pti_handle(session)
    code = LatentWPlus(rec.edited_code if rec.edited_code is not None else rec.code)
    resolution = body.get("resolution") or state.config.get("preview_resolution")
    resolution = int(resolution) if resolution else None

    name = body.get("direction_name")
    step = float(body.get("step", 0.0))
    matrix = rec.matrix
    if body.get("params") is not None:
        p = body["params"]
        matrix = None
        if any(p.get(k) for k in ("r", "tx", "ty")):
            from sg3edit.geometry import params_to_matrix

            matrix = params_to_matrix(
                TransformParams(float(p.get("r", 0)), float(p.get("tx", 0)), float(p.get("ty", 0)))
            )

    if name and step != 0.0:
        direction = state.directions.get(name)
        if direction is None:
            raise HTTPException(status_code=422, detail=f"unknown direction {name!r}")
        req = EditRequest(direction, step, body.get("channel_threshold"))
        if direction.space == "S":
            styles = apply_s_edit(handle.compute_styles(code), req)
            image = handle.synthesize_from_styles(styles, matrix, resolution=resolution)
        else:
            image = handle.synthesize(apply_linear_edit(code, req), matrix, resolution=resolution)
    else:
        image = handle.synthesize(code, matrix, resolution=resolution)
    return pngio.encode_png(pngio.float_to_uint8(image))
