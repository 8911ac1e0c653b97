"""Command-line interface mirroring the HTTP API through the same core.

Sessions are plain directories, so every command takes ``--session DIR``
and stages can be chained across invocations (or machines). ``--json``
prints a machine-readable summary on stdout; failures exit nonzero with a
structured error on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
import torch

from sg3edit.configfile import load_config


class CliState:
    def __init__(self, config_path, seed, deterministic, as_json):
        self.config = load_config(config_path)
        self.seed = seed if seed is not None else int(self.config.get("seed", 0))
        self.deterministic = deterministic or bool(self.config.get("deterministic", False))
        self.as_json = as_json
        if self.deterministic:
            torch.manual_seed(self.seed)
            torch.set_num_threads(1)

    def emit(self, summary: dict) -> None:
        if self.as_json:
            click.echo(json.dumps(summary, sort_keys=True))
        else:
            for key, value in summary.items():
                click.echo(f"{key}: {value}")

    def fail(self, exc: Exception) -> None:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        click.echo(json.dumps(payload), err=True)
        sys.exit(1)


pass_state = click.make_pass_decorator(CliState)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--deterministic", is_flag=True, default=False)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
def main(ctx, config_path, seed, deterministic, as_json):
    """Inversion and editing pipeline for transform-aware generators."""
    ctx.obj = CliState(config_path, seed, deterministic, as_json)


def _load_session(path):
    from sg3edit.video.session import VideoSession

    return VideoSession.load(path)


def _generator(state, override=None):
    from sg3edit.generator.handle import GeneratorHandle

    path = override or state.config.get("generator_checkpoint")
    if not path:
        raise click.UsageError("no generator checkpoint configured")
    return GeneratorHandle.load(path)


def _encoder(state, override=None):
    from sg3edit.inversion.encoder import EncoderHandle

    path = override or state.config.get("encoder_checkpoint")
    if not path:
        raise click.UsageError("no encoder checkpoint configured")
    return EncoderHandle.load(path)


def _catalog(state, override=None):
    from sg3edit.editing import load_catalog

    path = override or state.config.get("directions_dir")
    return load_catalog(path) if path else {}


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path())
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--landmarks", "landmarks_path", required=True, type=click.Path(exists=True))
@click.option("--resolution", type=int, default=None)
@click.option("--box-scale", type=float, default=None, help="face box side in eye distances")
@pass_state
def preprocess(state, session_dir, frames_dir, landmarks_path, resolution, box_scale):
    """Ingest a frame sequence, fix the crop, align every frame."""
    from sg3edit.clients import StaticLandmarks
    from sg3edit.video import pipeline
    from sg3edit.video.session import VideoSession

    try:
        session = VideoSession(session_dir)
        session.normalize_smoothing = bool(state.config.get("normalize_smoothing", False))
        count = session.ingest_directory(frames_dir)
        detector = StaticLandmarks.from_json(landmarks_path)
        if resolution is None and state.config.get("generator_checkpoint"):
            resolution = _generator(state).config.resolution
        cfg = pipeline.PreprocessConfig()
        if box_scale is not None:
            cfg = pipeline.PreprocessConfig(box_scale=box_scale)
        pipeline.preprocess(session, detector, cfg, resolution=resolution)
        state.emit({"session": session.id, "frames": count, "stage": "preprocess", "ok": True})
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--generator", "generator_path", type=click.Path(exists=True), default=None)
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), default=None)
@click.option("--restyle-iters", type=int, default=None)
@pass_state
def invert(state, session_dir, generator_path, encoder_path, restyle_iters):
    """Encode every aligned frame with iterative refinement."""
    from sg3edit.video import pipeline

    try:
        session = _load_session(session_dir)
        n_iters = restyle_iters or int(state.config["restyle_iters"])
        pipeline.encode_frames(
            session,
            _encoder(state, encoder_path),
            _generator(state, generator_path),
            n_iters=n_iters,
            catalog=_catalog(state),
        )
        losses = [rec.per_iter_losses[-1] for rec in session.records]
        state.emit(
            {
                "session": session.id,
                "stage": "invert",
                "frames": session.frame_count(),
                "mean_final_l2": float(np.mean(losses)),
                "ok": True,
            }
        )
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--direction", "direction_specs", multiple=True, help="NAME=STEP, repeatable")
@click.option("--directions-dir", type=click.Path(exists=True), default=None)
@click.option("--preview", "preview_path", type=click.Path(), default=None)
@click.option("--frame", "frame_index", type=int, default=0)
@click.option("--generator", "generator_path", type=click.Path(exists=True), default=None)
@pass_state
def edit(state, session_dir, direction_specs, directions_dir, preview_path, frame_index, generator_path):
    """Commit an edit spec to the session (and optionally write a preview)."""
    from sg3edit.editing import EditRequest, apply_s_edit
    from sg3edit.latents import LatentWPlus
    from sg3edit.video import pipeline
    from sg3edit import pngio

    try:
        session = _load_session(session_dir)
        catalog = _catalog(state, directions_dir)
        entries = []
        for spec in direction_specs:
            name, _, step = spec.partition("=")
            if name not in catalog:
                raise KeyError(f"unknown edit direction {name!r}")
            entries.append({"name": name, "step": float(step or 0.0)})
        session.direction_catalog = catalog
        pipeline.set_edit_spec(session, entries)
        summary = {"session": session.id, "stage": "edit", "edit_spec": entries, "ok": True}
        if preview_path:
            handle = _generator(state, generator_path)
            rec = session.records[frame_index]
            code = LatentWPlus(rec.edited_code if rec.edited_code is not None else rec.code)
            s_entries = [e for e in entries if catalog[e["name"]].space == "S"]
            if s_entries:
                styles = handle.compute_styles(code)
                for entry in s_entries:
                    styles = apply_s_edit(
                        styles, EditRequest(catalog[entry["name"]], entry["step"])
                    )
                image = handle.synthesize_from_styles(styles, rec.matrix)
            else:
                image = handle.synthesize(code, rec.matrix)
            pngio.write_png(preview_path, pngio.float_to_uint8(image))
            summary["preview"] = str(preview_path)
        state.emit(summary)
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--normalize-smoothing/--verbatim-smoothing", default=None)
@pass_state
def smooth(state, session_dir, normalize_smoothing):
    """Temporally smooth the edited codes and transform matrices."""
    from sg3edit.video import pipeline

    try:
        session = _load_session(session_dir)
        normalize = normalize_smoothing
        if normalize is None:
            normalize = bool(state.config.get("normalize_smoothing", False))
        pipeline.smooth(session, normalize=normalize)
        state.emit({"session": session.id, "stage": "smooth", "normalized": normalize, "ok": True})
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--generator", "generator_path", type=click.Path(exists=True), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--freeze-fourier/--no-freeze-fourier", default=True)
@pass_state
def pti(state, session_dir, generator_path, steps, batch, lr, freeze_fourier):
    """Pivotal tuning of the generator against the unaligned frames."""
    from sg3edit.video import pipeline
    from sg3edit.video.pti import PTIConfig

    try:
        session = _load_session(session_dir)
        handle = _generator(state, generator_path)
        cfg = PTIConfig(
            steps=steps if steps is not None else int(state.config["pti_steps"]),
            batch=batch if batch is not None else int(state.config["pti_batch"]),
            lr=lr if lr is not None else float(state.config["pti_lr"]),
            lambda_lpips=0.0,
            freeze_fourier_input=freeze_fourier,
            seed=state.seed,
        )
        initial = pipeline.pti_eval_loss(session, handle)
        tuned = pipeline.pti(session, handle, cfg)
        final = pipeline.pti_eval_loss(session, tuned)
        state.emit(
            {
                "session": session.id,
                "stage": "pti",
                "steps": cfg.steps,
                "initial_loss": initial,
                "final_loss": final,
                "ok": True,
            }
        )
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--directions-dir", type=click.Path(exists=True), default=None)
@pass_state
def render(state, session_dir, directions_dir):
    """Render final frames with the tuned generator and smoothed latents."""
    from sg3edit.generator.handle import GeneratorHandle
    from sg3edit.video import pipeline

    try:
        session = _load_session(session_dir)
        ref = session.checkpoint_refs.get("pti")
        if ref is None:
            raise click.UsageError("session has no PTI checkpoint; run `sg3edit pti` first")
        handle = GeneratorHandle.load(session.dir / ref)
        frames = pipeline.render(session, handle, _catalog(state, directions_dir))
        state.emit(
            {
                "session": session.id,
                "stage": "render",
                "frames": int(frames.shape[0]),
                "out": str(session.dir / "renders"),
                "ok": True,
            }
        )
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--directions", "direction_tags", default="up", help="comma list: up,down,left,right")
@click.option("--delta", type=float, default=0.25)
@click.option("--corners/--no-corners", default=True)
@click.option("--directions-dir", type=click.Path(exists=True), default=None)
@pass_state
def expand(state, session_dir, direction_tags, delta, corners, directions_dir):
    """Widen the field of view by stitching shifted renders."""
    from sg3edit.generator.handle import GeneratorHandle
    from sg3edit.geometry import ExpansionSpec
    from sg3edit.video import pipeline

    try:
        session = _load_session(session_dir)
        ref = session.checkpoint_refs.get("pti")
        if ref is None:
            raise click.UsageError("session has no PTI checkpoint; run `sg3edit pti` first")
        handle = GeneratorHandle.load(session.dir / ref)
        spec = None
        if delta > 0:
            spec = ExpansionSpec(
                frozenset(t.strip() for t in direction_tags.split(",") if t.strip()),
                delta,
                corners,
            )
        frames = pipeline.expand(session, handle, spec, _catalog(state, directions_dir))
        state.emit(
            {
                "session": session.id,
                "stage": "expand",
                "canvas": list(frames.shape[1:3]),
                "out": str(session.dir / "expanded"),
                "ok": True,
            }
        )
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--generator", "generator_path", type=click.Path(exists=True), default=None)
@click.option("--space", type=click.Choice(["Z", "W", "S"]), default="W")
@click.option("--samples", type=int, default=200)
@click.option("--attributes", default="", help="comma-separated attribute names")
@click.option("--classifier-cmd", default=None, help="subprocess command for the scoring client")
@click.option("--pseudo-align", is_flag=True, default=False)
@click.option("--out", "out_path", type=click.Path(), default=None)
@pass_state
def dci(state, generator_path, space, samples, attributes, classifier_cmd, pseudo_align, out_path):
    """Disentanglement metrics for one latent space; prints a table row."""
    import shlex

    from sg3edit.clients import SubprocessJSONClient
    from sg3edit.dci import format_table, run_dci_pipeline

    try:
        handle = _generator(state, generator_path)
        attrs = [a.strip() for a in attributes.split(",") if a.strip()]
        if not attrs:
            raise click.UsageError("--attributes is required (comma-separated names)")
        if not classifier_cmd:
            raise click.UsageError("--classifier-cmd is required")
        with SubprocessJSONClient(shlex.split(classifier_cmd)) as client:
            report = run_dci_pipeline(
                handle, space, samples, client, attrs, pseudo_align=pseudo_align, seed=state.seed
            )
        if out_path:
            report.save(out_path)
        if state.as_json:
            click.echo(report.to_json())
        else:
            click.echo(format_table([report]))
    except Exception as exc:
        state.fail(exc)


@main.command("train-encoder")
@click.option("--generator", "generator_path", type=click.Path(exists=True), default=None)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--steps", type=int, default=1000)
@click.option("--batch", type=int, default=2)
@click.option("--accumulation", type=int, default=4)
@click.option("--restyle-iters", type=int, default=1)
@click.option("--lr", type=float, default=1e-4)
@click.option("--variant", type=click.Choice(["psp_like", "e4e_like"]), default="psp_like")
@click.option("--base-channels", type=int, default=16)
@click.option("--lambda-lpips", type=float, default=0.8)
@click.option("--lambda-id", type=float, default=0.1)
@pass_state
def train_encoder_cmd(state, generator_path, dataset_path, out_dir, steps, batch, accumulation,
                      restyle_iters, lr, variant, base_channels, lambda_lpips, lambda_id):
    """Train an encoder on an aligned image dataset (container with 'images')."""
    from sg3edit.container import read_container
    from sg3edit.inversion import (
        AlignedImageDataset,
        EncoderConfig,
        EncoderHandle,
        FixedConvIdentity,
        FixedConvPerceptual,
        TrainConfig,
        train_encoder,
    )

    try:
        handle = _generator(state, generator_path)
        images = read_container(dataset_path)["images"]
        dataset = AlignedImageDataset.from_renders(images)
        enc = EncoderHandle.create(
            EncoderConfig(
                resolution=images.shape[1],
                latent_dim=handle.config.latent_dim,
                variant=variant,
                base_channels=base_channels,
                dtype="float32" if handle.config.dtype == "float32" else "float64",
            ),
            seed=state.seed,
        )
        cfg = TrainConfig(
            steps=steps,
            batch=batch,
            accumulation=accumulation,
            restyle_iters=restyle_iters,
            lr=lr,
            seed=state.seed,
            lambda_lpips=lambda_lpips,
            lambda_id=lambda_id,
            deterministic=state.deterministic,
        )
        dtype = enc.torch_dtype
        perceptual = FixedConvPerceptual(seed=5, dtype=dtype) if cfg.lambda_lpips > 0 else None
        identity = FixedConvIdentity(seed=6, dtype=dtype) if cfg.lambda_id > 0 else None
        _, log = train_encoder(enc, handle, dataset, cfg, perceptual, identity, out_dir=out_dir)
        state.emit(
            {
                "stage": "train-encoder",
                "steps": steps,
                "final_total": log[-1]["total"] if log else None,
                "checkpoint": str(Path(out_dir) / "encoder_final.sg3t"),
                "ok": True,
            }
        )
    except Exception as exc:
        state.fail(exc)


@main.command("train-boundary")
@click.option("--scores", "scores_path", type=click.Path(exists=True), required=True)
@click.option("--attribute", required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--quantile", type=float, default=0.02)
@pass_state
def train_boundary_cmd(state, scores_path, attribute, out_path, quantile):
    """Fit a max-margin boundary from a latents+scores container."""
    from sg3edit.container import read_container
    from sg3edit.editing import save_direction, train_linear_boundary
    from sg3edit.latents import AttributeScoreSet

    try:
        payload = read_container(scores_path)
        latents = payload["latents"]
        scores = {attribute: payload[f"scores/{attribute}"]}
        direction = train_linear_boundary(
            AttributeScoreSet(latents, scores), attribute, quantile=quantile
        )
        save_direction(out_path, direction)
        state.emit(
            {"stage": "train-boundary", "attribute": attribute, "out": str(out_path), "ok": True}
        )
    except Exception as exc:
        state.fail(exc)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8321)
def serve(config_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    from sg3edit.service.app import create_app

    uvicorn.run(create_app(config_path), host=host, port=port)


if __name__ == "__main__":
    main()
