import json
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from sg3edit import pngio
from sg3edit.cli import main
from sg3edit.container import write_container
from sg3edit.generator import GeneratorHandle, toy_config
from sg3edit.geometry import TransformParams
from sg3edit.synthetic import render_w_dataset, scripted_video

CLASSIFIER_WORKER = """
import sys, json
import numpy as np
rng = np.random.default_rng(0)
probes = rng.standard_normal((4, 32, 32, 3))
for line in sys.stdin:
    req = json.loads(line)
    if req["kind"] == "score":
        img = np.asarray(req["image"]).reshape(req["shape"])
        resp = {"score": float((img * probes[int(req["attribute"])]).sum())}
    else:
        resp = {"error": "unsupported"}
    sys.stdout.write(json.dumps(resp) + "\\n")
    sys.stdout.flush()
"""


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    handle = GeneratorHandle(
        toy_config(resolution=32, latent_dim=8, channels=12, num_features=24, seed=21,
                   dtype="float32")
    )
    handle.average_latent(2048, seed=7)
    gen_path = root / "gen.sg3t"
    handle.save(gen_path)

    images, _ = render_w_dataset(handle, 24, seed=60)
    write_container(root / "dataset.sg3t", {"images": images})

    video = scripted_video(handle, [TransformParams(0.0, 4 / 32, -2 / 32)] * 4, seed=29)
    frames_dir = root / "frames"
    frames_dir.mkdir()
    for i, frame in enumerate(video.frames):
        np.save(frames_dir / f"frame_{i:06d}.npy", frame)
    video.save_landmarks(root / "landmarks.json")

    lat = np.concatenate(
        [np.full((3, 8), -2.0), np.random.default_rng(0).standard_normal((40, 8)),
         np.full((3, 8), 2.0)]
    )
    lat[:3, 1:] = 0.3
    lat[-3:, 1:] = 0.3
    scores = lat[:, 0].copy()
    write_container(root / "scores.sg3t", {"latents": lat, "scores/age": scores})

    worker = root / "classifier.py"
    worker.write_text(CLASSIFIER_WORKER)

    (root / "directions").mkdir()
    result = CliRunner().invoke(
        main,
        ["--seed", "0", "train-encoder", "--generator", str(gen_path),
         "--dataset", str(root / "dataset.sg3t"), "--out", str(root / "encoder"),
         "--steps", "3", "--lr", "0.001", "--base-channels", "8",
         "--lambda-lpips", "0", "--lambda-id", "0"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    result = CliRunner().invoke(
        main,
        ["train-boundary", "--scores", str(root / "scores.sg3t"), "--attribute", "age",
         "--out", str(root / "directions" / "age.sg3t"), "--quantile", "0.06"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output

    cfg = root / "sg3edit.cfg"
    cfg.write_text(
        f"generator_checkpoint = {gen_path}\n"
        f"encoder_checkpoint = {root / 'encoder' / 'encoder_final.sg3t'}\n"
        f"directions_dir = {root / 'directions'}\n"
        "restyle_iters = 1\n"
        "normalize_smoothing = true\n"
        "pti_steps = 0\n"
    )
    return root, handle, video


def run_cli(args, **kwargs):
    return CliRunner().invoke(main, args, catch_exceptions=False, **kwargs)


class TestTrainingCommands:
    def test_train_boundary(self, cli_env):
        root, _, _ = cli_env
        out = root / "age_direction.sg3t"
        result = run_cli(
            ["--json", "train-boundary", "--scores", str(root / "scores.sg3t"),
             "--attribute", "age", "--out", str(out), "--quantile", "0.06"]
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output.strip())["ok"] is True
        from sg3edit.editing import load_direction

        d = load_direction(out)
        assert d.space == "W" and abs(np.linalg.norm(d.vector) - 1) < 1e-9

    def test_train_encoder_short(self, cli_env):
        root, _, _ = cli_env
        out_dir = root / "encoder2"
        result = run_cli(
            ["--json", "--seed", "0", "train-encoder",
             "--generator", str(root / "gen.sg3t"),
             "--dataset", str(root / "dataset.sg3t"),
             "--out", str(out_dir), "--steps", "3", "--lr", "0.001",
             "--base-channels", "8", "--lambda-lpips", "0", "--lambda-id", "0"]
        )
        assert result.exit_code == 0, result.output
        assert (out_dir / "encoder_final.sg3t").exists()
        assert (out_dir / "train_log.jsonl").exists()


class TestPipelineCommands:
    def test_full_pipeline_and_stage_order(self, cli_env):
        root, handle, video = cli_env
        session = root / "session"
        cfg = ["--config", str(root / "sg3edit.cfg"), "--json"]

        result = run_cli(
            cfg + ["preprocess", "--session", str(session),
                   "--frames", str(root / "frames"),
                   "--landmarks", str(root / "landmarks.json")]
        )
        assert result.exit_code == 0, result.output

        # render before invert: stage-order error, nonzero exit.
        result = run_cli(cfg + ["smooth", "--session", str(session)])
        assert result.exit_code == 1
        assert "StageOrderError" in result.output or "stage" in result.output

        result = run_cli(cfg + ["invert", "--session", str(session)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output.strip())
        assert summary["frames"] == 4

        # edit with step 0 emits exactly the stored reconstruction preview.
        preview_path = root / "edit_preview.png"
        result = run_cli(
            cfg + ["edit", "--session", str(session), "--direction", "age=0",
                   "--preview", str(preview_path), "--frame", "0"]
        )
        assert result.exit_code == 0, result.output
        stored = (session / "previews" / "frame_000000.png").read_bytes()
        assert preview_path.read_bytes() == stored

        for stage_args in (["smooth"], ["pti", "--steps", "0"], ["render"],
                           ["expand", "--directions", "up,right", "--delta", "0.25"]):
            result = run_cli(cfg + [stage_args[0], "--session", str(session)] + stage_args[1:])
            assert result.exit_code == 0, (stage_args, result.output)

        wide = pngio.read_png(session / "expanded" / "frame_000000.png")
        assert wide.shape == (40, 40, 3)

    def test_dci_command_with_subprocess_classifier(self, cli_env):
        root, _, _ = cli_env
        result = run_cli(
            ["--json", "dci", "--generator", str(root / "gen.sg3t"), "--space", "W",
             "--samples", "24", "--attributes", "0,1,2,3",
             "--classifier-cmd", f"{sys.executable} {root / 'classifier.py'}",
             "--out", str(root / "dci.sg3t")]
        )
        assert result.exit_code == 0, result.output
        body = json.loads(result.output.strip())
        assert body["space"] == "W" and 0.0 <= body["D"] <= 1.0
        assert (root / "dci.sg3t").exists()

    def test_plain_output_mode(self, cli_env):
        root, _, _ = cli_env
        result = run_cli(
            ["dci", "--generator", str(root / "gen.sg3t"), "--space", "W",
             "--samples", "16", "--attributes", "0,1",
             "--classifier-cmd", f"{sys.executable} {root / 'classifier.py'}"]
        )
        assert result.exit_code == 0
        assert "Disent." in result.output
