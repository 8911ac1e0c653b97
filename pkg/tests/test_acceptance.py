"""Acceptance suite: every desk-scale exit criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s -v`` to see the criterion
lines. The encoder-training fixture takes several minutes; everything else
is fast.
"""

import os
import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from sg3edit import oracle
from sg3edit.cli import main as cli_main
from sg3edit.container import read_container
from sg3edit.dci import DCIConfig, dci_scores, fit_regressors
from sg3edit.generator import GeneratorHandle, toy_config
from sg3edit.geometry import (
    ExpansionSpec,
    TransformParams,
    compose,
    expansion_transforms,
    params_to_matrix,
    seam_residual,
    stitch,
)
from sg3edit.inversion import (
    AlignedImageDataset,
    EncoderConfig,
    EncoderHandle,
    TrainConfig,
    l2_gradient,
    l2_loss,
    train_encoder,
)
from sg3edit.inversion.invert import restyle_invert
from sg3edit.synthetic import (
    CANONICAL_LANDMARKS,
    MixingClassifier,
    ScriptedLandmarkDetector,
    StyleProbeClassifier,
    render_w_dataset,
    scripted_video,
    transform_landmarks,
)
from sg3edit.video.smoothing import SMOOTHING_WEIGHTS, smooth_sequence


REPORT_PATH = os.path.join(os.path.dirname(__file__), "..", "acceptance_report.txt")
_report_started = False


def _report(line: str) -> None:
    """Print the criterion line and append it to the report artifact."""
    global _report_started
    print(f"\n{line}")
    mode = "a" if _report_started else "w"
    _report_started = True
    with open(REPORT_PATH, mode, encoding="utf-8") as fh:
        fh.write(line + "\n")


@contextmanager
def criterion(num: int, title: str):
    try:
        yield
    except BaseException:
        _report(f"[criterion {num}] FAIL - {title}")
        raise
    _report(f"[criterion {num}] PASS - {title}")


@pytest.fixture(scope="module")
def desk_handle():
    handle = GeneratorHandle(
        toy_config(resolution=32, latent_dim=8, channels=12, num_features=24, freq_radius=3,
                   seed=21, dtype="float32")
    )
    handle.average_latent(4096, seed=7)
    return handle


@pytest.fixture(scope="module")
def trained_encoder(desk_handle, tmp_path_factory):
    """Reduced-width encoder trained for the pinned 2000 steps."""
    images, _ = render_w_dataset(desk_handle, 256, seed=100)
    dataset = AlignedImageDataset.from_renders(images)
    enc = EncoderHandle.create(
        EncoderConfig(resolution=32, latent_dim=8, variant="psp_like", base_channels=16,
                      dtype="float32"),
        seed=0,
    )
    eval_images, _ = render_w_dataset(desk_handle, 64, seed=200)
    initial = np.median(
        [restyle_invert(enc, desk_handle, img, n_iters=3).per_iter_losses for img in eval_images],
        axis=0,
    )
    cfg = TrainConfig(
        steps=2000, batch=2, accumulation=4, restyle_iters=3, lr=1e-3, seed=0,
        lambda_lpips=0.8, lambda_id=0.1, grad_clip=1.0, checkpoint_every=0,
    )
    from sg3edit.inversion import FixedConvIdentity, FixedConvPerceptual

    out_dir = tmp_path_factory.mktemp("encoder")
    train_encoder(
        enc, desk_handle, dataset, cfg,
        FixedConvPerceptual(seed=5, dtype=torch.float32),
        FixedConvIdentity(seed=6, dtype=torch.float32),
        out_dir=out_dir,
    )
    return enc, eval_images, initial, out_dir / "encoder_final.sg3t"


class TestCriterion1EquivarianceOracle:
    def test_equivariance_200_cases(self, toy_handle):
        with criterion(1, "equivariance oracle: integer exact, fractional <= 1e-5"):
            start = time.time()
            res = toy_handle.config.resolution
            rng = np.random.default_rng(1001)
            codes = toy_handle.sample_wplus_random(8, seed=77)
            worst_frac = 0.0
            for case in range(200):
                code = codes[case % len(codes)]
                if case < 100:
                    px = rng.integers(-16, 17, size=4)
                    t1 = params_to_matrix(TransformParams(0, px[0] / res, px[1] / res))
                    t2 = params_to_matrix(TransformParams(0, px[2] / res, px[3] / res))
                    composed = toy_handle.synthesize(code, compose(t2, t1))
                    warped = oracle.warp(toy_handle.synthesize(code, t1), t2)
                    assert np.array_equal(composed, warped), f"integer case {case}"
                else:
                    t = rng.uniform(-0.3, 0.3, size=4)
                    t1 = params_to_matrix(TransformParams(0, t[0], t[1]))
                    t2 = params_to_matrix(TransformParams(0, t[2], t[3]))
                    composed = toy_handle.synthesize(code, compose(t2, t1))
                    warped = oracle.warp(toy_handle.synthesize(code, t1), t2)
                    worst_frac = max(worst_frac, float(np.abs(composed - warped).max()))
            assert worst_frac < 1e-5, f"fractional max-abs {worst_frac}"
            elapsed = time.time() - start
            assert elapsed < 60.0, f"took {elapsed:.1f}s"

    def test_rotation_cases_against_series_warp(self, toy_handle):
        # Rotation equivariance against the trigonometric-series warp.
        code = toy_handle.sample_wplus_random(1, seed=78)[0]
        for r in (-20.0, 13.5, 31.0):
            m = params_to_matrix(TransformParams(r, 0.05, -0.1))
            a = toy_handle.synthesize(code, m)
            b = oracle.warp(toy_handle.synthesize(code), m)
            assert np.abs(a - b).max() < 1e-5


class TestCriterion2TransformRecovery:
    def test_1000_landmark_recoveries(self):
        from sg3edit.geometry import estimate_alignment

        with criterion(2, "landmark transform recovery within 1e-6"):
            start = time.time()
            rng = np.random.default_rng(2002)
            for _ in range(1000):
                truth = TransformParams(
                    float(rng.uniform(-45, 45)),
                    float(rng.uniform(-0.3, 0.3)),
                    float(rng.uniform(-0.3, 0.3)),
                )
                moved = transform_landmarks(params_to_matrix(truth), CANONICAL_LANDMARKS)
                est = estimate_alignment(moved, CANONICAL_LANDMARKS)
                assert abs(est.r - truth.r) < 1e-6
                assert abs(est.tx - truth.tx) < 1e-6
                assert abs(est.ty - truth.ty) < 1e-6
            elapsed = time.time() - start
            assert elapsed < 5.0, f"took {elapsed:.2f}s"


class TestCriterion3SmoothingFormula:
    def test_smoothing_formulas(self):
        with criterion(3, "five-tap smoothing formula, verbatim and normalized"):
            w = np.random.default_rng(3).standard_normal((1, 16 * 8))
            seq = np.repeat(w, 9, axis=0)
            verbatim = smooth_sequence(seq)
            assert np.abs(verbatim[4] - (3.25 / 3.0) * w[0]).max() < 1e-9
            normalized = smooth_sequence(seq, normalize=True)
            assert np.abs(normalized[4] - w[0]).max() < 1e-9
            impulse = np.zeros((11, 4))
            impulse[5] = 1.0
            out = smooth_sequence(impulse)
            assert np.abs(out[5] - 1.0 / 3.0).max() < 1e-9
            assert abs(SMOOTHING_WEIGHTS.sum() - 3.25 / 3.0) < 1e-12


class TestCriterion4DCI:
    def test_dci_sanity(self, toy_handle):
        with criterion(4, "DCI: identity >= 0.99, dense gap >= 0.2, analytic exact"):
            base = toy_handle.sample_wplus_random(1, seed=2)[0]
            styles = toy_handle.compute_styles(base)
            sl = styles.layer_slice(5)
            channels = list(range(sl.start, sl.start + 6))
            probe = StyleProbeClassifier(toy_handle, base, channels)
            rng = np.random.default_rng(4)
            n = 160
            codes = np.tile(styles.values, (n, 1))
            codes[:, channels] = styles.values[channels] + rng.normal(size=(n, 6))

            identity_scores = np.zeros((n, 6))
            dense_scores = np.zeros((n, 6))
            mix = MixingClassifier(probe, n_attributes=6, seed=9)
            for i in range(n):
                img = toy_handle.synthesize_from_styles(styles.replace(codes[i]))
                for j, c in enumerate(channels):
                    identity_scores[i, j] = probe.score(img, f"ch{c}")
                for j in range(6):
                    dense_scores[i, j] = mix.score(img, f"mix{j}")

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                r_id, pred_id, targ_id = fit_regressors(codes, identity_scores, DCIConfig())
                r_dense, pred_d, targ_d = fit_regressors(codes, dense_scores, DCIConfig())
            rep_id = dci_scores(r_id, pred_id, targ_id)
            rep_dense = dci_scores(r_dense, pred_d, targ_d)
            assert rep_id.disentanglement >= 0.99
            assert rep_id.completeness >= 0.99
            assert rep_id.informativeness >= 0.99
            assert rep_id.disentanglement - rep_dense.disentanglement >= 0.2

            exact_identity = dci_scores(np.eye(5))
            assert exact_identity.disentanglement == 1.0
            assert exact_identity.completeness == 1.0
            uniform = dci_scores(np.full((5, 5), 0.2))
            assert uniform.disentanglement == 0.0
            assert uniform.completeness == 0.0

    @pytest.mark.skipif(
        "SG3EDIT_DCI_CHECKPOINT" not in os.environ,
        reason="optional: set SG3EDIT_DCI_CHECKPOINT and SG3EDIT_DCI_CLASSIFIER for real runs",
    )
    def test_optional_real_checkpoint_ordering(self):
        import shlex

        from sg3edit.clients import SubprocessJSONClient
        from sg3edit.dci import run_dci_pipeline

        handle = GeneratorHandle.load(os.environ["SG3EDIT_DCI_CHECKPOINT"])
        attrs = os.environ.get("SG3EDIT_DCI_ATTRIBUTES", "0,1,2,3").split(",")
        with SubprocessJSONClient(shlex.split(os.environ["SG3EDIT_DCI_CLASSIFIER"])) as client:
            reports = {
                space: run_dci_pipeline(handle, space, 500, client, attrs, seed=0)
                for space in ("Z", "W", "S")
            }
        assert reports["Z"].disentanglement <= reports["W"].disentanglement
        assert reports["W"].disentanglement <= reports["S"].disentanglement
        assert reports["Z"].completeness <= reports["W"].completeness
        assert reports["W"].completeness <= reports["S"].completeness


class TestCriterion5EncoderTraining:
    def test_desk_scale_training(self, desk_handle, trained_encoder):
        with criterion(5, "2000-step training: 10x loss cut, non-increasing refinement"):
            enc, eval_images, initial, _ = trained_encoder
            final = np.median(
                [
                    restyle_invert(enc, desk_handle, img, n_iters=3).per_iter_losses
                    for img in eval_images
                ],
                axis=0,
            )
            assert final[-1] <= 0.1 * initial[-1], f"ratio {final[-1] / initial[-1]:.3f}"
            assert np.all(np.diff(final) <= 1e-12), f"medians not non-increasing: {final}"

    def test_gradient_accumulation_equivalence(self, desk_handle):
        with criterion(5, "gradient accumulation single-step equivalence <= 1e-6"):
            results = []
            images, _ = render_w_dataset(desk_handle, 32, seed=50)
            for batch, accum in ((2, 4), (8, 1)):
                dataset = AlignedImageDataset.from_renders(images.astype(np.float64))
                enc = EncoderHandle.create(
                    EncoderConfig(resolution=32, latent_dim=8, variant="psp_like",
                                  base_channels=8, dtype="float64"),
                    seed=3,
                )
                cfg = TrainConfig(steps=1, batch=batch, accumulation=accum, restyle_iters=1,
                                  lr=1e-3, seed=0, lambda_lpips=0.0, lambda_id=0.0,
                                  checkpoint_every=0, deterministic=True)
                train_encoder(enc, desk_handle, dataset, cfg)
                results.append({k: v.clone() for k, v in enc.network.state_dict().items()})
            worst = max(
                float((results[0][k] - results[1][k]).abs().max()) for k in results[0]
            )
            assert worst < 1e-6, f"max parameter deviation {worst}"

    def test_pose_matched_reconstruction_beats_identity(self, desk_handle, trained_encoder):
        # Unaligned inversion: rendering at the recovered params tracks the
        # unaligned target better than rendering at the identity transform.
        from sg3edit.inversion.invert import invert_unaligned

        enc, _, _, _ = trained_encoder
        rng = np.random.default_rng(55)
        better = 0
        for k in range(8):
            truth = TransformParams(0.0, rng.integers(-6, 7) / 32, rng.integers(-6, 7) / 32)
            code = desk_handle.sample_wplus_random(1, seed=300 + k)[0]
            target = desk_handle.synthesize(code, truth)
            detector = ScriptedLandmarkDetector(
                [transform_landmarks(params_to_matrix(truth), CANONICAL_LANDMARKS)]
            )
            result = invert_unaligned(enc, desk_handle, target, detector, CANONICAL_LANDMARKS,
                                      n_iters=3)
            posed = desk_handle.synthesize(result.code, result.params)
            flat = desk_handle.synthesize(result.code, TransformParams())
            if np.mean((posed - target) ** 2) <= np.mean((flat - target) ** 2):
                better += 1
        assert better >= 7


class TestCriterion6PTI:
    def test_pti_contract(self, desk_handle):
        with criterion(6, "PTI: 200 steps halve the loss, Fourier layer frozen"):
            from sg3edit.video.pti import PTIConfig, eval_loss, fourier_input_state, pti_finetune

            code = desk_handle.sample_wplus_random(1, seed=77)[0]
            rng = np.random.default_rng(6)
            params = [TransformParams(0.0, k / 32, -k / 32) for k in range(4)]
            mats = np.stack([params_to_matrix(p) for p in params])
            targets = np.stack([desk_handle.synthesize(code, p) for p in params])
            pivots = np.repeat(code.codes[None], 4, axis=0) + 0.05 * rng.standard_normal(
                (4,) + code.codes.shape
            )
            initial = eval_loss(desk_handle, pivots, targets, mats)
            before = fourier_input_state(desk_handle)
            tuned, _ = pti_finetune(
                desk_handle, pivots, targets, mats,
                PTIConfig(steps=200, batch=2, lambda_lpips=0.0, lr=5e-3, seed=0),
            )
            final = eval_loss(tuned, pivots, targets, mats)
            assert final <= 0.5 * initial, f"ratio {final / initial:.3f}"
            after = fourier_input_state(tuned)
            for key in before:
                assert np.array_equal(before[key], after[key]), key
            unfrozen, _ = pti_finetune(
                desk_handle, pivots, targets, mats,
                PTIConfig(steps=20, batch=2, lambda_lpips=0.0, lr=5e-3,
                          freeze_fourier_input=False, seed=0),
            )
            after_unfrozen = fourier_input_state(unfrozen)
            assert any(not np.array_equal(before[k], after_unfrozen[k]) for k in before)


class TestCriterion7Expansion:
    def test_fov_expansion(self, desk_handle):
        with criterion(7, "FOV expansion: zero seams, exact coverage, canvas dims"):
            code = desk_handle.sample_wplus_random(1, seed=88)[0]
            session_matrix = params_to_matrix(TransformParams(0.0, 6 / 32, -4 / 32))
            base = desk_handle.synthesize(code, session_matrix)
            cases = [frozenset({d}) for d in ("up", "down", "left", "right")]
            cases.append(frozenset({"right", "down"}))
            for directions in cases:
                spec = ExpansionSpec(directions, 0.25, include_corners=len(directions) > 1)
                shifted = []
                for tag, t_delta in expansion_transforms(spec):
                    img = desk_handle.synthesize(code, compose(t_delta, session_matrix))
                    assert seam_residual(base, img, tag, spec) == 0.0, (directions, tag)
                    shifted.append((tag, img))
                wide = stitch(base, shifted, spec)
                h, w = base.shape[:2]
                dpx = int(0.25 * 32)
                exp_h = h + dpx * (("up" in directions) + ("down" in directions))
                exp_w = w + dpx * (("left" in directions) + ("right" in directions))
                assert wide.shape == (exp_h, exp_w, 3)
                # Exact coverage: rebuild the count map the stitcher asserts.
                counts = np.zeros(wide.shape[:2], dtype=int)
                row0 = dpx if "up" in directions else 0
                col0 = dpx if "left" in directions else 0
                counts[row0 : row0 + h, col0 : col0 + w] += 1
                from sg3edit.geometry import _band_slices

                for tag, _ in shifted:
                    _, dst = _band_slices(tag, h, w, dpx, dpx, row0, col0)
                    counts[dst] += 1
                assert np.all(counts == 1)


class TestCriterion8PipelineIntegration:
    def test_full_cli_pipeline(self, desk_handle, trained_encoder, tmp_path):
        with criterion(8, "CLI pipeline: render error <= 1e-3, re-run bit-identical"):
            start = time.time()
            _, _, _, encoder_path = trained_encoder
            gen_path = tmp_path / "gen.sg3t"
            desk_handle.save(gen_path)
            # Constant scripted transforms: the five-tap smoother only
            # preserves constant trajectories, so the reference frames stay
            # valid through the smoothing stage (normalized weights).
            truth = TransformParams(0.0, 4 / 32, -2 / 32)
            video = scripted_video(desk_handle, [truth] * 20, seed=23)
            frames_dir = tmp_path / "frames"
            frames_dir.mkdir()
            for i, frame in enumerate(video.frames):
                np.save(frames_dir / f"frame_{i:06d}.npy", frame)
            video.save_landmarks(tmp_path / "landmarks.json")
            cfg_path = tmp_path / "cfg"
            cfg_path.write_text(
                f"generator_checkpoint = {gen_path}\n"
                f"encoder_checkpoint = {encoder_path}\n"
                "restyle_iters = 3\n"
                "normalize_smoothing = true\n"
            )

            def run_pipeline(session_dir):
                runner = CliRunner()
                base_args = ["--config", str(cfg_path), "--json", "--seed", "0"]
                stages = [
                    ["preprocess", "--session", str(session_dir), "--frames", str(frames_dir),
                     "--landmarks", str(tmp_path / "landmarks.json"), "--box-scale", "16"],
                    ["invert", "--session", str(session_dir)],
                    ["smooth", "--session", str(session_dir)],
                    ["pti", "--session", str(session_dir), "--steps", "500", "--lr", "0.005"],
                    ["render", "--session", str(session_dir)],
                ]
                for stage in stages:
                    result = runner.invoke(
                        cli_main, base_args + stage, catch_exceptions=False
                    )
                    assert result.exit_code == 0, (stage[0], result.output)
                return read_container(session_dir / "renders.sg3t")["renders"]

            renders_a = run_pipeline(tmp_path / "run_a")
            err = np.abs(renders_a - video.frames).max()
            assert err <= 1e-3, f"per-pixel error {err:.2e}"

            renders_b = run_pipeline(tmp_path / "run_b")
            assert np.array_equal(renders_a, renders_b)
            png_a = (tmp_path / "run_a" / "renders" / "frame_000007.png").read_bytes()
            png_b = (tmp_path / "run_b" / "renders" / "frame_000007.png").read_bytes()
            assert png_a == png_b
            elapsed = time.time() - start
            assert elapsed < 600.0, f"took {elapsed:.0f}s"


class TestCriterion9LossGradient:
    def test_l2_gradient_check(self):
        with criterion(9, "L2 gradient: analytic vs central differences <= 1e-4"):
            gen = torch.Generator().manual_seed(9)
            x = torch.randn(3, 6, 5, generator=gen, dtype=torch.float64)
            y = torch.randn(3, 6, 5, generator=gen, dtype=torch.float64)
            analytic = l2_gradient(x, y)
            eps = 1e-6
            numeric = torch.zeros_like(y)
            flat, num_flat = y.view(-1), numeric.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + eps
                up = float(l2_loss(x, y))
                flat[i] = orig - eps
                down = float(l2_loss(x, y))
                flat[i] = orig
                num_flat[i] = (up - down) / (2 * eps)
            rel = float((analytic - numeric).abs().max() / analytic.abs().max())
            assert rel <= 1e-4, f"relative error {rel:.2e}"
