import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sg3edit.geometry import TransformParams, is_rigid, params_to_matrix
from sg3edit.video.smoothing import (
    SMOOTHING_WEIGHTS,
    smooth_codes,
    smooth_matrices,
    smooth_sequence,
)

VERBATIM_GAIN = 3.25 / 3.0


def test_weights_match_published_values():
    assert np.allclose(SMOOTHING_WEIGHTS, np.array([0.25, 0.75, 1.0, 0.75, 0.5]) / 3.0)
    assert abs(SMOOTHING_WEIGHTS.sum() - VERBATIM_GAIN) < 1e-15


def test_equal_codes_verbatim_gain():
    w = np.full((9, 16, 8), 1.7)
    out = smooth_sequence(w)
    assert np.abs(out - VERBATIM_GAIN * 1.7).max() < 1e-9


def test_equal_codes_normalized_identity():
    w = np.random.default_rng(0).standard_normal((1, 16, 8))
    seq = np.repeat(w, 7, axis=0)
    out = smooth_sequence(seq, normalize=True)
    assert np.array_equal(out, seq)


def test_impulse_center_weight():
    e = np.zeros((11, 4))
    e[5] = 2.0
    out = smooth_sequence(e)
    assert np.abs(out[5] - 2.0 / 3.0).max() < 1e-9
    # Neighbors see the impulse through the off-center taps: frame 3 has it
    # at offset +2 (weight 0.5/3), frame 7 at offset -2 (weight 0.25/3).
    assert np.abs(out[4] - 2.0 * 0.75 / 3.0).max() < 1e-9
    assert np.abs(out[3] - 2.0 * 0.5 / 3.0).max() < 1e-9
    assert np.abs(out[7] - 2.0 * 0.25 / 3.0).max() < 1e-9


def test_asymmetry_of_outer_taps():
    e = np.zeros((11, 1))
    e[5] = 1.0
    out = smooth_sequence(e)
    assert out[3, 0] != out[7, 0]


def test_boundary_clamping_preserves_length_and_uses_edge_frames():
    x = np.arange(5, dtype=float)[:, None]
    out = smooth_sequence(x, normalize=True)
    assert out.shape == x.shape
    w = SMOOTHING_WEIGHTS / SMOOTHING_WEIGHTS.sum()
    # Frame 0 clamps offsets -2/-1 onto frame 0.
    expected0 = (w[0] + w[1] + w[2]) * x[0, 0] + w[3] * x[1, 0] + w[4] * x[2, 0]
    assert abs(out[0, 0] - expected0) < 1e-12


def test_single_frame_sequence():
    x = np.array([[3.0, -1.0]])
    assert np.array_equal(smooth_sequence(x, normalize=True), x)
    assert np.allclose(smooth_sequence(x), VERBATIM_GAIN * x)


def test_identity_matrices_verbatim_projects_back():
    mats = np.tile(np.eye(3), (7, 1, 1))
    out = smooth_matrices(mats)
    assert np.allclose(out, np.eye(3), atol=1e-12)
    for m in out:
        assert is_rigid(m)


def test_constant_rigid_normalized_bitexact():
    m = params_to_matrix(TransformParams(7.0, 0.05, -0.08))
    mats = np.tile(m, (9, 1, 1))
    out = smooth_matrices(mats, normalize=True)
    assert np.array_equal(out, mats)


def test_varying_matrices_reprojected_rigid():
    params = [TransformParams(r, 0.01 * r, 0.0) for r in np.linspace(-10, 10, 9)]
    mats = np.stack([params_to_matrix(p) for p in params])
    out = smooth_matrices(mats, normalize=True)
    for m in out:
        assert is_rigid(m, tol=1e-9)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_commutes_with_coordinate_permutation(seed):
    rng = np.random.default_rng(seed)
    codes = rng.standard_normal((8, 6))
    perm = rng.permutation(6)
    a = smooth_sequence(codes[:, perm])
    b = smooth_sequence(codes)[:, perm]
    assert np.array_equal(a, b)


def test_smooth_codes_shape():
    codes = np.random.default_rng(1).standard_normal((5, 16, 8))
    assert smooth_codes(codes).shape == codes.shape


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        smooth_sequence(np.zeros((0, 3)))
