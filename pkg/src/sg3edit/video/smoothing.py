"""Five-tap weighted moving average for latent codes and transform matrices.

The default weights are (1/3)*[0.25, 0.75, 1, 0.75, 0.5]. They sum to
3.25/3, not 1, and are asymmetric; verbatim application is the default, and
``normalize=True`` divides by the weight sum. Boundary frames clamp window
indices to the valid range, preserving sequence length.

Both modes are evaluated in delta form,

    out_i = gain * x_i + sum_j mu_j * (x_{i+j} - x_i),

so a constant window reproduces ``gain * x_i`` bit-exactly (``x_i`` itself
in normalized mode) - downstream seam-exactness relies on this.
"""

from __future__ import annotations

import numpy as np

from sg3edit.geometry import project_to_rigid

SMOOTHING_WEIGHTS = np.array([0.25, 0.75, 1.0, 0.75, 0.5]) / 3.0
WINDOW_OFFSETS = np.arange(-2, 3)


def smooth_sequence(values: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Smooth along axis 0 with clamped boundary indices."""
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    if n < 1:
        raise ValueError("need at least one frame to smooth")
    weights = SMOOTHING_WEIGHTS / SMOOTHING_WEIGHTS.sum() if normalize else SMOOTHING_WEIGHTS
    gain = 1.0 if normalize else float(SMOOTHING_WEIGHTS.sum())
    out = np.empty_like(x)
    for i in range(n):
        acc = gain * x[i]
        for mu, off in zip(weights, WINDOW_OFFSETS):
            j = min(max(i + off, 0), n - 1)
            acc = acc + mu * (x[j] - x[i])
        out[i] = acc
    return out


def smooth_codes(codes: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Coordinate-wise smoothing of (N, 16, D) code trajectories."""
    return smooth_sequence(codes, normalize=normalize)


def smooth_matrices(matrices: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Entry-wise smoothing followed by re-projection to rigid transforms."""
    blended = smooth_sequence(matrices, normalize=normalize)
    out = np.empty_like(blended)
    for i, m in enumerate(blended):
        if np.array_equal(m, matrices[i]):
            # Constant windows come back bit-identical; keep them that way.
            out[i] = m
        else:
            out[i] = project_to_rigid(m)
    return out
