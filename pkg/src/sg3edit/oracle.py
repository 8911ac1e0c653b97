"""Independent image-warp oracles for equivariance verification.

These operate purely on sampled images, never on generator internals. They
assume the input is periodic on the canvas and band-limited below Nyquist,
which the miniature generator guarantees by construction:

* integer-pixel translation: an index roll, exact.
* fractional translation: a Fourier phase shift, exact up to float rounding.
* general rigid transforms: direct evaluation of the trigonometric
  interpolant at inverse-transformed sample points.
"""

from __future__ import annotations

import numpy as np

from sg3edit.geometry import invert_matrix


def _as_channels(image: np.ndarray) -> np.ndarray:
    return image[..., None] if image.ndim == 2 else image


def integer_shift(image: np.ndarray, px_cols: int, px_rows: int) -> np.ndarray:
    """Move content right by px_cols and down by px_rows, wrapping around."""
    return np.roll(np.roll(image, px_rows, axis=0), px_cols, axis=1)


def translate_fourier(image: np.ndarray, tx: float, ty: float) -> np.ndarray:
    """Shift content by (tx, ty) canvas units: out(x) = in(x - t)."""
    img = _as_channels(image)
    h, w = img.shape[:2]
    ky = np.fft.fftfreq(h, d=1.0 / h)
    kx = np.fft.fftfreq(w, d=1.0 / w)
    phase = np.exp(-2j * np.pi * (ky[:, None] * ty + kx[None, :] * tx))
    out = np.empty_like(img)
    for c in range(img.shape[-1]):
        out[..., c] = np.real(np.fft.ifft2(np.fft.fft2(img[..., c]) * phase))
    return out if image.ndim == 3 else out[..., 0]


def _series_coefficients(channel: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourier-series coefficients of the pixel-center-sampled periodic image."""
    h, w = channel.shape
    coef = np.fft.fft2(channel) / (h * w)
    ky = np.fft.fftfreq(h, d=1.0 / h)
    kx = np.fft.fftfreq(w, d=1.0 / w)
    # Samples sit at (j + 0.5)/N, not j/N: shift the phase reference.
    coef = coef * np.exp(-1j * np.pi * (ky[:, None] / h + kx[None, :] / w))
    # Nyquist bins are ambiguous; a band-limited input leaves them empty.
    coef[h // 2, :] = 0.0
    coef[:, w // 2] = 0.0
    mag = np.abs(coef)
    keep = mag > (mag.max() * 1e-12 + 1e-300)
    kyg, kxg = np.meshgrid(ky, kx, indexing="ij")
    return coef[keep], kxg[keep], kyg[keep]


def warp_rigid(image: np.ndarray, matrix: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Evaluate the trigonometric interpolant at matrix^-1 sample points."""
    img = _as_channels(image)
    h, w = img.shape[:2]
    inv = invert_matrix(np.asarray(matrix, dtype=np.float64))
    xs = (np.arange(w) + 0.5) / w
    ys = (np.arange(h) + 0.5) / h
    gx, gy = np.meshgrid(xs, ys)
    qx = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    qy = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    qx, qy = qx.ravel(), qy.ravel()
    out = np.empty_like(img)
    for c in range(img.shape[-1]):
        coef, kx, ky = _series_coefficients(img[..., c].astype(np.float64))
        vals = np.empty(qx.shape[0], dtype=np.complex128)
        for start in range(0, qx.shape[0], chunk):
            sl = slice(start, start + chunk)
            phases = np.exp(2j * np.pi * (np.outer(qx[sl], kx) + np.outer(qy[sl], ky)))
            vals[sl] = phases @ coef
        out[..., c] = np.real(vals).reshape(h, w)
    return out if image.ndim == 3 else out[..., 0]


def integer_pixel_shift(matrix: np.ndarray, width: int, height: int) -> tuple[int, int] | None:
    """(px_cols, px_rows) when the matrix is an exact integer-pixel shift."""
    if not np.array_equal(matrix[:2, :2], np.eye(2)) or not np.array_equal(
        matrix[2], [0.0, 0.0, 1.0]
    ):
        return None
    px_c = matrix[0, 2] * width
    px_r = matrix[1, 2] * height
    if px_c != round(px_c) or px_r != round(px_r):
        return None
    return int(round(px_c)), int(round(px_r))


def warp(image: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Dispatch to the cheapest exact warp for the given rigid matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    h, w = image.shape[:2]
    shift = integer_pixel_shift(matrix, w, h)
    if shift is not None:
        return integer_shift(image, *shift)
    if np.array_equal(matrix[:2, :2], np.eye(2)):
        return translate_fourier(image, matrix[0, 2], matrix[1, 2])
    return warp_rigid(image, matrix)
