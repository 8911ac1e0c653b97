"""Minimal deterministic PNG codec (8/16-bit RGB and grayscale).

Written output uses filter type 0 and a fixed zlib level, so identical
arrays produce identical bytes. 16-bit depth keeps quantization at ~1.5e-5,
well inside the pipeline tolerances; 8-bit is for ordinary previews.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def write_png(path: str | Path, array: np.ndarray) -> None:
    data = encode_png(array)
    Path(path).write_bytes(data)


def encode_png(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.dtype not in (np.uint8, np.uint16):
        raise ValueError("write_png expects uint8 or uint16 arrays")
    if arr.ndim == 2:
        color_type = 0
    elif arr.ndim == 3 and arr.shape[2] == 3:
        color_type = 2
    else:
        raise ValueError(f"unsupported array shape {arr.shape}")
    depth = 8 if arr.dtype == np.uint8 else 16
    h, w = arr.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, depth, color_type, 0, 0, 0)
    big = arr.astype(">u2") if depth == 16 else arr
    rows = big.reshape(h, -1).tobytes()
    stride = w * (3 if color_type == 2 else 1) * (depth // 8)
    raw = b"".join(b"\x00" + rows[i * stride : (i + 1) * stride] for i in range(h))
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, 6))
        + _chunk(b"IEND", b"")
    )


def _unfilter(raw: np.ndarray, h: int, stride: int, bpp: int) -> np.ndarray:
    out = np.zeros((h, stride), dtype=np.uint8)
    pos = 0
    for row in range(h):
        ftype = raw[pos]
        pos += 1
        line = raw[pos : pos + stride].astype(np.int32)
        pos += stride
        prev = out[row - 1].astype(np.int32) if row else np.zeros(stride, dtype=np.int32)
        if ftype == 0:
            cur = line
        elif ftype == 2:
            cur = (line + prev) & 0xFF
        else:
            cur = np.zeros(stride, dtype=np.int32)
            for i in range(stride):
                a = cur[i - bpp] if i >= bpp else 0
                b = prev[i]
                c = prev[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    pred = a
                elif ftype == 3:
                    pred = (a + b) // 2
                else:  # Paeth
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    pred = a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)
                cur[i] = (line[i] + pred) & 0xFF
        out[row] = cur.astype(np.uint8)
    return out


def read_png(path: str | Path) -> np.ndarray:
    return decode_png(Path(path).read_bytes())


def decode_png(data: bytes) -> np.ndarray:
    if data[:8] != _SIGNATURE:
        raise ValueError("not a PNG file")
    pos = 8
    width = height = depth = color_type = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, color_type, _, _, interlace = struct.unpack(">IIBBBBB", payload)
            if interlace:
                raise ValueError("interlaced PNG not supported")
            if color_type not in (0, 2) or depth not in (8, 16):
                raise ValueError(f"unsupported PNG (color {color_type}, depth {depth})")
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    channels = 3 if color_type == 2 else 1
    bpp = channels * depth // 8
    stride = width * bpp
    raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8)
    rows = _unfilter(raw, height, stride, bpp)
    if depth == 8:
        arr = rows.reshape(height, width, channels)
    else:
        arr = rows.reshape(height, stride).view(">u2").astype(np.uint16).reshape(height, width, channels)
    return arr[..., 0] if channels == 1 else arr


def float_to_uint16(image: np.ndarray) -> np.ndarray:
    """Map [-1, 1] float imagery to 16-bit samples (clipping outliers)."""
    x = np.clip((np.asarray(image, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
    return np.round(x * 65535.0).astype(np.uint16)


def uint16_to_float(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 65535.0 * 2.0 - 1.0


def float_to_uint8(image: np.ndarray) -> np.ndarray:
    x = np.clip((np.asarray(image, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
    return np.round(x * 255.0).astype(np.uint8)


def uint8_to_float(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0 * 2.0 - 1.0


def load_frame(path: str | Path) -> np.ndarray:
    """Read a frame file (8/16-bit PNG or .npy float) to [-1, 1] float."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path).astype(np.float64)
    arr = read_png(path)
    if arr.dtype == np.uint16:
        return uint16_to_float(arr)
    return uint8_to_float(arr)
