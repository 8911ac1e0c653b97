import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as nph

from sg3edit import pngio


@pytest.mark.parametrize("dtype", [np.uint8, np.uint16])
def test_rgb_roundtrip(tmp_path, dtype):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, np.iinfo(dtype).max, size=(9, 7, 3)).astype(dtype)
    path = tmp_path / "t.png"
    pngio.write_png(path, arr)
    out = pngio.read_png(path)
    assert out.dtype == dtype
    assert np.array_equal(out, arr)


def test_grayscale_roundtrip(tmp_path):
    arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
    pngio.write_png(tmp_path / "g.png", arr)
    assert np.array_equal(pngio.read_png(tmp_path / "g.png"), arr)


def test_deterministic_bytes():
    arr = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
    assert pngio.encode_png(arr) == pngio.encode_png(arr.copy())


@settings(max_examples=25, deadline=None)
@given(
    nph.arrays(np.uint16, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3)),
               elements=st.integers(0, 65535))
)
def test_roundtrip_property(arr):
    assert np.array_equal(pngio.decode_png(pngio.encode_png(arr)), arr)


def test_float_quantization_error_bound():
    rng = np.random.default_rng(1)
    img = rng.uniform(-1, 1, size=(16, 16, 3))
    back = pngio.uint16_to_float(pngio.float_to_uint16(img))
    assert np.abs(back - img).max() <= 1.0 / 65535.0 + 1e-12
    back8 = pngio.uint8_to_float(pngio.float_to_uint8(img))
    assert np.abs(back8 - img).max() <= 1.0 / 255.0 + 1e-12


def test_all_filter_types_decode(tmp_path):
    """Filtered scanlines (types 1-4) from foreign encoders must decode."""
    import struct
    import zlib

    rng = np.random.default_rng(2)
    arr = rng.integers(0, 255, size=(5, 6, 3)).astype(np.uint8)
    stride, bpp = 18, 3

    def paeth(a, b, c):
        p = a + b - c
        pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
        return a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)

    raw = bytearray()
    prev = np.zeros(stride, dtype=np.int32)
    for row, ftype in zip(arr.reshape(5, stride).astype(np.int32), [0, 1, 2, 3, 4]):
        raw.append(ftype)
        for i in range(stride):
            a = row[i - bpp] if i >= bpp else 0
            b = prev[i]
            c = prev[i - bpp] if i >= bpp else 0
            pred = {0: 0, 1: a, 2: b, 3: (a + b) // 2, 4: paeth(a, b, c)}[ftype]
            raw.append(int((row[i] - pred) % 256))
        prev = row

    def chunk(tag, payload):
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    data = (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", struct.pack(">IIBBBBB", 6, 5, 8, 2, 0, 0, 0))
        + chunk(b"IDAT", zlib.compress(bytes(raw)))
        + chunk(b"IEND", b"")
    )
    assert np.array_equal(pngio.decode_png(data), arr)


def test_load_frame_npy(tmp_path):
    img = np.random.default_rng(3).uniform(-1, 1, size=(4, 4, 3))
    np.save(tmp_path / "frame_000000.npy", img)
    assert np.array_equal(pngio.load_frame(tmp_path / "frame_000000.npy"), img)


def test_rejects_bad_signature():
    with pytest.raises(ValueError):
        pngio.decode_png(b"JPEGnope")
