import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as nph

from sg3edit.container import (
    MANIFEST_KEY,
    read_checkpoint,
    read_container,
    write_checkpoint,
    write_container,
)
from sg3edit.errors import ContainerFormatError

ALL_DTYPES = [
    "bool",
    "int8",
    "int16",
    "int32",
    "int64",
    "uint8",
    "uint16",
    "uint32",
    "uint64",
    "float16",
    "float32",
    "float64",
    "complex64",
    "complex128",
]


@pytest.mark.parametrize("dtype", ALL_DTYPES)
def test_roundtrip_bit_exact_per_dtype(tmp_path, dtype):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 255, size=(3, 4, 5)).astype("uint8")
    arr = raw.view("bool")[..., 0] if dtype == "bool" else raw.astype(dtype)
    if dtype.startswith("complex"):
        arr = arr + 1j * raw.astype(dtype)
    path = tmp_path / "t.sg3t"
    write_container(path, {"x": arr})
    out = read_container(path)["x"]
    assert out.dtype == np.dtype(dtype)
    assert np.array_equal(out.view("uint8"), arr.view("uint8"))


@settings(max_examples=40, deadline=None)
@given(
    arr=nph.arrays(
        dtype=np.float64,
        shape=nph.array_shapes(max_dims=4, max_side=6),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    )
)
def test_roundtrip_property(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("c") / "t.sg3t"
    write_container(path, {"a": arr, "b": np.arange(3)})
    out = read_container(path)
    assert out["a"].shape == arr.shape
    assert np.array_equal(out["a"].view("uint8"), np.ascontiguousarray(arr).view("uint8"))


def test_multiple_entries_and_order(tmp_path):
    path = tmp_path / "t.sg3t"
    tensors = {f"k{i}": np.full((i + 1,), i, dtype=np.float32) for i in range(5)}
    write_container(path, tensors)
    out = read_container(path)
    assert list(out) == list(tensors)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.sg3t"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ContainerFormatError):
        read_container(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.sg3t"
    write_container(path, {"x": np.arange(10, dtype=np.float64)})
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ContainerFormatError):
        read_container(path)


def test_declared_length_mismatch(tmp_path):
    path = tmp_path / "t.sg3t"
    write_container(path, {"x": np.arange(4, dtype=np.uint8)})
    data = bytearray(path.read_bytes())
    # Corrupt the u64 byte length of the single entry (just before payload).
    data[-12:-4] = (99).to_bytes(8, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(ContainerFormatError):
        read_container(path)


def test_checkpoint_manifest_roundtrip(tmp_path):
    path = tmp_path / "ckpt.sg3t"
    manifest = {"kind": "generator", "config": {"resolution": 64}}
    write_checkpoint(path, {"w": np.eye(3)}, manifest)
    tensors, out = read_checkpoint(path)
    assert out == manifest
    assert MANIFEST_KEY not in tensors
    assert np.array_equal(tensors["w"], np.eye(3))


def test_checkpoint_requires_manifest(tmp_path):
    path = tmp_path / "t.sg3t"
    write_container(path, {"x": np.arange(3)})
    with pytest.raises(ContainerFormatError):
        read_checkpoint(path)


def test_big_endian_input_normalized(tmp_path):
    arr = np.arange(6, dtype=">f8").reshape(2, 3)
    path = tmp_path / "t.sg3t"
    write_container(path, {"x": arr})
    out = read_container(path)["x"]
    assert np.array_equal(out, arr.astype("<f8"))
