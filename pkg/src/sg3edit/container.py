"""Binary container for named tensors.

Layout (all integers little-endian):

    magic "SG3T" | version u32 | entry_count u32
    per entry: name_len u16 | name utf-8 | dtype_tag u8 | ndim u8
               | dims u32[ndim] | byte_len u64 | raw data (little-endian)

Entry names are unique; declared byte lengths must match the payload.
Checkpoints additionally carry a JSON manifest under the reserved entry
name ``__manifest__`` (uint8 bytes).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from sg3edit.errors import ContainerFormatError

MAGIC = b"SG3T"
VERSION = 1
MANIFEST_KEY = "__manifest__"

_DTYPE_TAGS: dict[str, int] = {
    "bool": 0,
    "int8": 1,
    "int16": 2,
    "int32": 3,
    "int64": 4,
    "uint8": 5,
    "uint16": 6,
    "uint32": 7,
    "uint64": 8,
    "float16": 9,
    "float32": 10,
    "float64": 11,
    "complex64": 12,
    "complex128": 13,
}
_TAG_DTYPES = {tag: np.dtype(name) for name, tag in _DTYPE_TAGS.items()}


def write_container(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    names = list(tensors)
    if len(set(names)) != len(names):
        raise ContainerFormatError("duplicate tensor names")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", VERSION, len(tensors))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        key = arr.dtype.name
        if key not in _DTYPE_TAGS:
            raise ContainerFormatError(f"unsupported dtype {arr.dtype} for entry {name!r}")
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        encoded = name.encode("utf-8")
        buf += struct.pack("<H", len(encoded))
        buf += encoded
        buf += struct.pack("<BB", _DTYPE_TAGS[key], arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += struct.pack("<Q", len(raw))
        buf += raw
    Path(path).write_bytes(bytes(buf))


def read_container(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ContainerFormatError(f"bad magic in {path}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        tag, ndim = struct.unpack_from("<BB", data, offset)
        offset += 2
        if tag not in _TAG_DTYPES:
            raise ContainerFormatError(f"unknown dtype tag {tag} for entry {name!r}")
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        (byte_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        dtype = _TAG_DTYPES[tag]
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if byte_len != expected:
            raise ContainerFormatError(
                f"entry {name!r}: declared {byte_len} bytes, shape implies {expected}"
            )
        if offset + byte_len > len(data):
            raise ContainerFormatError(f"entry {name!r}: payload truncated")
        if name in tensors:
            raise ContainerFormatError(f"duplicate entry name {name!r}")
        arr = np.frombuffer(data[offset : offset + byte_len], dtype=dtype).reshape(shape)
        offset += byte_len
        tensors[name] = arr.copy()
    if offset != len(data):
        raise ContainerFormatError("trailing bytes after final entry")
    return tensors


def write_checkpoint(path: str | Path, tensors: dict[str, np.ndarray], manifest: dict) -> None:
    payload = dict(tensors)
    payload[MANIFEST_KEY] = np.frombuffer(
        json.dumps(manifest, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    write_container(path, payload)


def read_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    tensors = read_container(path)
    raw = tensors.pop(MANIFEST_KEY, None)
    if raw is None:
        raise ContainerFormatError(f"{path} has no {MANIFEST_KEY} entry")
    manifest = json.loads(raw.tobytes().decode("utf-8"))
    return tensors, manifest
