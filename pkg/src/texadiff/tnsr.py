"""TNSR binary tensor container.

Layout of a single record:

    magic   4 bytes  b"TNSR"
    version u16 LE   (currently 1)
    ndims   u16 LE
    dims    ndims * u32 LE
    payload prod(dims) * f32 LE, row-major

A checkpoint file is a sequence of records written back to back, followed
by a trailing name manifest:

    count   u32 LE
    entries count * (offset u64 LE, name_len u16 LE, name UTF-8 bytes)

where each offset points at the start of the corresponding record. Plain
tensor files carry no manifest.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TNSR"
VERSION = 1
MAX_NDIMS = 8


class TnsrError(ValueError):
    """Raised on malformed TNSR data."""


def _pack_record(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > MAX_NDIMS:
        raise TnsrError(f"too many dimensions: {arr.ndim}")
    header = MAGIC + struct.pack("<HH", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def _unpack_record(buf: bytes, off: int) -> tuple[np.ndarray, int]:
    if buf[off : off + 4] != MAGIC:
        raise TnsrError("bad magic")
    version, ndims = struct.unpack_from("<HH", buf, off + 4)
    if version != VERSION:
        raise TnsrError(f"unsupported version {version}")
    if ndims == 0 or ndims > MAX_NDIMS:
        raise TnsrError(f"bad ndims {ndims}")
    dims = struct.unpack_from(f"<{ndims}I", buf, off + 8)
    start = off + 8 + 4 * ndims
    count = int(np.prod(dims))
    end = start + 4 * count
    if end > len(buf):
        raise TnsrError("truncated payload")
    arr = np.frombuffer(buf[start:end], dtype="<f4").reshape(dims)
    return arr.copy(), end


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_pack_record(arr))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    arr, end = _unpack_record(buf, 0)
    if end != len(buf):
        raise TnsrError("trailing bytes after single-tensor payload")
    return arr


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors plus a trailing manifest, in insertion order."""
    records = []
    offsets = []
    pos = 0
    for name, arr in tensors.items():
        rec = _pack_record(arr)
        offsets.append(pos)
        records.append(rec)
        pos += len(rec)
    manifest = struct.pack("<I", len(records))
    for (name, _), off in zip(tensors.items(), offsets):
        raw = name.encode("utf-8")
        manifest += struct.pack("<QH", off, len(raw)) + raw
    with open(path, "wb") as fh:
        fh.write(b"".join(records) + manifest)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        buf = fh.read()
    arrays = []
    starts = []
    off = 0
    while off + 4 <= len(buf) and buf[off : off + 4] == MAGIC:
        starts.append(off)
        arr, off = _unpack_record(buf, off)
        arrays.append(arr)
    count = struct.unpack_from("<I", buf, off)[0]
    off += 4
    if count != len(arrays):
        raise TnsrError(f"manifest lists {count} tensors, found {len(arrays)}")
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        rec_off, name_len = struct.unpack_from("<QH", buf, off)
        off += 10
        name = buf[off : off + name_len].decode("utf-8")
        off += name_len
        if rec_off != starts[i]:
            raise TnsrError(f"manifest offset mismatch for {name!r}")
        out[name] = arrays[i]
    if off != len(buf):
        raise TnsrError("trailing bytes after manifest")
    return out
