"""Binary tensor containers.

Two magics share one layout: ``HPQT`` stores signed 32-bit integer codes,
``HPFT`` stores 64-bit IEEE floats.  Header: magic (4 bytes), version (1),
dtype (1), rank (1), then rank little-endian u32 dims and the row-major
payload.  Little-endian throughout.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC_CODES = b"HPQT"
MAGIC_FLOATS = b"HPFT"
VERSION = 1
_DTYPE_CODES = 0
_DTYPE_FLOATS = 1
_MAX_RANK = 255

_INT32_MIN = -(1 << 31)
_INT32_MAX = (1 << 31) - 1


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Write integer arrays as HPQT code files, float arrays as HPFT."""
    arr = np.asarray(array)
    if arr.ndim < 1 or arr.ndim > _MAX_RANK:
        raise ValueError(f"tensor rank {arr.ndim} is not storable")
    if np.issubdtype(arr.dtype, np.floating):
        magic, dtype_id, payload = MAGIC_FLOATS, _DTYPE_FLOATS, arr.astype("<f8")
    elif np.issubdtype(arr.dtype, np.integer):
        if arr.size and (arr.min() < _INT32_MIN or arr.max() > _INT32_MAX):
            raise ValueError("codes exceed the signed 32-bit container range")
        magic, dtype_id, payload = MAGIC_CODES, _DTYPE_CODES, arr.astype("<i4")
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    header = struct.pack("<4sBBB", magic, VERSION, dtype_id, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + dims + payload.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read either container; codes come back as int64, floats as float64."""
    blob = Path(path).read_bytes()
    if len(blob) < 7:
        raise ValueError(f"{path}: truncated tensor file")
    magic, version, dtype_id, rank = struct.unpack_from("<4sBBB", blob)
    if magic not in (MAGIC_CODES, MAGIC_FLOATS):
        raise ValueError(f"{path}: not a tensor file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected_dtype = _DTYPE_CODES if magic == MAGIC_CODES else _DTYPE_FLOATS
    if dtype_id != expected_dtype:
        raise ValueError(f"{path}: dtype {dtype_id} does not match magic {magic!r}")
    if rank < 1:
        raise ValueError(f"{path}: rank must be at least 1")
    offset = 7
    if len(blob) < offset + 4 * rank:
        raise ValueError(f"{path}: truncated dimension list")
    dims = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    count = 1
    for d in dims:
        count *= d
    elem = 4 if dtype_id == _DTYPE_CODES else 8
    if len(blob) - offset != count * elem:
        raise ValueError(
            f"{path}: payload is {len(blob) - offset} bytes, expected {count * elem}")
    if dtype_id == _DTYPE_CODES:
        arr = np.frombuffer(blob, dtype="<i4", count=count, offset=offset)
        return arr.reshape(dims).astype(np.int64)
    arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    return arr.reshape(dims).astype(np.float64)


def read_codes(path: str | Path) -> np.ndarray:
    arr = read_tensor(path)
    if arr.dtype != np.int64:
        raise ValueError(f"{path}: expected an integer code tensor (HPQT)")
    return arr


def read_floats(path: str | Path) -> np.ndarray:
    arr = read_tensor(path)
    if arr.dtype != np.float64:
        raise ValueError(f"{path}: expected a float tensor (HPFT)")
    return arr
