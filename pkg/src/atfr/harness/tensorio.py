"""SGT1 tensor files.

Layout: the magic bytes ``SGT1``, a little-endian u32 rank, ``rank``
little-endian u32 dimensions, then the payload as little-endian float32 in
row-major order.  No padding anywhere.  Values are widened to float64 on
read.
"""

import struct
from pathlib import Path

import numpy as np

from ..core import NonFiniteError, SgsError

MAGIC = b"SGT1"


class TensorFormatError(SgsError, OSError):
    """A tensor file is truncated or not in SGT1 format."""


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("refusing to store non-finite values")
    header = MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_tensor(data: bytes, name="<bytes>") -> np.ndarray:
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError(f"{name}: not an SGT1 tensor file")
    (rank,) = struct.unpack_from("<I", data, 4)
    head = 8 + 4 * rank
    if len(data) < head:
        raise TensorFormatError(f"{name}: truncated header (rank {rank})")
    shape = struct.unpack_from(f"<{rank}I", data, 8)
    count = int(np.prod(shape, dtype=np.int64))
    if len(data) != head + 4 * count:
        raise TensorFormatError(f"{name}: payload has {len(data) - head} bytes, expected {4 * count}")
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=head).astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError(f"{name}: tensor contains non-finite values")
    return arr


def write_tensor(path, arr):
    Path(path).write_bytes(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    return decode_tensor(path.read_bytes(), str(path))
