"""Binary latent dump.

Layout, little-endian::

    offset  size  field
    0       4     magic b"LPZ1"
    4       2     format version (1)
    6       2     dtype code: bytes per element (2 = float16, 4 = float32, 8 = float64)
    8       16    shape C, T, H, W as uint32
    24      8     reserved, zero
    32      ...   row-major payload, channel outermost
"""

from __future__ import annotations

import struct

import numpy as np

from .latent import check_latent, dtype_for

MAGIC = b"LPZ1"
VERSION = 1
HEADER = struct.Struct("<4sHH4I8x")
assert HEADER.size == 32


def dump_latent(z: np.ndarray) -> bytes:
    check_latent(z)
    header = HEADER.pack(MAGIC, VERSION, z.dtype.itemsize, *z.shape)
    return header + np.ascontiguousarray(z, dtype=z.dtype.newbyteorder("<")).tobytes()


def load_latent(blob: bytes) -> np.ndarray:
    if len(blob) < HEADER.size:
        raise ValueError("truncated latent header")
    magic, version, code, *shape = HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"not an lpsim latent dump (magic={magic!r}, version={version})")
    dtype = dtype_for(code).newbyteorder("<")
    expected = int(np.prod(shape)) * code
    payload = blob[HEADER.size :]
    if len(payload) != expected:
        raise ValueError(f"payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype_for(code))


def write_latent(path, z: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_latent(z))


def read_latent(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return load_latent(fh.read())
