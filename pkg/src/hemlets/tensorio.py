"""Flat binary tensor files.

Layout (all integers little-endian):

    offset 0   magic  b"HMLT"
    offset 4   uint32 version (currently 1)
    offset 8   uint32 ndim
    offset 12  uint64 * ndim  dimensions
    then       float32 data, row-major (C order)

The format is deliberately dumb so other languages can read and write it with
a few lines of buffer code. Values are stored as 32-bit floats; readers get
exactly the bytes writers produced, so round trips are bit-stable.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"HMLT"
VERSION = 1


def write_tensor(path, array):
    arr = np.asarray(array)
    if arr.ndim == 0:
        raise ValidationError("tensor files need at least one dimension")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("refusing to write non-finite tensor values")
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(data.tobytes(order="C"))


def read_tensor(path):
    """Read a tensor file; returns a float32 ndarray."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise FormatError("tensor file truncated before header")
    if blob[:4] != MAGIC:
        raise FormatError("bad tensor magic")
    version, ndim = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported tensor version {version}")
    if ndim == 0 or ndim > 8:
        raise FormatError(f"implausible tensor rank {ndim}")
    header_end = 12 + 8 * ndim
    if len(blob) < header_end:
        raise FormatError("tensor file truncated inside dimensions")
    dims = struct.unpack_from(f"<{ndim}Q", blob, 12)
    count = 1
    for d in dims:
        count *= d
    expected = header_end + 4 * count
    if len(blob) != expected:
        raise FormatError(
            f"tensor payload is {len(blob) - header_end} bytes, expected {4 * count}"
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=header_end, count=count)
    return flat.reshape(dims).copy()
