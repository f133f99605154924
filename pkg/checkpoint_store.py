"""
Flat binary checkpoints for ModelState.

Layout (all little-endian):
    [offset] [type]        [description]
    0        8 bytes       magic "BMVR0001"
    8        u32 x 3       m, n, k
    20       f64[k*m]      W1, row-major
             f64[n*k]      W2, row-major
             f64[k*k]      Q, row-major
             u8            1 if R follows
             f64[k*k]      R (optional)
             u8            1 if z_bar follows
             f64[k]        z_bar (optional)
"""
import io
import os
import struct
from typing import Union

import numpy as np

from errors import CheckpointFormatError
from models import ModelState

MAGIC = b"BMVR0001"
_HEADER = struct.Struct("<8sIII")
_F64 = np.dtype("<f8")


def encode_checkpoint(state: ModelState) -> bytes:
    buffer = io.BytesIO()
    buffer.write(_HEADER.pack(MAGIC, state.m, state.n, state.k))
    for matrix in (state.W1, state.W2, state.Q):
        buffer.write(np.ascontiguousarray(matrix, dtype=_F64).tobytes(order="C"))
    for optional in (state.R, state.z_bar):
        if optional is None:
            buffer.write(b"\x00")
        else:
            buffer.write(b"\x01")
            buffer.write(np.ascontiguousarray(optional, dtype=_F64).tobytes(order="C"))
    return buffer.getvalue()


def decode_checkpoint(data: bytes) -> ModelState:
    if len(data) < _HEADER.size:
        raise CheckpointFormatError(f"checkpoint truncated: {len(data)} bytes, header needs {_HEADER.size}")
    magic, m, n, k = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")

    offset = _HEADER.size

    def read_array(count: int, shape):
        nonlocal offset
        end = offset + count * _F64.itemsize
        if end > len(data):
            raise CheckpointFormatError(f"checkpoint truncated at byte offset {offset}")
        array = np.frombuffer(data, dtype=_F64, count=count, offset=offset).reshape(shape)
        offset = end
        return array.astype(np.float64)

    def read_flag() -> bool:
        nonlocal offset
        if offset >= len(data):
            raise CheckpointFormatError(f"checkpoint truncated at byte offset {offset}")
        flag = data[offset]
        offset += 1
        if flag not in (0, 1):
            raise CheckpointFormatError(f"invalid presence flag {flag} at byte offset {offset - 1}")
        return flag == 1

    W1 = read_array(k * m, (k, m))
    W2 = read_array(n * k, (n, k))
    Q = read_array(k * k, (k, k))
    R = read_array(k * k, (k, k)) if read_flag() else None
    z_bar = read_array(k, (k,)) if read_flag() else None

    if offset != len(data):
        raise CheckpointFormatError(f"{len(data) - offset} trailing bytes after checkpoint")
    return ModelState(W1=W1, W2=W2, Q=Q, R=R, z_bar=z_bar)


def save_checkpoint(state: ModelState, path: Union[str, os.PathLike]):
    with open(path, "wb") as f:
        f.write(encode_checkpoint(state))


def load_checkpoint(path: Union[str, os.PathLike]) -> ModelState:
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())
