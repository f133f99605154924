"""
Tests for the binary checkpoint format
"""
import struct

import numpy as np
import pytest

from checkpoint_store import (MAGIC, decode_checkpoint, encode_checkpoint,
                              load_checkpoint, save_checkpoint)
from errors import CheckpointFormatError
from models import InitSpec
from network_factory import new_model


def test_checkpoint_layout():
    state = new_model(3, 2, 2, seed=5)
    data = encode_checkpoint(state)
    assert data[:8] == MAGIC
    assert struct.unpack("<III", data[8:20]) == (3, 2, 2)
    np.testing.assert_array_equal(np.frombuffer(data[20:20 + 48], dtype="<f8").reshape(2, 3), state.W1)
    # W1, W2, Q, R flag, z_bar flag + z_bar
    assert len(data) == 20 + 8 * (6 + 4 + 4) + 1 + 1 + 8 * 2


def test_save_and_load_preserve_every_matrix(tmp_path):
    state = new_model(4, 3, 2, InitSpec(decoupled=True), seed=9)
    path = tmp_path / "model.bmvr"
    save_checkpoint(state, path)
    loaded = load_checkpoint(path)
    for name in ("W1", "W2", "Q", "R", "z_bar"):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(state, name))


def test_optional_matrices_absent():
    state = new_model(2, 2, 1, seed=0).model_copy(update={"z_bar": None})
    loaded = decode_checkpoint(encode_checkpoint(state))
    assert loaded.R is None
    assert loaded.z_bar is None


def test_bad_magic_rejected():
    data = bytearray(encode_checkpoint(new_model(2, 2, 1)))
    data[:8] = b"NOTBMVR!"
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(bytes(data))


def test_truncated_checkpoint_rejected():
    data = encode_checkpoint(new_model(2, 2, 1))
    with pytest.raises(CheckpointFormatError, match="truncated"):
        decode_checkpoint(data[:30])
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(data[:5])


def test_trailing_bytes_rejected():
    data = encode_checkpoint(new_model(2, 2, 1))
    with pytest.raises(CheckpointFormatError, match="trailing"):
        decode_checkpoint(data + b"\x00")
