"""Binary feature dump format."""
import struct

import numpy as np
import pytest

from afdcd import featio
from afdcd.errors import FormatError, ShapeError


def test_roundtrip_exact(tmp_path, rng):
    f = rng.uniform(-3, 3, (5, 7, 3))
    path = tmp_path / "f.bin"
    featio.write_features(path, f)
    back = featio.read_features(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, f)


def test_header_layout(tmp_path, rng):
    f = rng.uniform(size=(2, 3, 4))
    path = tmp_path / "f.bin"
    featio.write_features(path, f)
    blob = path.read_bytes()
    magic, version, h, w = struct.unpack_from("<4sIII", blob, 0)
    (c,) = struct.unpack_from("<I", blob, 16)
    assert magic == b"AFDC" and version == 1
    assert (h, w, c) == (2, 3, 4)
    assert len(blob) == 20 + 2 * 3 * 4 * 8


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(FormatError):
        featio.read_features(path)


def test_read_rejects_bad_version(tmp_path, rng):
    path = tmp_path / "v9.bin"
    featio.write_features(path, rng.uniform(size=(2, 2, 1)))
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, 4, 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        featio.read_features(path)


def test_read_rejects_truncation(tmp_path, rng):
    path = tmp_path / "cut.bin"
    featio.write_features(path, rng.uniform(size=(3, 3, 2)))
    blob = path.read_bytes()
    for cut in (3, 12, 18, len(blob) - 8):
        path.write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            featio.read_features(path)


def test_write_rejects_bad_rank(tmp_path, rng):
    with pytest.raises(ShapeError):
        featio.write_features(tmp_path / "x.bin", rng.uniform(size=(4, 4)))
