"""Binary feature-map dumps.

Layout (little-endian): 16-byte header of magic "AFDC" + version u32 +
H u32 + W u32, then C u32, then H*W*C float64 payload in row-major order.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"AFDC"
VERSION = 1


def write_features(path: str, f: np.ndarray) -> None:
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ShapeError(f"feature map must have shape (H, W, C), got {f.shape}")
    h, w, c = f.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, h, w))
        fh.write(struct.pack("<I", c))
        fh.write(f.astype("<f8").tobytes())


def read_features(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            header = fh.read(16)
            if len(header) != 16:
                raise FormatError(f"{path}: truncated header")
            magic, version, h, w = struct.unpack("<4sIII", header)
            if magic != MAGIC:
                raise FormatError(f"{path}: bad magic {magic!r}")
            if version != VERSION:
                raise FormatError(f"{path}: unsupported version {version}")
            cbytes = fh.read(4)
            if len(cbytes) != 4:
                raise FormatError(f"{path}: truncated channel count")
            (c,) = struct.unpack("<I", cbytes)
            payload = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read features {path}: {exc}") from exc
    expected = h * w * c * 8
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(h, w, c).copy()
