"""Reader for feature tensor files.

The file contract: 16-byte header (magic ``SAMP``, then width, height,
channels as uint32 little-endian) followed by row-major,
channel-interleaved uint8 data.  This package never imports the producer;
the byte layout is the whole interface.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SAMP"
HEADER = struct.Struct("<4sIII")


class TensorError(ValueError):
    pass


class MissingTensor(TensorError):
    def __init__(self, path):
        super().__init__(f"tensor file missing: {path}")
        self.path = Path(path)


class HeaderMismatch(TensorError):
    pass


def read_tensor(path: str | Path, expected_shape: tuple[int, int, int] | None = None) -> np.ndarray:
    """Load one tensor as an (h, w, c) uint8 array.

    ``expected_shape`` is (width, height, channels); a header that
    disagrees raises :class:`HeaderMismatch` naming both shapes.
    """
    path = Path(path)
    if not path.exists():
        raise MissingTensor(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise HeaderMismatch(f"{path}: shorter than the 16-byte header")
    magic, width, height, channels = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HeaderMismatch(f"{path}: bad magic {magic!r}")
    if expected_shape is not None and (width, height, channels) != tuple(expected_shape):
        raise HeaderMismatch(
            f"{path}: header {width}x{height}x{channels} != expected "
            f"{expected_shape[0]}x{expected_shape[1]}x{expected_shape[2]}"
        )
    body = raw[HEADER.size :]
    if len(body) != width * height * channels:
        raise HeaderMismatch(
            f"{path}: header promises {width * height * channels} bytes, file has {len(body)}"
        )
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels).copy()
