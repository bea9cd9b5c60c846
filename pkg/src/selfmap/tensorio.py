"""Feature-map container and serialization.

Tensor files carry a 16-byte header (magic ``SAMP`` + width, height,
channels as 32-bit little-endian) followed by row-major,
channel-interleaved uint8 data.  PNG export is a convenience for visual
inspection: a single RGB composite when the map has 3 channels, otherwise
one grayscale image per channel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SAMP"
HEADER = struct.Struct("<4sIII")


class TensorFormatError(ValueError):
    pass


@dataclass(eq=False)
class FeatureMap:
    data: np.ndarray  # (height, width, channels) uint8

    def __post_init__(self):
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        if self.data.ndim != 3:
            raise ValueError(f"expected HxWxC data, got shape {self.data.shape}")
        if self.data.dtype != np.uint8:
            raise ValueError(f"expected uint8 data, got {self.data.dtype}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def channel(self, c: int) -> np.ndarray:
        return self.data[:, :, c]

    def nbytes(self) -> int:
        return int(self.data.size)


def save_tensor(fmap: FeatureMap, path: str | Path) -> Path:
    path = Path(path)
    header = HEADER.pack(MAGIC, fmap.width, fmap.height, fmap.channels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fmap.data).tobytes())
    return path


def load_tensor(path: str | Path) -> FeatureMap:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise TensorFormatError(f"{path}: shorter than the 16-byte header")
    magic, width, height, channels = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r}")
    expected = width * height * channels
    body = raw[HEADER.size :]
    if len(body) != expected:
        raise TensorFormatError(
            f"{path}: header promises {expected} data bytes, file has {len(body)}"
        )
    data = np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)
    return FeatureMap(data.copy())


def save_png(fmap: FeatureMap, path: str | Path) -> list[Path]:
    from PIL import Image

    path = Path(path)
    if fmap.channels == 3:
        Image.fromarray(fmap.data, mode="RGB").save(path)
        return [path]
    if fmap.channels == 1:
        Image.fromarray(fmap.data[:, :, 0], mode="L").save(path)
        return [path]
    written = []
    for c in range(fmap.channels):
        target = path.with_name(f"{path.stem}_c{c}{path.suffix}")
        Image.fromarray(fmap.data[:, :, c], mode="L").save(target)
        written.append(target)
    return written
