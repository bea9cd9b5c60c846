"""Contrast-limited adaptive histogram equalization over feature maps.

Each channel is divided into a grid of tiles; every tile gets an
equalization lookup built from its clipped histogram, and each output cell
blends the lookups of its surrounding tile centers: corner regions use a
single tile, border regions interpolate two centers linearly, interior
cells blend four centers bilinearly.  Clipping caps histogram peaks (the
zero padding of short maps produces exactly such peaks) and redistributes
the excess uniformly, so flat regions stop amplifying noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensorio import FeatureMap


class EnhanceError(ValueError):
    pass


class ValueOutOfRangeError(EnhanceError):
    pass


class MapSmallerThanGridError(EnhanceError):
    pass


@dataclass(frozen=True)
class ClaheParams:
    grid_a: int = 8  # tiles along the width
    grid_b: int = 8  # tiles along the height
    clip_limit: float = 4.0
    levels: int = 256
    out_w: int = 512
    out_h: int = 128

    def __post_init__(self):
        if self.grid_a < 1 or self.grid_b < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.clip_limit < 1:
            raise ValueError("clip_limit must be >= 1")
        if self.levels != 256:
            raise ValueError("feature maps are 8-bit; levels must be 256")
        if self.out_w < 8 or self.out_h < 8:
            raise ValueError("output dimensions must be >= 8")


@dataclass(frozen=True)
class TileTransform:
    index: tuple[int, int]
    mapping: np.ndarray  # (levels,) int64, non-decreasing
    cdf_min: int
    cdf_max: int


def round_half_up(x):
    """round() with halves away from zero; the quantization rule used
    throughout (banker's rounding would bias histogram arithmetic)."""
    return np.floor(x + 0.5)


def tile_histogram(values: np.ndarray, levels: int) -> np.ndarray:
    """Cumulative histogram of a tile: cdf[i] counts values <= i."""
    flat = np.asarray(values).ravel()
    if flat.size and (flat.min() < 0 or flat.max() >= levels):
        raise ValueOutOfRangeError(f"values outside [0, {levels})")
    counts = np.bincount(flat, minlength=levels)[:levels]
    return np.cumsum(counts, dtype=np.int64)


def clip_histogram(
    histogram: np.ndarray, clip_limit: float, tile_area: int, levels: int
) -> np.ndarray:
    """Cap bins at ``clip_limit`` times the uniform height and spread the
    excess evenly, preserving the total count exactly.

    Redistribution runs at most 3 passes; whatever excess survives is
    handed back to the capped bins round-robin, so the sum never drifts.
    """
    ceiling = max(1, int(round_half_up(clip_limit * tile_area / levels)))
    h = np.asarray(histogram, dtype=np.int64).copy()
    excess = int(np.maximum(h - ceiling, 0).sum())
    np.minimum(h, ceiling, out=h)
    for _ in range(3):
        if excess == 0:
            break
        per_bin, remainder = divmod(excess, levels)
        h += per_bin
        h[:remainder] += 1
        excess = int(np.maximum(h - ceiling, 0).sum())
        np.minimum(h, ceiling, out=h)
    if excess > 0:
        at_ceiling = np.flatnonzero(h == ceiling)
        whole, leftover = divmod(excess, at_ceiling.size)
        h[at_ceiling] += whole
        h[at_ceiling[:leftover]] += 1
    return h


def tile_transform(
    cdf: np.ndarray, levels: int, tile_area: int, index: tuple[int, int] = (0, 0)
) -> TileTransform:
    """Equalization lookup from a (clipped) cumulative histogram.

    cdf_min is the smallest non-zero cdf value; a flat cdf (cdf_max ==
    cdf_min) maps everything to 0.  Intensities whose cdf sits below
    cdf_min (possible when the lookup is applied to a neighboring tile's
    values) clamp to 0.
    """
    cdf = np.asarray(cdf, dtype=np.int64)
    cdf_max = int(cdf[-1])
    if cdf_max != tile_area:
        raise ValueError(f"cdf total {cdf_max} != tile area {tile_area}")
    nonzero = cdf[cdf > 0]
    cdf_min = int(nonzero[0]) if nonzero.size else 0
    if cdf_max == cdf_min:
        mapping = np.zeros(levels, dtype=np.int64)
    else:
        scaled = (cdf - cdf_min) / (cdf_max - cdf_min) * (levels - 1)
        mapping = np.clip(round_half_up(scaled), 0, levels - 1).astype(np.int64)
    return TileTransform(index=index, mapping=mapping, cdf_min=cdf_min, cdf_max=cdf_max)


def _tile_edges(size: int, tiles: int) -> list[tuple[int, int]]:
    # Uniform tiles; the last one absorbs the remainder.
    base = size // tiles
    edges = []
    for t in range(tiles):
        lo = t * base
        hi = (t + 1) * base if t < tiles - 1 else size
        edges.append((lo, hi))
    return edges


def _axis_blend(size: int, tiles: int, tile_size: int):
    """Per-coordinate tile pair and interpolation weights along one axis.

    Coordinates at or beyond the first/last tile center collapse to that
    single tile (weight 1), which keeps the corner and border behavior
    exact instead of approximated through near-1 floats.
    """
    centers = (np.arange(tiles) + 0.5) * tile_size
    coords = np.arange(size, dtype=np.float64)
    i0 = np.zeros(size, dtype=np.int64)
    i1 = np.zeros(size, dtype=np.int64)
    w0 = np.ones(size, dtype=np.float64)
    w1 = np.zeros(size, dtype=np.float64)
    if tiles == 1:
        return i0, i1, w0, w1
    interior = (coords > centers[0]) & (coords < centers[-1])
    lo = np.clip(np.searchsorted(centers, coords[interior], side="right") - 1, 0, tiles - 2)
    x0 = centers[lo]
    x1 = centers[lo + 1]
    i0[interior] = lo
    i1[interior] = lo + 1
    w0[interior] = (x1 - coords[interior]) / (x1 - x0)
    w1[interior] = (coords[interior] - x0) / (x1 - x0)
    high = coords >= centers[-1]
    i0[high] = tiles - 1
    i1[high] = tiles - 1
    return i0, i1, w0, w1


def _enhance_channel(img: np.ndarray, params: ClaheParams) -> np.ndarray:
    h, w = img.shape
    levels = params.levels
    row_edges = _tile_edges(h, params.grid_b)
    col_edges = _tile_edges(w, params.grid_a)

    mappings = np.zeros((params.grid_b, params.grid_a, levels), dtype=np.int64)
    for r, (y0, y1) in enumerate(row_edges):
        for c, (x0, x1) in enumerate(col_edges):
            tile = img[y0:y1, x0:x1]
            area = tile.size
            counts = np.bincount(tile.ravel(), minlength=levels)[:levels]
            clipped = clip_histogram(counts, params.clip_limit, area, levels)
            cdf = np.cumsum(clipped, dtype=np.int64)
            mappings[r, c] = tile_transform(cdf, levels, area, index=(r, c)).mapping

    r0, r1, wy0, wy1 = _axis_blend(h, params.grid_b, h // params.grid_b)
    c0, c1, wx0, wx1 = _axis_blend(w, params.grid_a, w // params.grid_a)

    q00 = mappings[r0[:, None], c0[None, :], img]
    q01 = mappings[r0[:, None], c1[None, :], img]
    q10 = mappings[r1[:, None], c0[None, :], img]
    q11 = mappings[r1[:, None], c1[None, :], img]
    top = wx0[None, :] * q00 + wx1[None, :] * q01
    bottom = wx0[None, :] * q10 + wx1[None, :] * q11
    blended = wy0[:, None] * top + wy1[:, None] * bottom
    return np.clip(round_half_up(blended), 0, levels - 1).astype(np.uint8)


def enhance(fmap: FeatureMap, params: ClaheParams = ClaheParams()) -> FeatureMap:
    """CLAHE over every channel independently; dimensions are preserved."""
    if fmap.width < params.grid_a or fmap.height < params.grid_b:
        raise MapSmallerThanGridError(
            f"map {fmap.width}x{fmap.height} smaller than grid "
            f"{params.grid_a}x{params.grid_b}"
        )
    out = np.empty_like(fmap.data)
    for ch in range(fmap.channels):
        out[:, :, ch] = _enhance_channel(fmap.data[:, :, ch], params)
    return FeatureMap(out)


def resize(fmap: FeatureMap, out_w: int, out_h: int) -> FeatureMap:
    """Bilinear resample to exactly (out_w, out_h); a no-op (bit-exact)
    when the map already has that size."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    if fmap.width == out_w and fmap.height == out_h:
        return FeatureMap(fmap.data.copy())
    h, w = fmap.height, fmap.width
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :, None]
    fy = (sy - y0)[:, None, None]
    data = fmap.data.astype(np.float64)
    top = (1.0 - fx) * data[y0[:, None], x0[None, :]] + fx * data[y0[:, None], x1[None, :]]
    bottom = (1.0 - fx) * data[y1[:, None], x0[None, :]] + fx * data[y1[:, None], x1[None, :]]
    blended = (1.0 - fy) * top + fy * bottom
    out = np.clip(round_half_up(blended), 0, 255).astype(np.uint8)
    return FeatureMap(out)
