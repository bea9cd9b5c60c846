"""Local-similarity descriptors over basic blocks.

Every unit of ``unit_len`` bytes is compared against all windows of the
same length inside a surrounding region of ``region_len`` bytes, clipped
at block boundaries (blocks are natural semantic borders; bytes never leak
across them).  Squared byte distances become correlations through
``exp(-ssd)``, candidates fall into log-polar distance bins, and the best
correlation per bin forms the descriptor.  The global ensemble of
descriptors, min-max normalized, reshapes into a fixed-height feature map.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import engine as _engine
from .disasm import ProgramDisassembly
from .tensorio import FeatureMap


class DescriptorError(ValueError):
    pass


class LengthMismatchError(DescriptorError):
    pass


class RegionTooSmallError(DescriptorError):
    pass


class EmptyEnsembleError(DescriptorError):
    pass


@dataclass(frozen=True)
class ForgeParams:
    """Knobs for the descriptor sweep.

    ``unit_len`` is the comparison unit in bytes and ``region_len`` the
    surrounding region; the defaults (3 and 15) track the corpus-wide mean
    instruction length and mean basic-block size.  ``angular_bins`` of 1
    collapses the angular split, leaving ``radial_bins`` distance bins.
    ``block_stride`` of 2 visits every other block.  With ``byte_scale``
    on, byte differences are divided by 255 before squaring so the SSD of
    one unit stays within [0, unit_len].  ``instruction_aligned`` places
    centers on instruction starts instead of the unit-aligned sweep;
    ``include_imports`` controls whether import-thunk functions
    (``sym.imp.*``) contribute blocks.
    """

    unit_len: int = 3
    region_len: int = 15
    angular_bins: int = 1
    radial_bins: int = 3
    block_stride: int = 2
    byte_scale: bool = True
    instruction_aligned: bool = False
    include_imports: bool = True

    def __post_init__(self):
        if self.unit_len < 1:
            raise ValueError("unit_len must be >= 1")
        if self.region_len < self.unit_len + 2:
            raise ValueError("region_len must be >= unit_len + 2")
        if (self.region_len - self.unit_len) % 2 != 0:
            raise ValueError("region_len - unit_len must be even so the region centers on the unit")
        if self.angular_bins < 1 or self.radial_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if self.block_stride < 1:
            raise ValueError("block_stride must be >= 1")

    @property
    def half(self) -> int:
        return (self.region_len - self.unit_len) // 2

    @property
    def channels(self) -> int:
        return self.angular_bins * self.radial_bins


@dataclass(frozen=True)
class LocalSimilarityDescriptor:
    values: np.ndarray  # (angular_bins * radial_bins,) float64 in (0, 1], 0 for empty bins
    source: tuple[int, int]  # (block entry address, center byte offset)


@dataclass(eq=False)
class DescriptorEnsemble:
    """Descriptors in program order plus their pre-normalization extrema."""

    values: np.ndarray  # (count, channels) float64
    sources: np.ndarray  # (count, 2) int64: block entry, center offset
    min_raw: float
    max_raw: float
    skipped_blocks: int = 0
    normalized: bool = False

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def channels(self) -> int:
        return int(self.values.shape[1])

    def descriptor(self, i: int) -> LocalSimilarityDescriptor:
        return LocalSimilarityDescriptor(
            values=self.values[i].copy(),
            source=(int(self.sources[i, 0]), int(self.sources[i, 1])),
        )


def ssd(x: bytes, y: bytes, scaled: bool = True) -> float:
    """Sum of squared byte differences between two equal-length windows.
    With ``scaled``, each difference is divided by 255 first."""
    if len(x) != len(y):
        raise LengthMismatchError(f"window lengths differ: {len(x)} vs {len(y)}")
    acc = 0.0
    for a, b in zip(x, y):
        diff = a - b
        if scaled:
            diff = diff / 255.0
        acc += diff * diff
    return acc


def correlation(ssd_value: float) -> float:
    """exp(-ssd): 1 for identical windows, decaying with distance."""
    if ssd_value < 0:
        raise ValueError(f"ssd must be >= 0, got {ssd_value}")
    return math.exp(-ssd_value)


def _exp_neg(min_ssd: np.ndarray) -> np.ndarray:
    """exp(-x) elementwise through libm, +inf (empty bin) becoming 0.

    Goes value by value over the unique SSDs so results match
    :func:`correlation` bit for bit; numpy's vectorized exp may differ from
    libm in the last ulp, which would break oracle equality.
    """
    unique, inverse = np.unique(min_ssd, return_inverse=True)
    mapped = np.array(
        [0.0 if math.isinf(v) else math.exp(-v) for v in unique], dtype=np.float64
    )
    return mapped[inverse].reshape(min_ssd.shape)


def radial_bin(distance: int, radial_bins: int) -> int:
    """floor(log2(|d|)) clamped to the last bin: 1 -> 0, 2..3 -> 1, >=4 -> 2
    for the default three bins."""
    if distance < 1:
        raise ValueError("distance must be >= 1")
    return min(distance.bit_length() - 1, radial_bins - 1)


def angular_sector(d: int, angular_bins: int) -> int:
    """Angular sector of a signed 1-D offset.  One bin folds the sign away;
    with more bins, positive offsets sit at angle 0 and negative at pi."""
    if angular_bins == 1 or d > 0:
        return 0
    return angular_bins // 2


def descriptor_at(
    block_bytes: bytes,
    center_offset: int,
    params: ForgeParams,
    block_entry: int = 0,
) -> LocalSimilarityDescriptor:
    """Descriptor for the unit starting at ``center_offset``.

    Reference single-point implementation; the batched kernels in the
    engine modules must agree with it bit for bit.
    """
    u = params.unit_len
    length = len(block_bytes)
    if center_offset < 0 or center_offset + u > length:
        raise RegionTooSmallError(
            f"center [{center_offset}, {center_offset + u}) outside block of {length} bytes"
        )
    region_lo = max(0, center_offset - params.half)
    region_hi = min(length, center_offset + u + params.half)
    center = block_bytes[center_offset : center_offset + u]

    n = params.radial_bins
    min_ssd = np.full(params.channels, np.inf, dtype=np.float64)
    candidates = 0
    for start in range(region_lo, region_hi - u + 1):
        if start == center_offset:
            continue
        candidates += 1
        d = start - center_offset
        column = angular_sector(d, params.angular_bins) * n + radial_bin(abs(d), n)
        value = ssd(center, block_bytes[start : start + u], params.byte_scale)
        if value < min_ssd[column]:
            min_ssd[column] = value
    if candidates == 0:
        raise RegionTooSmallError(
            f"no candidate windows around offset {center_offset} in a {length}-byte block"
        )
    return LocalSimilarityDescriptor(
        values=_exp_neg(min_ssd), source=(block_entry, center_offset)
    )


def _forge_block(content: bytes, params: ForgeParams, kernels):
    return kernels.block_min_ssd(
        content,
        params.unit_len,
        params.half,
        params.angular_bins,
        params.radial_bins,
        params.byte_scale,
    )


def _forge_block_at(content: bytes, centers: list[int], params: ForgeParams):
    # instruction-aligned path: arbitrary center offsets, reference kernel
    min_ssd = np.full((len(centers), params.channels), np.inf, dtype=np.float64)
    u = params.unit_len
    n = params.radial_bins
    for row, center in enumerate(centers):
        lo = max(0, center - params.half)
        hi = min(len(content), center + u + params.half)
        window = content[center : center + u]
        for start in range(lo, hi - u + 1):
            if start == center:
                continue
            d = start - center
            column = angular_sector(d, params.angular_bins) * n + radial_bin(abs(d), n)
            value = ssd(window, content[start : start + u], params.byte_scale)
            if value < min_ssd[row, column]:
                min_ssd[row, column] = value
    return min_ssd, np.asarray(centers, dtype=np.int64)


def forge(
    program: ProgramDisassembly,
    params: ForgeParams = ForgeParams(),
    workers: int = 1,
    engine: str = "auto",
) -> DescriptorEnsemble:
    """Compute the descriptor ensemble for ``program``.

    Blocks are taken in canonical order at ``block_stride`` spacing;
    centers sweep each block at unit alignment (or instruction starts with
    ``instruction_aligned``).  Blocks shorter than ``unit_len + 1`` bytes
    cannot host a comparison and are counted, not failed.  Work
    parallelizes across blocks; the output order is the sequential one
    regardless of ``workers``.
    """
    kernels = _engine.resolve(engine)
    blocks = program.canonical_blocks
    if not params.include_imports:
        imported = {
            block.entry
            for name, function_blocks in program.functions
            if name.startswith("sym.imp.")
            for block in function_blocks
        }
        blocks = tuple(b for b in blocks if b.entry not in imported)
    selected = blocks[:: params.block_stride]
    jobs = []
    skipped = 0
    for block in selected:
        content = block.content
        if len(content) < params.unit_len + 1:
            skipped += 1
            continue
        if params.instruction_aligned:
            centers = []
            offset = 0
            for instruction in block.instructions:
                if offset + params.unit_len <= len(content):
                    centers.append(offset)
                offset += instruction.size
            if not centers:
                skipped += 1
                continue
            jobs.append((block.entry, content, centers))
        else:
            jobs.append((block.entry, content, None))

    def run(job):
        _, content, centers = job
        if centers is None:
            return _forge_block(content, params, kernels)
        return _forge_block_at(content, centers, params)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    chunks = []
    source_chunks = []
    for (entry, *_), (min_ssd, centers) in zip(jobs, results):
        chunks.append(min_ssd)
        src = np.empty((centers.shape[0], 2), dtype=np.int64)
        src[:, 0] = entry
        src[:, 1] = centers
        source_chunks.append(src)

    if chunks:
        min_ssd_all = np.concatenate(chunks, axis=0)
        sources = np.concatenate(source_chunks, axis=0)
    else:
        min_ssd_all = np.zeros((0, params.channels), dtype=np.float64)
        sources = np.zeros((0, 2), dtype=np.int64)

    values = _exp_neg(min_ssd_all)
    if values.size:
        min_raw = float(values.min())
        max_raw = float(values.max())
    else:
        min_raw = max_raw = 0.0
    return DescriptorEnsemble(
        values=values,
        sources=sources,
        min_raw=min_raw,
        max_raw=max_raw,
        skipped_blocks=skipped,
    )


def normalize(ensemble: DescriptorEnsemble) -> DescriptorEnsemble:
    """Min-max normalize all descriptor components to [0, 1] globally.
    A constant ensemble (max == min) maps to 0.5 everywhere."""
    if len(ensemble) == 0:
        raise EmptyEnsembleError("cannot normalize an empty ensemble")
    span = ensemble.max_raw - ensemble.min_raw
    if span == 0.0:
        values = np.full_like(ensemble.values, 0.5)
    else:
        values = (ensemble.values - ensemble.min_raw) / span
    return replace(ensemble, values=values, normalized=True)


def rescale(ensemble: DescriptorEnsemble) -> DescriptorEnsemble:
    """Inverse of :func:`normalize`: map values back to their original
    range using the stored extrema.  Inspection tooling only."""
    if len(ensemble) == 0:
        raise EmptyEnsembleError("cannot rescale an empty ensemble")
    span = ensemble.max_raw - ensemble.min_raw
    values = ensemble.values * span + ensemble.min_raw
    return replace(ensemble, values=values, normalized=False)


def map_height(count: int) -> int:
    """Fixed feature-map height band for a descriptor count."""
    if count < 10_000:
        return 32
    if count < 100_000:
        return 64
    return 128


def to_feature_map(ensemble: DescriptorEnsemble) -> FeatureMap:
    """Reshape a normalized ensemble into an (h, w, channels) uint8 map.

    Descriptor k lands in cell (k mod h, k div h): the geometric order runs
    down fixed-height columns, trailing cells stay zero.  Values are
    quantized as round(v * 255), half away from zero.
    """
    count = len(ensemble)
    if count == 0:
        raise EmptyEnsembleError("cannot build a feature map from an empty ensemble")
    if not ensemble.normalized:
        raise ValueError("ensemble must be normalized before mapping")
    height = map_height(count)
    width = -(-count // height)
    channels = ensemble.channels
    grid = np.zeros((height, width, channels), dtype=np.uint8)
    quantized = np.floor(ensemble.values * 255.0 + 0.5).astype(np.uint8)
    rows = np.arange(count) % height
    cols = np.arange(count) // height
    grid[rows, cols] = quantized
    return FeatureMap(grid)
