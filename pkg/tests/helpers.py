"""Shared fixtures and independent oracles.

The oracles here are deliberately written from the definitions, not the
library code: descriptor values via exhaustive window enumeration with a
float log2 binning, signature search via a naive O(n*m) scan, histogram
equalization and tile interpolation via per-pixel loops, and KNN via an
explicit distance table.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from selfmap.descriptors import ForgeParams

# --- PE fixture builder -----------------------------------------------------

DOS_SIZE = 64
COFF_SIZE = 20
OPT32_SIZE = 224


def build_pe(
    sections,
    entry_rva: int,
    image_kind: str = "pe32",
    pe_offset: int = DOS_SIZE,
) -> bytes:
    """Assemble a minimal PE image.

    ``sections`` is a list of (name, raw_offset, payload, virtual_rva,
    virtual_size) tuples; payloads are written at their raw offsets.
    """
    blob = bytearray(b"\x00" * DOS_SIZE)
    blob[0:2] = b"MZ"
    struct.pack_into("<I", blob, 0x3C, pe_offset)
    while len(blob) < pe_offset:
        blob.append(0)
    blob += b"PE\x00\x00"

    machine = 0x014C if image_kind == "pe32" else 0x8664
    blob += struct.pack(
        "<HHIIIHH",
        machine,
        len(sections),
        0,  # timestamp
        0,  # symbol table
        0,  # symbol count
        OPT32_SIZE,
        0x0102,  # characteristics
    )

    opt = bytearray(OPT32_SIZE)
    magic = 0x10B if image_kind == "pe32" else 0x20B
    struct.pack_into("<H", opt, 0, magic)
    struct.pack_into("<I", opt, 16, entry_rva)
    blob += opt

    for name, raw_offset, payload, virtual_rva, virtual_size in sections:
        header = bytearray(40)
        header[0:8] = name.encode("ascii")[:8].ljust(8, b"\x00")
        struct.pack_into("<I", header, 8, virtual_size)
        struct.pack_into("<I", header, 12, virtual_rva)
        struct.pack_into("<I", header, 16, len(payload))
        struct.pack_into("<I", header, 20, raw_offset)
        blob += header

    for name, raw_offset, payload, virtual_rva, virtual_size in sections:
        if len(blob) < raw_offset:
            blob += b"\x00" * (raw_offset - len(blob))
        blob[raw_offset : raw_offset + len(payload)] = payload
    return bytes(blob)


# --- descriptor oracle ------------------------------------------------------


def oracle_descriptor(block: bytes, center: int, params: ForgeParams) -> np.ndarray:
    """Brute-force descriptor: every window enumerated, correlation taken
    per candidate, maximum per log-polar bin."""
    u = params.unit_len
    half = (params.region_len - params.unit_len) // 2
    lo = max(0, center - half)
    hi = min(len(block), center + u + half)
    x = block[center : center + u]
    bins = [[] for _ in range(params.angular_bins * params.radial_bins)]
    for start in range(lo, hi - u + 1):
        if start == center:
            continue
        y = block[start : start + u]
        total = 0.0
        for i in range(u):
            diff = x[i] - y[i]
            if params.byte_scale:
                diff = diff / 255.0
            total += diff * diff
        corr = math.exp(-total)
        d = start - center
        radial = min(int(math.floor(math.log2(abs(d)))), params.radial_bins - 1)
        if params.angular_bins == 1 or d > 0:
            sector = 0
        else:
            sector = params.angular_bins // 2
        bins[sector * params.radial_bins + radial].append(corr)
    return np.array([max(b) if b else 0.0 for b in bins], dtype=np.float64)


def oracle_forge(program, params: ForgeParams):
    """Descriptor list for a whole program, straight from the definitions."""
    values = []
    sources = []
    for block in program.canonical_blocks[:: params.block_stride]:
        content = block.content
        if len(content) < params.unit_len + 1:
            continue
        for center in range(0, len(content) - params.unit_len + 1, params.unit_len):
            values.append(oracle_descriptor(content, center, params))
            sources.append((block.entry, center))
    return np.array(values), sources


# --- signature scan oracle --------------------------------------------------


def oracle_scan(data: bytes, pattern) -> list[int]:
    """All offsets where the wildcard pattern matches, naive O(n*m)."""
    hits = []
    for offset in range(0, len(data) - len(pattern) + 1):
        ok = True
        for i, want in enumerate(pattern):
            if want is not None and data[offset + i] != want:
                ok = False
                break
        if ok:
            hits.append(offset)
    return hits


# --- histogram equalization oracles ------------------------------------------


def oracle_plain_he(img: np.ndarray, levels: int = 256) -> np.ndarray:
    """Global equalization from the mapping definition, no tiling."""
    counts = [0] * levels
    for v in img.ravel():
        counts[int(v)] += 1
    cdf = []
    running = 0
    for c in counts:
        running += c
        cdf.append(running)
    cdf_min = next((c for c in cdf if c > 0), 0)
    cdf_max = cdf[-1]
    mapping = []
    for c in cdf:
        if cdf_max == cdf_min:
            mapping.append(0)
        else:
            h = math.floor((c - cdf_min) / (cdf_max - cdf_min) * (levels - 1) + 0.5)
            mapping.append(max(0, min(levels - 1, h)))
    out = np.empty_like(img)
    for y in range(img.shape[0]):
        for x in range(img.shape[1]):
            out[y, x] = mapping[int(img[y, x])]
    return out


def _oracle_tile_mapping(tile: np.ndarray, clip_limit: float, levels: int) -> list[int]:
    area = tile.size
    counts = [0] * levels
    for v in tile.ravel():
        counts[int(v)] += 1
    ceiling = max(1, math.floor(clip_limit * area / levels + 0.5))
    excess = sum(max(c - ceiling, 0) for c in counts)
    counts = [min(c, ceiling) for c in counts]
    for _ in range(3):
        if excess == 0:
            break
        per, rem = divmod(excess, levels)
        counts = [c + per for c in counts]
        for i in range(rem):
            counts[i] += 1
        excess = sum(max(c - ceiling, 0) for c in counts)
        counts = [min(c, ceiling) for c in counts]
    if excess > 0:
        capped = [i for i, c in enumerate(counts) if c == ceiling]
        j = 0
        while excess > 0:
            counts[capped[j % len(capped)]] += 1
            excess -= 1
            j += 1
    cdf = []
    running = 0
    for c in counts:
        running += c
        cdf.append(running)
    cdf_min = next((c for c in cdf if c > 0), 0)
    cdf_max = cdf[-1]
    mapping = []
    for c in cdf:
        if cdf_max == cdf_min:
            mapping.append(0)
        else:
            h = math.floor((c - cdf_min) / (cdf_max - cdf_min) * (levels - 1) + 0.5)
            mapping.append(max(0, min(levels - 1, h)))
    return mapping


def oracle_clahe(
    img: np.ndarray, grid_a: int, grid_b: int, clip_limit: float, levels: int = 256
) -> np.ndarray:
    """Reference CLAHE: tile mappings from the clipped histograms, then a
    per-pixel region walk (corner / border / interior) with explicit
    linear and bilinear blends."""
    h, w = img.shape
    tile_w = w // grid_a
    tile_h = h // grid_b

    mappings = []
    for r in range(grid_b):
        row = []
        y0 = r * tile_h
        y1 = (r + 1) * tile_h if r < grid_b - 1 else h
        for c in range(grid_a):
            x0 = c * tile_w
            x1 = (c + 1) * tile_w if c < grid_a - 1 else w
            row.append(_oracle_tile_mapping(img[y0:y1, x0:x1], clip_limit, levels))
        mappings.append(row)

    cx = [(c + 0.5) * tile_w for c in range(grid_a)]
    cy = [(r + 0.5) * tile_h for r in range(grid_b)]
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            v = int(img[y, x])
            if grid_a == 1 or x <= cx[0]:
                c0, c1, wx0, wx1 = 0, 0, 1.0, 0.0
            elif x >= cx[-1]:
                c0, c1, wx0, wx1 = grid_a - 1, grid_a - 1, 1.0, 0.0
            else:
                c0 = 0
                while cx[c0 + 1] <= x:
                    c0 += 1
                c1 = c0 + 1
                wx0 = (cx[c1] - x) / (cx[c1] - cx[c0])
                wx1 = (x - cx[c0]) / (cx[c1] - cx[c0])
            if grid_b == 1 or y <= cy[0]:
                r0, r1, wy0, wy1 = 0, 0, 1.0, 0.0
            elif y >= cy[-1]:
                r0, r1, wy0, wy1 = grid_b - 1, grid_b - 1, 1.0, 0.0
            else:
                r0 = 0
                while cy[r0 + 1] <= y:
                    r0 += 1
                r1 = r0 + 1
                wy0 = (cy[r1] - y) / (cy[r1] - cy[r0])
                wy1 = (y - cy[r0]) / (cy[r1] - cy[r0])
            t = wx0 * mappings[r0][c0][v] + wx1 * mappings[r0][c1][v]
            b = wx0 * mappings[r1][c0][v] + wx1 * mappings[r1][c1][v]
            p = wy0 * t + wy1 * b
            out[y, x] = max(0, min(levels - 1, math.floor(p + 0.5)))
    return out


# --- knn oracle ---------------------------------------------------------------


def oracle_knn(train, query, k: int) -> str:
    """Exhaustive distance table, majority vote, summed-distance then
    alphabetical tie-break."""
    table = []
    for i, (fmap, label) in enumerate(train):
        a = fmap.data.astype(np.float64).ravel()
        b = query.data.astype(np.float64).ravel()
        dist = math.sqrt(float(((a - b) ** 2).sum()))
        table.append((dist, label, i))
    table.sort()
    nearest = table[:k]
    counts = {}
    for dist, label, _ in nearest:
        counts[label] = counts.get(label, 0) + 1
    best = max(counts.values())
    tied = sorted(l for l, c in counts.items() if c == best)
    if len(tied) == 1:
        return tied[0]
    sums = {
        label: sum(d for d, l, _ in nearest if l == label) for label in tied
    }
    low = min(sums.values())
    return sorted(l for l, s in sums.items() if s == low)[0]


# --- interchange document helpers ---------------------------------------------


def simple_document() -> str:
    return "\n".join(
        [
            "F fcn.401000 401000",
            "B 401000 401000",
            "I 401000 401000 B804000000 mov eax, 4",
            "I 401000 401005 C3 ret",
        ]
    )


def make_document(blocks: list[tuple[int, bytes]], fname: str = "fcn.401000") -> str:
    """One function containing ``blocks`` as single-instruction blocks."""
    fentry = min(e for e, _ in blocks)
    lines = [f"F {fname} {fentry:X}"]
    for entry, data in blocks:
        lines.append(f"B {fentry:X} {entry:X}")
        lines.append(f"I {entry:X} {entry:X} {data.hex().upper()} synth")
    return "\n".join(lines) + "\n"
