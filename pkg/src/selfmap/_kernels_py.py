"""Pure-numpy implementation of the hot descriptor kernel.

Used when the compiled extension is unavailable (or explicitly selected).
Must stay bit-identical to ``_kernels.pyx``: squared byte differences are
accumulated in ascending byte order as float64, with the 1/255 scaling
applied as a division before squaring.
"""

from __future__ import annotations

import numpy as np

ENGINE_NAME = "python"


def _gap_ssd(diff_sq: np.ndarray, u: int, gap: int) -> np.ndarray:
    """SSD between the window at p and the window at p+gap, for every p.

    ``diff_sq[j]`` holds the squared (scaled) difference of bytes j and
    j+gap.  Terms are added in ascending byte order to match the scalar
    kernel exactly.
    """
    count = diff_sq.shape[0] - (u - 1)
    acc = diff_sq[0:count].copy()
    for i in range(1, u):
        acc += diff_sq[i : i + count]
    return acc


def block_min_ssd(
    data: bytes, u: int, half: int, m: int, n: int, scaled: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum SSD per log-polar bin for every unit-aligned center.

    Centers sit at offsets 0, u, 2u, ... with the full unit inside the
    block.  Candidates are every window whose start lies within ``half``
    bytes of the center (clipped to the block), excluding the center
    itself.  Returns ``(min_ssd, centers)`` where ``min_ssd`` has shape
    (len(centers), m*n) and empty bins hold +inf.
    """
    length = len(data)
    centers = np.arange(0, length - u + 1, u, dtype=np.int64)
    bins = m * n
    out = np.full((centers.shape[0], bins), np.inf, dtype=np.float64)
    if centers.shape[0] == 0:
        return out, centers

    b = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    ang_pos = 0
    ang_neg = 0 if m == 1 else m // 2

    for gap in range(1, half + 1):
        if gap >= length:
            break
        diff = b[: length - gap] - b[gap:]
        if scaled:
            diff = diff / 255.0
        diff_sq = diff * diff
        if diff_sq.shape[0] < u:
            break
        ssd = _gap_ssd(diff_sq, u, gap)
        radial = min(gap.bit_length() - 1, n - 1)

        # candidate to the right of the center: starts at c + gap
        col = ang_pos * n + radial
        mask = centers <= length - u - gap
        if mask.any():
            vals = ssd[centers[mask]]
            out[mask, col] = np.minimum(out[mask, col], vals)

        # candidate to the left: starts at c - gap
        col = ang_neg * n + radial
        mask = centers >= gap
        if mask.any():
            vals = ssd[centers[mask] - gap]
            out[mask, col] = np.minimum(out[mask, col], vals)

    return out, centers
