import struct
from pathlib import Path

import numpy as np
import pytest


def write_tensor(path: Path, data: np.ndarray) -> Path:
    """Independent SAMP writer: header + row-major channel-interleaved bytes."""
    h, w, c = data.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", b"SAMP", w, h, c))
        fh.write(np.ascontiguousarray(data, dtype=np.uint8).tobytes())
    return path


def write_manifest(path: Path, rows) -> Path:
    """rows: (sample_id, sample_path, label, packed, split, weight)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sample_id\tpath\tlabel\tpacked\tsplit\tweight\n")
        for sample_id, sample_path, label, packed, split, weight in rows:
            fh.write(f"{sample_id}\t{sample_path}\t{label}\t{int(packed)}\t{split}\t{weight!r}\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_two_class_set(tmp_path: Path, rng, n_per_class=20, shape=(32, 64, 3), split="train"):
    """Two separable classes: each sample is its class archetype with a few
    per-pixel perturbations."""
    h, w, c = shape
    archetypes = {
        "alpha": rng.integers(0, 256, shape, dtype=np.uint8),
        "beta": rng.integers(0, 256, shape, dtype=np.uint8),
    }
    tensor_dir = tmp_path / "tensors"
    rows = []
    i = 0
    for label, base in archetypes.items():
        for _ in range(n_per_class):
            sample = base.copy()
            mask = rng.random(shape) < 0.02
            sample[mask] = rng.integers(0, 256, int(mask.sum()), dtype=np.uint8)
            stem = f"s{i:03d}"
            write_tensor(tensor_dir / f"{stem}.samp", sample)
            rows.append((f"id{i:03d}", f"/data/{stem}.bin", label, 0, split, 1.0))
            i += 1
    manifest = write_manifest(tmp_path / "manifest.tsv", rows)
    return manifest, tensor_dir
