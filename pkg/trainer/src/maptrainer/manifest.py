"""Dataset manifest reader (TSV contract).

Rows: sample_id, path, label, packed (0/1), split (train/test), weight.
Lines starting with '#' are comments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    path: str
    label: str
    packed: bool
    split: str
    weight: float


def read_manifest(path: str | Path) -> list[ManifestRow]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sample_id, sample_path, label, packed, split, weight = line.split("\t")
        rows.append(
            ManifestRow(
                sample_id=sample_id,
                path=sample_path,
                label=label,
                packed=bool(int(packed)),
                split=split,
                weight=float(weight),
            )
        )
    return rows
