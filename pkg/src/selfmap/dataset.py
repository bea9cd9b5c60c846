"""Dataset manifests, per-category splits, sampling weights, and the
synthetic corpus generator used by the desk-scale experiments.

A manifest line holds everything the classifier stages need per sample:
content hash, path, refined label, packed flag, split assignment, and the
inverse-frequency sampling weight a weighted trainer draws by.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from pathlib import Path

from .disasm import BasicBlock, Instruction, ProgramDisassembly


class DatasetError(ValueError):
    pass


class DuplicateSampleError(DatasetError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    path: str
    label: str
    packed: bool
    split: str  # "train" | "test"
    weight: float


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    warnings: list[str] = field(default_factory=list)

    def split(self, which: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == which]

    @property
    def train(self) -> list[ManifestEntry]:
        return self.split("train")

    @property
    def test(self) -> list[ManifestEntry]:
        return self.split("test")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(
    samples: list[tuple[str | Path, str, bool]],
    split_fraction: float = 0.9,
    seed: int = 0,
) -> DatasetManifest:
    """Assign splits and weights to (path, label, packed) triples.

    Each category is shuffled with the seed and split so the train share
    matches ``split_fraction`` within one sample.  Categories with a single
    sample go entirely to train with a warning.  Every entry's weight is
    the total train count divided by its category's train count, so scarce
    categories draw proportionally more often.
    """
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must be in (0, 1)")
    seen: dict[str, Path] = {}
    by_label: dict[str, list[tuple[str, Path, bool]]] = {}
    for path, label, packed in samples:
        path = Path(path)
        sample_id = _sha256_file(path)
        if sample_id in seen:
            raise DuplicateSampleError(
                f"{path} duplicates {seen[sample_id]} (sha256 {sample_id[:16]}...)"
            )
        seen[sample_id] = path
        by_label.setdefault(label, []).append((sample_id, path, packed))

    rng = random.Random(seed)
    warnings: list[str] = []
    assignments: list[tuple[str, Path, str, bool, str]] = []
    train_counts: dict[str, int] = {}
    for label in sorted(by_label):
        group = sorted(by_label[label], key=lambda item: item[0])
        rng.shuffle(group)
        if len(group) < 2:
            warnings.append(f"category {label!r} has {len(group)} sample(s); kept all-train")
            n_train = len(group)
        else:
            n_train = min(len(group), int(len(group) * split_fraction + 0.5))
        train_counts[label] = n_train
        for i, (sample_id, path, packed) in enumerate(group):
            split = "train" if i < n_train else "test"
            assignments.append((sample_id, path, label, packed, split))

    total_train = sum(train_counts.values())
    entries = [
        ManifestEntry(
            sample_id=sample_id,
            path=str(path),
            label=label,
            packed=packed,
            split=split,
            weight=total_train / train_counts[label],
        )
        for sample_id, path, label, packed, split in assignments
    ]
    entries.sort(key=lambda e: (e.label, e.sample_id))
    return DatasetManifest(entries=entries, warnings=warnings)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sample_id\tpath\tlabel\tpacked\tsplit\tweight\n")
        for e in manifest.entries:
            fh.write(
                f"{e.sample_id}\t{e.path}\t{e.label}\t{int(e.packed)}\t{e.split}\t{e.weight!r}\n"
            )
    return path


def load_manifest(path: str | Path) -> DatasetManifest:
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sample_id, sample_path, label, packed, split, weight = line.split("\t")
        entries.append(
            ManifestEntry(
                sample_id=sample_id,
                path=sample_path,
                label=label,
                packed=bool(int(packed)),
                split=split,
                weight=float(weight),
            )
        )
    return DatasetManifest(entries=entries)


# --- synthetic corpus -------------------------------------------------------
#
# Families in a corpus descend from one common ancestor program (malware in
# the same ecosystem reuses code heavily): every family seed diverges from
# the ancestor by a sizable mutation, and variants clone their family seed
# with a small fraction of bytes flipped plus a couple of block swaps.
# Family distances therefore dwarf variant distances without leaking
# trivial shortcuts such as block counts.

BASE_ADDRESS = 0x401000


@dataclass(frozen=True)
class SynthParams:
    n_blocks: tuple[int, int] = (5, 50)
    block_bytes: tuple[int, int] = (24, 160)
    mutation_rate: float = 0.02  # variant vs family seed
    max_block_swaps: int = 2
    family_divergence: float = 0.3  # family seed vs ancestor


def synth_ancestor(rng: random.Random, params: SynthParams = SynthParams()) -> list[bytes]:
    n = rng.randint(*params.n_blocks)
    return [
        bytes(rng.randrange(256) for _ in range(rng.randint(*params.block_bytes)))
        for _ in range(n)
    ]


def _mutate(blocks: list[bytes], rng: random.Random, rate: float, max_swaps: int) -> list[bytes]:
    mutated = []
    for block in blocks:
        data = bytearray(block)
        for i in range(len(data)):
            if rng.random() < rate:
                data[i] = rng.randrange(256)
        mutated.append(bytes(data))
    for _ in range(rng.randint(0, max_swaps)):
        if len(mutated) >= 2:
            i, j = rng.sample(range(len(mutated)), 2)
            mutated[i], mutated[j] = mutated[j], mutated[i]
    return mutated


def synth_family_seed(
    rng: random.Random,
    params: SynthParams = SynthParams(),
    ancestor: list[bytes] | None = None,
) -> list[bytes]:
    if ancestor is None:
        ancestor = synth_ancestor(rng, params)
    return _mutate(ancestor, rng, params.family_divergence, params.max_block_swaps)


def mutate_variant(
    blocks: list[bytes], rng: random.Random, params: SynthParams = SynthParams()
) -> list[bytes]:
    return _mutate(blocks, rng, params.mutation_rate, params.max_block_swaps)


def blocks_to_program(blocks: list[bytes], sample_id: str) -> ProgramDisassembly:
    """Lay blocks out back to back from the base address, one pseudo
    instruction per block."""
    built = []
    address = BASE_ADDRESS
    for block in blocks:
        built.append(BasicBlock(address, (Instruction(address, len(block), block, "synth"),)))
        address += len(block)
    return ProgramDisassembly(
        sample_id=sample_id, functions=((f"fcn.{BASE_ADDRESS:x}", tuple(built)),)
    )


def blocks_to_document(blocks: list[bytes]) -> str:
    """Interchange text for a synthetic block list."""
    lines = [f"F fcn.{BASE_ADDRESS:x} {BASE_ADDRESS:X}"]
    address = BASE_ADDRESS
    for block in blocks:
        lines.append(f"B {BASE_ADDRESS:X} {address:X}")
        lines.append(f"I {address:X} {address:X} {block.hex().upper()} synth")
        address += len(block)
    return "\n".join(lines) + "\n"


def synth_corpus(
    out_dir: str | Path,
    n_families: int,
    n_variants: int,
    seed: int = 0,
    params: SynthParams = SynthParams(),
    pad_file_to: int = 0,
) -> list[tuple[Path, Path, str]]:
    """Write a synthetic corpus and return (binary, document, label) triples.

    Every variant gets a .bin with the block bytes (padded with
    deterministic filler up to ``pad_file_to`` to emulate data sections and
    resources) and a .dis interchange document covering the code region.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    ancestor = synth_ancestor(rng, params)
    triples = []
    for fam in range(n_families):
        label = f"family{fam:02d}"
        seed_blocks = synth_family_seed(rng, params, ancestor)
        for var in range(n_variants):
            blocks = mutate_variant(seed_blocks, rng, params)
            document = blocks_to_document(blocks)
            payload = b"".join(blocks)
            if pad_file_to > len(payload):
                filler = random.Random(rng.random()).randbytes(pad_file_to - len(payload))
                payload += filler
            stem = f"{label}_v{var:03d}"
            bin_path = out_dir / f"{stem}.bin"
            dis_path = out_dir / f"{stem}.dis"
            bin_path.write_bytes(payload)
            dis_path.write_text(document, encoding="utf-8")
            triples.append((bin_path, dis_path, label))
    return triples
