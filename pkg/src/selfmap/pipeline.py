"""End-to-end composition: disassembly in, enhanced feature tensor out,
plus wall-clock benchmarking with storage accounting.

``featurize`` chains load -> forge -> normalize -> map -> enhance ->
resize and is deterministic in its inputs; failures carry the name of the
stage that raised.  ``bench`` times a configurable stage subset over a
corpus and reports seconds per file and the tensor/corpus byte ratio.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import descriptors, disasm, tensorio
from .descriptors import ForgeParams
from .enhance import ClaheParams
from .enhance import enhance as _enhance
from .enhance import resize as _resize

STAGES = ("load", "forge", "enhance", "export")


class StageError(RuntimeError):
    def __init__(self, stage: str, original: Exception):
        super().__init__(f"stage {stage!r}: {original}")
        self.stage = stage
        self.original = original


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(stage, exc) from exc


def _effective_clahe(fmap: tensorio.FeatureMap, params: ClaheParams) -> ClaheParams:
    # Small programs produce maps narrower than the tile grid; clamp the
    # grid to the map so the contrast pass still runs on them.
    grid_a = min(params.grid_a, fmap.width)
    grid_b = min(params.grid_b, fmap.height)
    if (grid_a, grid_b) == (params.grid_a, params.grid_b):
        return params
    return replace(params, grid_a=grid_a, grid_b=grid_b)


def featurize_program(
    program: disasm.ProgramDisassembly,
    forge_params: ForgeParams = ForgeParams(),
    clahe_params: ClaheParams = ClaheParams(),
    workers: int = 1,
    engine: str = "auto",
) -> tensorio.FeatureMap:
    ensemble = _run_stage(
        "forge", descriptors.forge, program, forge_params, workers=workers, engine=engine
    )
    ensemble = _run_stage("normalize", descriptors.normalize, ensemble)
    fmap = _run_stage("map", descriptors.to_feature_map, ensemble)
    fmap = _run_stage("enhance", _enhance, fmap, _effective_clahe(fmap, clahe_params))
    return _run_stage(
        "resize", _resize, fmap, clahe_params.out_w, clahe_params.out_h
    )


def featurize(
    document: str | Path,
    out_dir: str | Path,
    forge_params: ForgeParams = ForgeParams(),
    clahe_params: ClaheParams = ClaheParams(),
    workers: int = 1,
    engine: str = "auto",
    png: bool = False,
    sample_id: str | None = None,
    stem: str | None = None,
) -> Path:
    """Featurize one interchange document into ``out_dir``; returns the
    tensor path.  ``document`` may be a path or the document text."""
    if isinstance(document, Path) or (isinstance(document, str) and "\n" not in document and Path(document).exists()):
        doc_path = Path(document)
        text = doc_path.read_text(encoding="utf-8")
        stem = stem or doc_path.stem
    else:
        text = document
        if stem is None:
            raise ValueError("stem is required when passing document text")
    program = _run_stage("load", disasm.load_disassembly, text, sample_id)
    fmap = featurize_program(program, forge_params, clahe_params, workers, engine)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensor_path = out_dir / f"{stem}.samp"
    _run_stage("export", tensorio.save_tensor, fmap, tensor_path)
    if png:
        _run_stage("export", tensorio.save_png, fmap, out_dir / f"{stem}.png")
    return tensor_path


@dataclass
class BenchReport:
    num_files: int
    total_seconds: float
    avg_time: float
    storage_bytes: int
    corpus_bytes: int
    engine: str
    stages: tuple[str, ...]
    tensor_paths: list[Path] = field(default_factory=list)

    @property
    def storage_ratio(self) -> float:
        return self.storage_bytes / self.corpus_bytes if self.corpus_bytes else 0.0

    def summary(self) -> str:
        lines = [
            f"files:        {self.num_files}",
            f"total time:   {self.total_seconds:.3f} s",
            f"avg_time:     {self.avg_time:.3f} s/file",
            f"engine:       {self.engine}",
            f"stages:       {', '.join(self.stages) or '(load only)'}",
            f"corpus bytes: {self.corpus_bytes}",
        ]
        if "export" in self.stages:
            lines.append(f"tensor bytes: {self.storage_bytes}")
            lines.append(f"storage ratio: {self.storage_ratio:.4f}")
        return "\n".join(lines)


def bench(
    documents: list[str | Path],
    stages: tuple[str, ...] = STAGES,
    out_dir: str | Path | None = None,
    forge_params: ForgeParams = ForgeParams(),
    clahe_params: ClaheParams = ClaheParams(),
    workers: int = 1,
    engine: str = "auto",
    binaries: list[str | Path] | None = None,
) -> BenchReport:
    """Time the selected stages over a corpus of interchange documents.

    avg_time is total wall clock divided by the file count.  When
    ``binaries`` is given, corpus bytes count those files (the original
    samples); otherwise the documents themselves are counted.
    """
    if not documents:
        raise ValueError("bench needs at least one document")
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    if "export" in stages and out_dir is None:
        raise ValueError("export stage needs out_dir")

    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    corpus_paths = [Path(p) for p in (binaries if binaries is not None else documents)]
    corpus_bytes = sum(p.stat().st_size for p in corpus_paths)
    storage_bytes = 0
    tensor_paths: list[Path] = []

    start = time.perf_counter()
    for doc in documents:
        doc = Path(doc)
        text = doc.read_text(encoding="utf-8")
        if "forge" not in stages and "enhance" not in stages and "export" not in stages:
            if "load" in stages:
                disasm.load_disassembly(text)
            continue
        program = disasm.load_disassembly(text)
        ensemble = descriptors.forge(program, forge_params, workers=workers, engine=engine)
        fmap = descriptors.to_feature_map(descriptors.normalize(ensemble))
        if "enhance" in stages or "export" in stages:
            fmap = _enhance(fmap, _effective_clahe(fmap, clahe_params))
            fmap = _resize(fmap, clahe_params.out_w, clahe_params.out_h)
        if "export" in stages:
            path = tensorio.save_tensor(fmap, Path(out_dir) / f"{doc.stem}.samp")
            tensor_paths.append(path)
    total = time.perf_counter() - start

    if tensor_paths:
        storage_bytes = sum(p.stat().st_size for p in tensor_paths)
    from . import engine as engine_mod

    return BenchReport(
        num_files=len(documents),
        total_seconds=total,
        avg_time=total / len(documents),
        storage_bytes=storage_bytes,
        corpus_bytes=corpus_bytes,
        engine=engine_mod.active_name(engine),
        stages=tuple(stages),
        tensor_paths=tensor_paths,
    )
