"""Command line interface.

Subcommands cover the whole flow: identify packers, drive external
unpackers, validate disassembly documents, featurize them into tensors,
consolidate vendor labels, build manifests, run the nearest-neighbor
baseline, evaluate predictions and benchmark throughput.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import classify, dataset, disasm, engine, labels, packers, peformat, pipeline
from .config import load_params
from .descriptors import ForgeParams
from .enhance import ClaheParams
from .labels import RefinerParams


def _params(args) -> tuple[ForgeParams, ClaheParams, RefinerParams]:
    if getattr(args, "params", None):
        return load_params(args.params)
    return ForgeParams(), ClaheParams(), RefinerParams()


def cmd_identify(args) -> int:
    data = Path(args.file).read_bytes()
    layout = peformat.parse_pe(data)
    db = packers.load_signature_db(Path(args.db).read_text(encoding="utf-8"))
    report = packers.identify_packer(data, layout, db)
    for diag in report.diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    if not report.matches:
        print("no packer signature matched")
        return 0
    for m in report.matches:
        kind = "ep" if m.ep_only else "scan"
        print(f"{m.name}\t0x{m.offset:X}\t{kind}\tlen={m.length}")
    return 0


def cmd_unpack(args) -> int:
    plans = packers.load_unpack_plans(args.plans)
    packer = args.packer
    if packer is None:
        data = Path(args.file).read_bytes()
        layout = peformat.parse_pe(data)
        db = packers.load_signature_db(Path(args.db).read_text(encoding="utf-8"))
        report = packers.identify_packer(data, layout, db)
        if not report.matches:
            print("no packer identified; nothing to unpack", file=sys.stderr)
            return 1
        packer = report.matches[0].name
        print(f"identified packer: {packer}")
    try:
        out, plan = packers.unpack_with_fallback(args.file, packer, plans)
    except packers.UnpackError as exc:
        print(f"unpack failed: {exc}", file=sys.stderr)
        return 1
    print(f"unpacked with plan {plan.packer_name!r}: {out}")
    return 0


def cmd_ingest(args) -> int:
    text = Path(args.document).read_text(encoding="utf-8")
    program = disasm.load_disassembly(text)
    print(f"sample_id:  {program.sample_id}")
    print(f"functions:  {len(program.functions)}")
    print(f"blocks:     {program.block_count}")
    print(f"instrs:     {program.instruction_count}")
    print(f"avg_instr:  {program.avg_instr:.4f} bytes")
    print(f"avg_bb:     {program.avg_bb:.4f} bytes")
    if args.canonical:
        Path(args.canonical).write_text(
            disasm.serialize_disassembly(program), encoding="utf-8"
        )
    return 0


def cmd_featurize(args) -> int:
    forge_params, clahe_params, _ = _params(args)
    for document in args.documents:
        if args.raw_block_size:
            data = Path(document).read_bytes()
            program = disasm.raw_blocks(data, args.raw_block_size)
            fmap = pipeline.featurize_program(
                program, forge_params, clahe_params, args.workers, args.engine
            )
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            tensor = out_dir / f"{Path(document).stem}.samp"
            from . import tensorio

            tensorio.save_tensor(fmap, tensor)
            if args.png:
                tensorio.save_png(fmap, tensor.with_suffix(".png"))
        else:
            tensor = pipeline.featurize(
                Path(document),
                args.out,
                forge_params,
                clahe_params,
                workers=args.workers,
                engine=args.engine,
                png=args.png,
            )
        print(tensor)
    return 0


def cmd_refine_labels(args) -> int:
    _, _, refiner_params = _params(args)
    records = [labels.load_vendor_report(p) for p in args.reports]
    result = labels.refine(records, refiner_params)
    labels.save_refined(result.labels, args.out)
    for sample_id in result.manual_review:
        print(f"manual review: {sample_id}", file=sys.stderr)
    print(f"wrote {len(result.labels)} labels to {args.out}")
    return 0


def cmd_manifest(args) -> int:
    samples = []
    for line in Path(args.listing).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        path, label, packed = line.split("\t")
        samples.append((path, label, bool(int(packed))))
    manifest = dataset.build_manifest(samples, args.fraction, args.seed)
    for warning in manifest.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    dataset.save_manifest(manifest, args.out)
    print(f"wrote manifest with {len(manifest.entries)} entries to {args.out}")
    return 0


def cmd_classify_knn(args) -> int:
    from . import tensorio

    manifest = dataset.load_manifest(args.manifest)
    tensor_dir = Path(args.tensors)

    def tensor_for(entry):
        return tensorio.load_tensor(tensor_dir / f"{Path(entry.path).stem}.samp")

    train = [(tensor_for(e), e.label) for e in manifest.train]
    queries = [(tensor_for(e), e.label) for e in manifest.test]
    predictions = classify.knn_classify_batch(
        train, [q for q, _ in queries], k=args.k
    )
    pairs = [(label, pred) for (_, label), pred in zip(queries, predictions)]
    classify.save_predictions(pairs, args.out)
    report = classify.evaluate(pairs)
    print(report.table())
    if args.metrics:
        report.to_json(args.metrics)
    return 0


def cmd_eval(args) -> int:
    pairs = classify.load_predictions(args.predictions)
    report = classify.evaluate(pairs)
    print(report.table())
    if args.metrics:
        report.to_json(args.metrics)
    return 0


def cmd_bench(args) -> int:
    forge_params, clahe_params, _ = _params(args)
    documents = sorted(Path(args.corpus).glob("*.dis"))
    binaries = sorted(Path(args.corpus).glob("*.bin")) or None
    stages = tuple(s for s in args.stages.split(",") if s) if args.stages else pipeline.STAGES
    engines = ["python", "compiled"] if args.compare_engines else [args.engine]
    for name in engines:
        if name != "auto" and name not in engine.available_engines():
            print(f"engine {name!r} unavailable; skipping", file=sys.stderr)
            continue
        report = pipeline.bench(
            documents,
            stages=stages,
            out_dir=args.out,
            forge_params=forge_params,
            clahe_params=clahe_params,
            workers=args.workers,
            engine=name,
            binaries=binaries,
        )
        print(report.summary())
        print()
        if args.metrics:
            doc = {
                "num_files": report.num_files,
                "total_seconds": report.total_seconds,
                "avg_time": report.avg_time,
                "storage_bytes": report.storage_bytes,
                "corpus_bytes": report.corpus_bytes,
                "storage_ratio": report.storage_ratio,
                "engine": report.engine,
            }
            Path(args.metrics).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfmap",
        description="Static-analysis feature maps for malware classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="match packer signatures against a PE file")
    p.add_argument("file")
    p.add_argument("--db", required=True, help="signature database (text format)")
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("unpack", help="run the configured external unpacker")
    p.add_argument("file")
    p.add_argument("--plans", required=True, help="unpack plan INI file")
    p.add_argument("--packer", help="packer name (skips identification)")
    p.add_argument("--db", help="signature database for identification")
    p.set_defaults(fn=cmd_unpack)

    p = sub.add_parser("ingest", help="validate a disassembly interchange document")
    p.add_argument("document")
    p.add_argument("--canonical", help="write the canonical serialized form here")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("featurize", help="turn disassembly documents into feature tensors")
    p.add_argument("documents", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--params", help="INI parameter file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--engine", default="auto", choices=["auto", "compiled", "python"])
    p.add_argument("--png", action="store_true", help="also export PNG images")
    p.add_argument(
        "--raw-block-size",
        type=int,
        default=0,
        help="treat inputs as raw binaries split into pseudo-blocks of this size",
    )
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("refine-labels", help="consolidate vendor reports into class.family labels")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--params")
    p.set_defaults(fn=cmd_refine_labels)

    p = sub.add_parser("manifest", help="build a train/test manifest from a sample listing")
    p.add_argument("listing", help="TSV: path<TAB>label<TAB>packed")
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_manifest)

    p = sub.add_parser("classify-knn", help="nearest-neighbor baseline over a manifest")
    p.add_argument("manifest")
    p.add_argument("--tensors", required=True, help="directory of .samp tensors")
    p.add_argument("--out", required=True, help="predictions TSV")
    p.add_argument("--metrics", help="metrics JSON output")
    p.add_argument("-k", type=int, default=1)
    p.set_defaults(fn=cmd_classify_knn)

    p = sub.add_parser("eval", help="metrics from a predictions TSV")
    p.add_argument("predictions")
    p.add_argument("--metrics", help="metrics JSON output")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="time the pipeline over a corpus directory")
    p.add_argument("corpus", help="directory with .dis documents (and optional .bin binaries)")
    p.add_argument("--out", help="tensor output directory (export stage)")
    p.add_argument("--stages", help="comma list from: load,forge,enhance,export")
    p.add_argument("--params")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--engine", default="auto", choices=["auto", "compiled", "python"])
    p.add_argument("--compare-engines", action="store_true",
                   help="run once per engine and print both timings")
    p.add_argument("--metrics", help="write a machine-readable report here")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
