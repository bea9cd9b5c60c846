"""Command line entry point: train a VGG11 on a manifest + tensor directory."""

from __future__ import annotations

import argparse

from .metrics import write_metrics
from .train import TrainConfig, load_dataset, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maptrainer", description="Train VGG11 on exported feature-map tensors"
    )
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--tensors", required=True)
    parser.add_argument("--out", help="checkpoint path (.pt)")
    parser.add_argument("--metrics", help="metrics JSON path")
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--width", type=int, default=512)
    parser.add_argument("--height", type=int, default=128)
    parser.add_argument("--channels", type=int, default=3)
    parser.add_argument("--no-weighted-sampling", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        weighted_sampling=not args.no_weighted_sampling,
        input_shape=(args.width, args.height, args.channels),
        seed=args.seed,
    )
    dataset = load_dataset(args.manifest, args.tensors, config.input_shape)
    print(f"classes: {len(dataset.classes)}  train: {dataset.train_x.shape[0]}  "
          f"test: {dataset.test_x.shape[0]}")
    result = train(config, dataset, checkpoint_path=args.out)
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch:3d}  loss {loss:.4f}")
    print(f"train accuracy: {result.train_accuracy:.4f}")
    if result.metrics:
        print(f"test accuracy:  {result.metrics['accuracy']:.4f}")
        if args.metrics:
            write_metrics(result.metrics, args.metrics)
    if result.checkpoint:
        print(f"checkpoint: {result.checkpoint}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
