"""Dataset loading and the training loop.

The sampler draws training samples with probability proportional to their
manifest weight (scarce categories come up more often); the test split is
used as-is.  Training aborts with the epoch index when the loss turns
non-finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, TensorDataset, WeightedRandomSampler

from .manifest import ManifestRow, read_manifest
from .metrics import evaluate
from .model import build_vgg11
from .tensors import read_tensor


class DivergenceDetected(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 8
    weighted_sampling: bool = True
    input_shape: tuple[int, int, int] = (512, 128, 3)  # width, height, channels
    seed: int = 0
    target_train_accuracy: float | None = None  # early stop once reached

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class LoadedDataset:
    classes: list[str]
    train_x: torch.Tensor  # (n, c, h, w) float32 in [0, 1]
    train_y: torch.Tensor
    train_weights: torch.Tensor
    test_x: torch.Tensor
    test_y: torch.Tensor
    test_labels: list[str]


@dataclass
class TrainResult:
    model: nn.Module
    epoch_losses: list[float]
    train_accuracy: float
    metrics: dict
    checkpoint: Path | None = None
    epochs_run: int = 0


def _tensor_path(tensor_dir: Path, row: ManifestRow) -> Path:
    return tensor_dir / f"{Path(row.path).stem}.samp"


def _to_torch(maps: list[np.ndarray]) -> torch.Tensor:
    stacked = np.stack(maps).astype(np.float32) / 255.0  # (n, h, w, c)
    return torch.from_numpy(stacked).permute(0, 3, 1, 2).contiguous()


def load_dataset(
    manifest_path: str | Path,
    tensor_dir: str | Path,
    input_shape: tuple[int, int, int] = (512, 128, 3),
) -> LoadedDataset:
    """Resolve every manifest row to its tensor file and split the set.

    Raises :class:`MissingTensor` naming the first absent file and
    :class:`HeaderMismatch` when a header disagrees with ``input_shape``.
    """
    rows = read_manifest(manifest_path)
    tensor_dir = Path(tensor_dir)
    classes = sorted({row.label for row in rows})
    class_index = {label: i for i, label in enumerate(classes)}

    train_maps, train_y, train_w = [], [], []
    test_maps, test_y, test_labels = [], [], []
    for row in rows:
        data = read_tensor(_tensor_path(tensor_dir, row), input_shape)
        if row.split == "train":
            train_maps.append(data)
            train_y.append(class_index[row.label])
            train_w.append(row.weight)
        else:
            test_maps.append(data)
            test_y.append(class_index[row.label])
            test_labels.append(row.label)

    empty = torch.empty(0)
    return LoadedDataset(
        classes=classes,
        train_x=_to_torch(train_maps) if train_maps else empty,
        train_y=torch.tensor(train_y, dtype=torch.long),
        train_weights=torch.tensor(train_w, dtype=torch.double),
        test_x=_to_torch(test_maps) if test_maps else empty,
        test_y=torch.tensor(test_y, dtype=torch.long),
        test_labels=test_labels,
    )


def make_sampler(weights: torch.Tensor, draws: int, seed: int) -> WeightedRandomSampler:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return WeightedRandomSampler(
        weights, num_samples=draws, replacement=True, generator=generator
    )


def _train_accuracy(model: nn.Module, x: torch.Tensor, y: torch.Tensor, batch: int) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for i in range(0, x.shape[0], batch):
            logits = model(x[i : i + batch])
            correct += int((logits.argmax(dim=1) == y[i : i + batch]).sum())
    model.train()
    return correct / x.shape[0]


def train(
    config: TrainConfig,
    dataset: LoadedDataset,
    checkpoint_path: str | Path | None = None,
) -> TrainResult:
    """Fit VGG11 on the training split and evaluate on the test split."""
    if len(dataset.classes) < 2:
        raise ValueError(f"need at least 2 classes, got {len(dataset.classes)}")
    if dataset.train_x.shape[0] == 0:
        raise ValueError("training split is empty")
    width, height, channels = config.input_shape
    torch.manual_seed(config.seed)
    model = build_vgg11(len(dataset.classes), width, height, channels)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=config.learning_rate, momentum=config.momentum
    )
    loss_fn = nn.CrossEntropyLoss()

    n_train = dataset.train_x.shape[0]
    pairs = TensorDataset(dataset.train_x, dataset.train_y)
    if config.weighted_sampling:
        sampler = make_sampler(dataset.train_weights, n_train, config.seed)
        loader = DataLoader(pairs, batch_size=config.batch_size, sampler=sampler)
    else:
        generator = torch.Generator()
        generator.manual_seed(config.seed)
        loader = DataLoader(
            pairs, batch_size=config.batch_size, shuffle=True, generator=generator
        )

    model.train()
    epoch_losses: list[float] = []
    train_accuracy = 0.0
    epochs_run = 0
    for epoch in range(config.epochs):
        total = 0.0
        batches = 0
        for batch_x, batch_y in loader:
            optimizer.zero_grad()
            loss = loss_fn(model(batch_x), batch_y)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise DivergenceDetected(epoch, value)
            loss.backward()
            optimizer.step()
            total += value
            batches += 1
        epoch_losses.append(total / max(batches, 1))
        epochs_run = epoch + 1
        train_accuracy = _train_accuracy(
            model, dataset.train_x, dataset.train_y, config.batch_size
        )
        if (
            config.target_train_accuracy is not None
            and train_accuracy >= config.target_train_accuracy
        ):
            break

    predictions: list[tuple[str, str]] = []
    if dataset.test_x.shape[0]:
        model.eval()
        with torch.no_grad():
            for i in range(0, dataset.test_x.shape[0], config.batch_size):
                logits = model(dataset.test_x[i : i + config.batch_size])
                for j, guess in enumerate(logits.argmax(dim=1).tolist()):
                    predictions.append(
                        (dataset.test_labels[i + j], dataset.classes[guess])
                    )
    report = evaluate(predictions) if predictions else {}

    checkpoint = None
    if checkpoint_path is not None:
        checkpoint = Path(checkpoint_path)
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "model_state": model.state_dict(),
                "classes": dataset.classes,
                "input_shape": list(config.input_shape),
                "epoch_losses": epoch_losses,
            },
            checkpoint,
        )
    return TrainResult(
        model=model,
        epoch_losses=epoch_losses,
        train_accuracy=train_accuracy,
        metrics=report,
        checkpoint=checkpoint,
        epochs_run=epochs_run,
    )
