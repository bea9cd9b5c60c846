"""Nearest-neighbor baseline classifier and evaluation metrics.

Feature maps are flattened and compared by L2 distance; the predicted
label is the majority among the k nearest training maps, ties falling to
the smaller summed distance and then the alphabetically first label.
``evaluate`` turns (true, predicted) pairs into per-category and macro
precision / recall / F1 plus accuracy and the confusion matrix.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorio import FeatureMap


class ClassifyError(ValueError):
    pass


class EmptyTrainingSetError(ClassifyError):
    pass


def _flatten(fmap: FeatureMap) -> np.ndarray:
    return fmap.data.reshape(-1).astype(np.float64)


def knn_classify(
    train: list[tuple[FeatureMap, str]], query: FeatureMap, k: int = 1
) -> str:
    """Majority label among the k nearest training maps."""
    if not train:
        raise EmptyTrainingSetError("no training maps")
    if k < 1:
        raise ValueError("k must be >= 1")
    matrix = np.stack([_flatten(fmap) for fmap, _ in train])
    labels = [label for _, label in train]
    return _vote(matrix, labels, _flatten(query), k)


def _vote(matrix: np.ndarray, labels: list[str], q: np.ndarray, k: int) -> str:
    dists = np.sqrt(np.sum((matrix - q) ** 2, axis=1))
    order = sorted(range(len(labels)), key=lambda i: (dists[i], labels[i], i))
    nearest = order[: min(k, len(order))]
    votes = Counter(labels[i] for i in nearest)
    best = max(votes.values())
    contenders = sorted(label for label, count in votes.items() if count == best)
    if len(contenders) == 1:
        return contenders[0]
    summed = {
        label: sum(dists[i] for i in nearest if labels[i] == label)
        for label in contenders
    }
    low = min(summed.values())
    return sorted(label for label, total in summed.items() if total == low)[0]


def knn_classify_batch(
    train: list[tuple[FeatureMap, str]], queries: list[FeatureMap], k: int = 1
) -> list[str]:
    if not train:
        raise EmptyTrainingSetError("no training maps")
    matrix = np.stack([_flatten(fmap) for fmap, _ in train])
    labels = [label for _, label in train]
    return [_vote(matrix, labels, _flatten(q), k) for q in queries]


@dataclass
class CategoryMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    flags: tuple[str, ...] = ()


@dataclass
class MetricsReport:
    categories: list[str]
    per_category: dict[str, CategoryMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: np.ndarray  # rows: true, cols: predicted
    avg_time: float | None = None
    storage_bytes: int | None = None
    corpus_bytes: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "categories": self.categories,
            "per_category": {
                label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "flags": list(m.flags),
                }
                for label, m in self.per_category.items()
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
        }
        if self.avg_time is not None:
            doc["avg_time"] = self.avg_time
        if self.storage_bytes is not None:
            doc["storage_bytes"] = self.storage_bytes
        if self.corpus_bytes is not None:
            doc["corpus_bytes"] = self.corpus_bytes
        doc.update(self.extra)
        return doc

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def table(self) -> str:
        width = max([len(c) for c in self.categories] + [8])
        lines = [
            f"{'category':<{width}}  {'prec':>6}  {'recall':>6}  {'f1':>6}  {'n':>5}"
        ]
        for label in self.categories:
            m = self.per_category[label]
            lines.append(
                f"{label:<{width}}  {m.precision:6.3f}  {m.recall:6.3f}  {m.f1:6.3f}  {m.support:5d}"
            )
        lines.append(
            f"{'macro':<{width}}  {self.macro_precision:6.3f}  {self.macro_recall:6.3f}  "
            f"{self.macro_f1:6.3f}  {int(self.confusion.sum()):5d}"
        )
        lines.append(f"accuracy: {self.accuracy:.4f}")
        return "\n".join(lines)


def evaluate(predictions: list[tuple[str, str]]) -> MetricsReport:
    """Metrics over (true, predicted) label pairs.

    A category that is never predicted gets precision 0 by convention and
    is flagged; macro averages are unweighted means over categories present
    in the ground truth or the predictions.
    """
    if not predictions:
        raise ClassifyError("no predictions to evaluate")
    categories = sorted({t for t, _ in predictions} | {p for _, p in predictions})
    index = {label: i for i, label in enumerate(categories)}
    confusion = np.zeros((len(categories), len(categories)), dtype=np.int64)
    for true, pred in predictions:
        confusion[index[true], index[pred]] += 1

    per_category = {}
    for label in categories:
        i = index[label]
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum() - tp)
        fn = int(confusion[i, :].sum() - tp)
        flags = []
        if tp + fp == 0:
            precision = 0.0
            flags.append("never_predicted")
        else:
            precision = tp / (tp + fp)
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_category[label] = CategoryMetrics(
            precision=precision,
            recall=recall,
            f1=f1,
            support=int(confusion[i, :].sum()),
            flags=tuple(flags),
        )

    n = len(categories)
    return MetricsReport(
        categories=categories,
        per_category=per_category,
        macro_precision=sum(m.precision for m in per_category.values()) / n,
        macro_recall=sum(m.recall for m in per_category.values()) / n,
        macro_f1=sum(m.f1 for m in per_category.values()) / n,
        accuracy=float(np.trace(confusion)) / float(confusion.sum()),
        confusion=confusion,
    )


def save_predictions(pairs: list[tuple[str, str]], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for true, pred in pairs:
            fh.write(f"{true}\t{pred}\n")
    return path


def load_predictions(path: str | Path) -> list[tuple[str, str]]:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        true, pred = line.split("\t")
        pairs.append((true, pred))
    return pairs
