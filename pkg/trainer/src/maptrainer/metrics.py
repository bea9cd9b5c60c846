"""Evaluation metrics in the shared machine-readable schema.

Deliberately re-derived from the schema contract rather than imported, so
this package stays a pure consumer; a shared fixture pins equality with
the producer's evaluator.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def evaluate(predictions: list[tuple[str, str]]) -> dict:
    """Per-category and macro precision/recall/F1 plus accuracy and the
    confusion matrix over (true, predicted) pairs."""
    if not predictions:
        raise ValueError("no predictions to evaluate")
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
        per_category[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(confusion[i, :].sum()),
            "flags": flags,
        }

    n = len(categories)
    return {
        "categories": categories,
        "per_category": per_category,
        "macro_precision": sum(m["precision"] for m in per_category.values()) / n,
        "macro_recall": sum(m["recall"] for m in per_category.values()) / n,
        "macro_f1": sum(m["f1"] for m in per_category.values()) / n,
        "accuracy": float(np.trace(confusion)) / float(confusion.sum()),
        "confusion": confusion.tolist(),
    }


def write_metrics(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
