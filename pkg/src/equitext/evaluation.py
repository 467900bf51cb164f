"""Classification metrics: accuracy, per-class F1, macro-F1, confusion counts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .baselines import PredictionRecord
from .errors import UsageError
from .market import PerformanceClass

N_CLASSES = 3


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows are true classes, columns predicted classes."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.counts) != N_CLASSES or any(len(r) != N_CLASSES for r in self.counts):
            raise UsageError("confusion matrix must be 3x3")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    per_class: tuple[ClassMetrics, ...]
    n: int
    confusion: ConfusionMatrix


def evaluate(predictions: Sequence[PredictionRecord], labels: Mapping[str, PerformanceClass]) -> MetricsReport:
    """Score predictions against true labels keyed by document id.

    A class with no true and no predicted instances contributes F1 = 0 to
    the macro average.
    """
    if not predictions:
        raise UsageError("no predictions to evaluate")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for record in predictions:
        if record.doc_id not in labels:
            raise UsageError(f"prediction {record.doc_id!r} has no matching label")
        counts[int(labels[record.doc_id]), int(record.predicted)] += 1
    n = int(counts.sum())
    accuracy = float(np.trace(counts)) / n
    per_class = []
    for k in range(N_CLASSES):
        tp = counts[k, k]
        predicted = counts[:, k].sum()
        actual = counts[k, :].sum()
        precision = float(tp / predicted) if predicted else 0.0
        recall = float(tp / actual) if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(ClassMetrics(precision=precision, recall=recall, f1=f1))
    macro_f1 = float(np.mean([m.f1 for m in per_class]))
    return MetricsReport(
        accuracy=accuracy,
        macro_f1=macro_f1,
        per_class=tuple(per_class),
        n=n,
        confusion=ConfusionMatrix(tuple(tuple(int(c) for c in row) for row in counts)),
    )


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "n": report.n,
        "per_class": {
            PerformanceClass(k).label: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
            }
            for k, m in enumerate(report.per_class)
        },
        "confusion": [list(row) for row in report.confusion.counts],
    }


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def format_report(report: MetricsReport, title: str = "") -> str:
    """Aligned plain-text table with the headline accuracy/F1 pair."""
    lines = []
    if title:
        lines.append(title)
    lines.append(f"Acc.: {report.accuracy:.2f}  F1: {report.macro_f1:.2f}  (n={report.n})")
    lines.append(f"{'class':<10} {'precision':>9} {'recall':>9} {'f1':>9}")
    for k, m in enumerate(report.per_class):
        lines.append(
            f"{PerformanceClass(k).label:<10} {m.precision:>9.3f} {m.recall:>9.3f} {m.f1:>9.3f}"
        )
    lines.append("confusion (rows=true, cols=predicted):")
    for row in report.confusion.counts:
        lines.append("  " + " ".join(f"{c:>6d}" for c in row))
    return "\n".join(lines) + "\n"
