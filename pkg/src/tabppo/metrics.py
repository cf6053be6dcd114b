"""Multi-class evaluation: confusion matrix, per-class precision / recall /
F1 with supports, macro and weighted averages, accuracy.

Zero-denominator convention: a class with no predictions (or no truth)
reports precision / recall / F1 of 0 and is flagged, but still counts in
the macro averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassReport:
    per_class: list[ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_f1: float
    total: int
    undefined: list[str]  # classes whose rates hit a zero denominator

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "total": self.total,
            "undefined": list(self.undefined),
            "classes": {
                m.name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for m in self.per_class
            },
        }


def confusion(truths, predictions, n_classes: int) -> np.ndarray:
    """Counts matrix with rows = truth, columns = prediction."""
    truths = np.asarray(truths, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if truths.shape != predictions.shape:
        raise ValueError(
            f"length mismatch: {truths.shape} truths vs "
            f"{predictions.shape} predictions"
        )
    if truths.size and (
        truths.min() < 0 or truths.max() >= n_classes
        or predictions.min() < 0 or predictions.max() >= n_classes
    ):
        raise ValueError(f"labels out of range for {n_classes} classes")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truths, predictions), 1)
    return cm


def report(cm: np.ndarray, class_names: list[str]) -> ClassReport:
    cm = np.asarray(cm)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    if cm.shape[0] != len(class_names):
        raise ValueError(
            f"{cm.shape[0]}x{cm.shape[1]} matrix vs {len(class_names)} names"
        )
    diag = np.diag(cm).astype(np.float64)
    col_sums = cm.sum(axis=0).astype(np.float64)
    row_sums = cm.sum(axis=1).astype(np.float64)

    per_class = []
    undefined = []
    for i, name in enumerate(class_names):
        precision = diag[i] / col_sums[i] if col_sums[i] > 0 else 0.0
        recall = diag[i] / row_sums[i] if row_sums[i] > 0 else 0.0
        denom = precision + recall
        f1 = 2 * precision * recall / denom if denom > 0 else 0.0
        if col_sums[i] == 0 or row_sums[i] == 0 or denom == 0:
            undefined.append(name)
        per_class.append(ClassMetrics(name, precision, recall, f1, int(row_sums[i])))

    macro_p = float(np.mean([m.precision for m in per_class]))
    macro_r = float(np.mean([m.recall for m in per_class]))
    macro_f1 = float(np.mean([m.f1 for m in per_class]))
    weighted_f1 = float(
        sum(m.f1 * m.support for m in per_class) / total
    )
    return ClassReport(
        per_class=per_class,
        accuracy=float(diag.sum() / total),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        weighted_f1=weighted_f1,
        total=total,
        undefined=undefined,
    )


def render_report(rep: ClassReport) -> str:
    """Aligned text table: Class, Precision, Recall, F1-score, Support."""
    width = max([len("Class")] + [len(m.name) for m in rep.per_class] + [9])
    lines = [
        f"{'Class':<{width}}  {'Precision':>9}  {'Recall':>9}  "
        f"{'F1-score':>9}  {'Support':>8}"
    ]
    for m in rep.per_class:
        lines.append(
            f"{m.name:<{width}}  {m.precision:>9.4f}  {m.recall:>9.4f}  "
            f"{m.f1:>9.4f}  {m.support:>8d}"
        )
    lines.append(
        f"{'Macro Avg':<{width}}  {rep.macro_precision:>9.4f}  "
        f"{rep.macro_recall:>9.4f}  {rep.macro_f1:>9.4f}  {rep.total:>8d}"
    )
    lines.append(f"Accuracy: {rep.accuracy:.4f}   Weighted F1: {rep.weighted_f1:.4f}")
    if rep.undefined:
        lines.append("Zero-denominator classes: " + ", ".join(rep.undefined))
    return "\n".join(lines)
