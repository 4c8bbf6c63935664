"""Evaluation quantities: confusion matrices, per-class precision/recall,
head-to-tail trend statistics, and pseudo-label quality diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def confusion(preds, truths, k: int) -> np.ndarray:
    """K x K count matrix; rows index the true class, columns the prediction."""
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truths = np.asarray(truths, dtype=np.int64).ravel()
    if preds.shape != truths.shape:
        raise ValueError("predictions and truths must have equal length")
    if preds.size and (preds.min() < 0 or preds.max() >= k or truths.min() < 0 or truths.max() >= k):
        raise ValueError(f"class labels outside [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truths, preds), 1)
    return cm


def accuracy_from_confusion(cm: np.ndarray) -> float:
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


def precision_recall(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-class precision and recall from a confusion matrix.

    A class never predicted gets precision 0 by convention. An empty row is
    an error: every class must appear in the evaluation set.
    """
    cm = np.asarray(cm)
    row = cm.sum(axis=1)
    col = cm.sum(axis=0)
    if np.any(row == 0):
        raise ValueError("confusion matrix has a class with no true samples")
    diag = np.diag(cm).astype(np.float64)
    recall = diag / row
    precision = np.where(col > 0, diag / np.maximum(col, 1), 0.0)
    return precision, recall


def trend_stats(per_class_values) -> float:
    """Spearman rank correlation between class index (head first) and the
    values; average ranks under ties; a constant vector maps to 0."""
    values = np.asarray(per_class_values, dtype=np.float64)
    if values.size < 3:
        raise ValueError("trend needs at least 3 classes")
    if np.all(values == values[0]):
        return 0.0
    rho = stats.spearmanr(np.arange(values.size), values).statistic
    return float(rho)


@dataclass
class MetricsReport:
    """Everything recorded about one evaluation pass."""

    accuracy: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    pseudo_kept_fraction: float = 0.0
    pseudo_accuracy_per_class: np.ndarray = None
    pseudo_class_histogram: np.ndarray = None

    def __post_init__(self):
        k = len(self.per_class_recall)
        if self.pseudo_accuracy_per_class is None:
            self.pseudo_accuracy_per_class = np.zeros(k)
        if self.pseudo_class_histogram is None:
            self.pseudo_class_histogram = np.zeros(k, dtype=np.int64)

    @property
    def min_class_recall(self) -> float:
        return float(np.min(self.per_class_recall))

    @property
    def max_class_recall(self) -> float:
        return float(np.max(self.per_class_recall))

    @property
    def recall_trend(self) -> float:
        return trend_stats(self.per_class_recall)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_precision": [float(v) for v in self.per_class_precision],
            "per_class_recall": [float(v) for v in self.per_class_recall],
            "pseudo_kept_fraction": self.pseudo_kept_fraction,
            "pseudo_accuracy_per_class": [float(v) for v in self.pseudo_accuracy_per_class],
            "pseudo_class_histogram": [int(v) for v in self.pseudo_class_histogram],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            accuracy=float(d["accuracy"]),
            per_class_precision=np.array(d["per_class_precision"], dtype=np.float64),
            per_class_recall=np.array(d["per_class_recall"], dtype=np.float64),
            pseudo_kept_fraction=float(d["pseudo_kept_fraction"]),
            pseudo_accuracy_per_class=np.array(d["pseudo_accuracy_per_class"], dtype=np.float64),
            pseudo_class_histogram=np.array(d["pseudo_class_histogram"], dtype=np.int64),
        )


def pseudo_diagnostics_arrays(kept: np.ndarray, pseudo: np.ndarray,
                              hidden: np.ndarray, k: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Array form of pseudo_diagnostics: boolean keep mask, pseudo labels,
    and hidden true labels, all of equal length."""
    kept = np.asarray(kept, dtype=bool).ravel()
    total = kept.size
    if total == 0:
        return 0.0, np.zeros(k, dtype=np.int64), np.zeros(k)
    pseudo = np.asarray(pseudo, dtype=np.int64).ravel()
    hidden = np.asarray(hidden, dtype=np.int64).ravel()
    kp = pseudo[kept]
    hist = np.bincount(kp, minlength=k)
    correct = np.bincount(kp[hidden[kept] == kp], minlength=k)
    acc = np.where(hist > 0, correct / np.maximum(hist, 1), 0.0)
    return float(kept.sum() / total), hist, acc


def pseudo_diagnostics(records, k: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Summarize pseudo-label records: (kept fraction, kept-class histogram,
    per-class accuracy of kept pseudo labels against the hidden truth).

    Classes with no kept records get accuracy 0. Records only need the
    attributes kept, pseudo_label, hidden_true_label.
    """
    kept = np.array([rec.kept for rec in records], dtype=bool)
    pseudo = np.array([rec.pseudo_label for rec in records], dtype=np.int64)
    hidden = np.array([rec.hidden_true_label for rec in records], dtype=np.int64)
    return pseudo_diagnostics_arrays(kept, pseudo, hidden, k)
