"""Classification metrics: accuracy, macro F1, rank-statistic AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricsReport:
    acc: float  # percentages in [0, 100]
    auc: float
    f1: float
    per_class: dict  # class -> {"tp", "fp", "fn", "support"}

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "auc": self.auc,
            "f1": self.f1,
            "per_class": {str(k): v for k, v in self.per_class.items()},
        }


def binary_auc(scores, labels) -> float:
    """Mann-Whitney AUC of scores for the positive class, ties at half credit.

    Equals the probability a random positive outranks a random negative.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def multiclass_auc(probs, labels) -> float:
    """Macro one-vs-rest AUC from an (n, C) probability array."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if probs.ndim == 1:
        return binary_auc(probs, labels)
    n_classes = probs.shape[1]
    if n_classes == 2:
        return binary_auc(probs[:, 1], (labels == 1).astype(int))
    aucs = []
    for c in range(n_classes):
        mask = (labels == c).astype(int)
        if mask.sum() == 0 or mask.sum() == len(mask):
            continue
        aucs.append(binary_auc(probs[:, c], mask))
    return float(np.mean(aucs)) if aucs else 0.5


def confusion_counts(preds, labels, n_classes: int) -> dict:
    preds = np.asarray(preds).astype(int)
    labels = np.asarray(labels).astype(int)
    out = {}
    for c in range(n_classes):
        tp = int(((preds == c) & (labels == c)).sum())
        fp = int(((preds == c) & (labels != c)).sum())
        fn = int(((preds != c) & (labels == c)).sum())
        out[c] = {"tp": tp, "fp": fp, "fn": fn, "support": int((labels == c).sum())}
    return out


def macro_f1(counts: dict) -> float:
    f1s = []
    for c, d in counts.items():
        denom = 2 * d["tp"] + d["fp"] + d["fn"]
        f1s.append(2 * d["tp"] / denom if denom else 0.0)
    return float(np.mean(f1s)) if f1s else 0.0


def compute_metrics(probs, labels, n_classes: int | None = None) -> MetricsReport:
    """Build a report from predicted class probabilities and true labels."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if n_classes is None:
        n_classes = probs.shape[1] if probs.ndim == 2 else int(labels.max()) + 1
    preds = probs.argmax(axis=1) if probs.ndim == 2 else (probs > 0.5).astype(int)
    counts = confusion_counts(preds, labels, n_classes)
    acc = float((preds == labels).mean()) if len(labels) else 0.0
    return MetricsReport(
        acc=100.0 * acc,
        auc=100.0 * multiclass_auc(probs, labels),
        f1=100.0 * macro_f1(counts),
        per_class=counts,
    )
