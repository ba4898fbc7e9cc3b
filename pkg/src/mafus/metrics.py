"""Confusion-matrix metrics and ranking AUC.

accuracy = (TP+TN)/total, recall = TP/(TP+FN), precision = TP/(TP+FP),
F1 = harmonic mean of precision and recall. AUC is the fraction of
(negative, positive) pairs the score orders correctly; ties count 0.5
under the default policy ("strict" credits them 0).

Zero-denominator metrics report 0.0; degenerate_metrics() names which
ones were degenerate so searches over poor configurations cannot crash.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, MetricError

CLASS_NAMES = {0: "No", 1: "Yes"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ContractError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(labels, predictions, positive: int = 1) -> ConfusionMatrix:
    """Tally a 2x2 confusion matrix; `positive` selects which class is TP."""
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape or y.ndim != 1:
        raise ContractError("labels and predictions must be equal-length vectors")
    if y.size == 0:
        raise ContractError("need at least one sample")
    pos_y = y == positive
    pos_p = p == positive
    return ConfusionMatrix(
        tp=int(np.sum(pos_y & pos_p)),
        tn=int(np.sum(~pos_y & ~pos_p)),
        fp=int(np.sum(~pos_y & pos_p)),
        fn=int(np.sum(pos_y & ~pos_p)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricError("accuracy undefined for zero samples")
    return (cm.tp + cm.tn) / cm.total


def recall(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def precision(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else 0.0


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0


def degenerate_metrics(cm: ConfusionMatrix) -> set[str]:
    """Which of precision/recall/f1 hit a zero denominator on this matrix."""
    flags = set()
    if cm.tp + cm.fp == 0:
        flags.add("precision")
    if cm.tp + cm.fn == 0:
        flags.add("recall")
    if precision(cm) + recall(cm) == 0.0:
        flags.add("f1")
    return flags


def _tie_groups(scores: np.ndarray, labels: np.ndarray):
    """Yield (positives, negatives) counts per distinct score, ascending."""
    order = np.argsort(scores, kind="mergesort")
    s, y = scores[order], labels[order]
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            j += 1
        group = y[i:j]
        yield int(np.sum(group == 1)), int(np.sum(group == 0))
        i = j


def auc(scores, labels, ties: str = "half") -> float:
    """Pairwise ranking AUC over all positive/negative score pairs."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractError("scores and labels must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auc undefined without both classes")
    wins = 0
    tied = 0
    neg_below = 0
    for pos, neg in _tie_groups(s, y):
        wins += pos * neg_below
        tied += pos * neg
        neg_below += neg
    if ties == "half":
        return (wins + 0.5 * tied) / (n_pos * n_neg)
    if ties == "strict":
        return wins / (n_pos * n_neg)
    raise ContractError(f"unknown tie policy {ties!r}")


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """ROC staircase over all score thresholds, from (0,0) to (1,1).

    Tied scores collapse into one step, so the trapezoidal area equals
    the half-tie AUC.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("roc undefined without both classes")
    groups = list(_tie_groups(s, y))[::-1]  # descending score
    points = [(0.0, 0.0)]
    cum_tp = 0
    cum_fp = 0
    for pos, neg in groups:
        cum_tp += pos
        cum_fp += neg
        points.append((cum_fp / n_neg, cum_tp / n_pos))
    return points


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: frozenset

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": sorted(self.degenerate),
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-class precision/recall/F1 plus overall accuracy and AUC."""

    per_class: dict[str, ClassMetrics]
    accuracy: float
    auc: float
    cm: ConfusionMatrix  # positive = class 1 (Yes)

    def class_f1(self, name: str = "Yes") -> float:
        return self.per_class[name].f1

    def class1_errors(self) -> int:
        """Misclassification count with class 1 as positive (FN + FP)."""
        return self.cm.fn + self.cm.fp

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "per_class": {name: m.to_dict() for name, m in self.per_class.items()},
            "confusion": {**self.cm.to_dict(), "positive": 1},
        }


def evaluate(labels, predictions, scores) -> EvalReport:
    """Full report: both class orientations, accuracy, and class-1 AUC."""
    per_class = {}
    for positive, name in CLASS_NAMES.items():
        cm = confusion(labels, predictions, positive=positive)
        per_class[name] = ClassMetrics(
            precision=precision(cm),
            recall=recall(cm),
            f1=f1(cm),
            degenerate=frozenset(degenerate_metrics(cm)),
        )
    cm1 = confusion(labels, predictions, positive=1)
    return EvalReport(
        per_class=per_class,
        accuracy=accuracy(cm1),
        auc=auc(scores, labels),
        cm=cm1,
    )
