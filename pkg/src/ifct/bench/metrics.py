"""Leaf-level classification metrics and trajectory (explanation) accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..errors import EmptyInput, LengthMismatch


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int

    def to_json(self) -> dict:
        return {"class": self.label, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "support": self.support}


@dataclass
class EvalResult:
    n_cases: int
    accuracy: float
    weighted_f1: float
    explanation_accuracy: float
    per_class: list[ClassMetrics]
    mode: str = ""
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"mode": self.mode, "n_cases": self.n_cases, "accuracy": self.accuracy,
                "weighted_f1": self.weighted_f1, "explanation_accuracy": self.explanation_accuracy,
                "per_class": [c.to_json() for c in self.per_class],
                "errors": [{"case_id": c, "error": e} for c, e in self.errors]}

    def csv_row(self) -> str:
        return f"{self.mode},{self.n_cases},{self.accuracy:.6f},{self.weighted_f1:.6f},{self.explanation_accuracy:.6f}"


CSV_HEADER = "mode,n,accuracy,weighted_f1,explanation_accuracy"


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_metrics(preds: Sequence[str], truths: Sequence[str], pred_paths: Sequence | None = None,
                    truth_paths: Sequence | None = None) -> EvalResult:
    """Accuracy, support-weighted F1 over leaf ids (0/0 counted as 0) and full-path match rate.

    Paths compare by their (node, branch) step sequence; without paths, explanation accuracy
    falls back to leaf equality, which is the same thing when leaves are not shared.
    """
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions for {len(truths)} truths")
    if not truths:
        raise EmptyInput("no cases to score")
    if (pred_paths is None) != (truth_paths is None):
        raise ValueError("pass both path lists or neither")
    if pred_paths is not None and not (len(pred_paths) == len(truth_paths) == len(truths)):
        raise LengthMismatch("path lists must match the leaf lists in length")
    n = len(truths)
    correct = sum(p == t for p, t in zip(preds, truths))
    per_class = []
    weighted = 0.0
    for label in sorted(set(preds) | set(truths)):
        tp = sum(p == label and t == label for p, t in zip(preds, truths))
        n_pred = sum(p == label for p in preds)
        support = sum(t == label for t in truths)
        precision = _ratio(tp, n_pred)
        recall = _ratio(tp, support)
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_class.append(ClassMetrics(label, precision, recall, f1, support))
        weighted += support / n * f1
    if pred_paths is None:
        explained = correct
    else:
        explained = sum(_steps(p) == _steps(t) for p, t in zip(pred_paths, truth_paths))
    return EvalResult(n, correct / n, weighted, explained / n, per_class)


def _steps(path):
    if path is None:
        return None
    return (tuple(tuple(s) for s in path.steps), path.leaf_id)
