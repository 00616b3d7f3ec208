"""Ordinal IoU, per-class Jaccard, confusion matrices, target correlations and
permutation feature importance.

The headline score is the soft Jaccard on ordinal class indices,
``sum(min(y, yhat)) / sum(max(y, yhat))``, so a near miss costs less than a
distant one. It is exposed through ``METRICS`` so an alternative definition
can be plugged in by name.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .core import N_CLASSES, TargetKind


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    if len(y) == 0:
        raise ValueError("empty sequences")
    if y.min() < 0 or p.min() < 0 or y.max() >= N_CLASSES or p.max() >= N_CLASSES:
        raise ValueError(f"classes must lie in [0, {N_CLASSES - 1}]")
    return y, p


def ordinal_iou(y_true, y_pred) -> float:
    y, p = _pair(y_true, y_pred)
    den = np.maximum(y, p).sum()
    if den == 0:
        return 1.0  # all-quiet agreement
    return float(np.minimum(y, p).sum() / den)


METRICS: dict[str, Callable[[Sequence[int], Sequence[int]], float]] = {
    "ordinal_iou": ordinal_iou,
}


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    y, p = _pair(y_true, y_pred)
    return np.bincount(y * n_classes + p, minlength=n_classes ** 2).reshape(n_classes, n_classes)


def per_class_jaccard(y_true, y_pred) -> tuple[list[float | None], float | None]:
    """Jaccard of each class (None when the class is in neither sequence) and their mean."""
    cm = confusion_matrix(y_true, y_pred)
    scores: list[float | None] = []
    for c in range(N_CLASSES):
        union = cm[c, :].sum() + cm[:, c].sum() - cm[c, c]
        scores.append(None if union == 0 else float(cm[c, c] / union))
    present = [s for s in scores if s is not None]
    return scores, (float(np.mean(present)) if present else None)


@dataclass
class EvaluationReport:
    target: str
    split: str
    model: str
    iou: float
    per_class: list[float | None]
    macro_jaccard: float | None
    confusion: list[list[int]]
    n: int = field(default=0)

    def to_dict(self) -> dict:
        return {"target": self.target, "split": self.split, "model": self.model,
                "iou": self.iou, "per_class": self.per_class,
                "macro_jaccard": self.macro_jaccard, "confusion": self.confusion, "n": self.n}


def evaluate(y_true, y_pred, target: TargetKind | str, split: str,
             model: str, metric: str = "ordinal_iou") -> EvaluationReport:
    per, macro = per_class_jaccard(y_true, y_pred)
    t = target.value if isinstance(target, TargetKind) else target
    return EvaluationReport(
        target=t, split=split, model=model, iou=METRICS[metric](y_true, y_pred),
        per_class=per, macro_jaccard=macro,
        confusion=confusion_matrix(y_true, y_pred).tolist(), n=len(y_true))


def target_correlation_matrix(labels: pd.DataFrame,
                              targets: Sequence[TargetKind] = tuple(TargetKind)) -> pd.DataFrame:
    """Pearson correlation between class levels of the targets.

    A constant column has no defined correlation; those entries are NaN
    (including its diagonal entry).
    """
    cols = [t.value for t in targets]
    x = labels[cols].to_numpy(dtype=float)
    xc = x - x.mean(axis=0)
    ss = np.sqrt((xc ** 2).sum(axis=0))
    k = len(cols)
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(k):
            if ss[i] > 0 and ss[j] > 0:
                out[i, j] = float(xc[:, i] @ xc[:, j] / (ss[i] * ss[j]))
        if ss[i] > 0:
            out[i, i] = 1.0
    return pd.DataFrame(out, index=cols, columns=cols)


def permutation_importance(predict: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                           y: np.ndarray, feature_names: Sequence[str], seed: int = 0,
                           repeats: int = 5, metric: str = "ordinal_iou",
                           features: Sequence[str] | None = None) -> dict[str, float]:
    """Drop in score when one input channel is shuffled across windows.

    ``x`` has shape (N, C, T); ``predict`` maps it to N classes. Repeat ``r``
    shuffles with sub-seed ``seed + r``, so averaging single-repeat runs at
    consecutive seeds reproduces a multi-repeat run.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    names = list(feature_names)
    chosen = names if features is None else list(features)
    unknown = [f for f in chosen if f not in names]
    if unknown:
        raise KeyError(f"unknown feature(s): {unknown}")
    score = METRICS[metric]
    base = score(y, predict(x))
    out: dict[str, float] = {}
    for name in chosen:
        f = names.index(name)
        drops = []
        for r in range(repeats):
            rng = np.random.default_rng([seed + r, f])
            xp = x.copy()
            xp[:, f, :] = x[rng.permutation(len(x)), f, :]
            drops.append(score(y, predict(xp)))
        out[name] = float(base - np.mean(drops))
    return out
