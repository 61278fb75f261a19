"""ROC AUC via the rank (Mann-Whitney) formulation; ties earn half credit."""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from ..domain import ValidationError



class UndefinedAUC(ValidationError):
    pass


def binary_auc(y: Sequence[int] | np.ndarray, scores: Sequence[float] | np.ndarray) -> float:
    y = np.asarray(y).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    if y.shape != scores.shape:
        raise ValidationError(f"labels {y.shape} and scores {scores.shape} differ in shape")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc_multiclass(
    y_true: Sequence[int] | np.ndarray, proba: np.ndarray, class_order: Sequence[object] | int
) -> float:
    """Macro one-vs-rest AUC over the classes that have both positives and negatives.

    ``y_true`` holds column indices into ``proba``; ``class_order`` names the
    columns (or gives their count).
    """
    proba = np.asarray(proba, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=int)
    k = class_order if isinstance(class_order, int) else len(class_order)
    if proba.ndim != 2 or proba.shape != (y_true.size, k):
        raise ValidationError(f"probability matrix shape {proba.shape} does not match ({y_true.size}, {k})")
    if np.any((y_true < 0) | (y_true >= k)):
        raise ValidationError("label outside the class order")
    aucs = []
    for c in range(k):
        member = y_true == c
        if member.all() or not member.any():
            name = c if isinstance(class_order, int) else class_order[c]
            warnings.warn(f"class {name} has no positives or no negatives; skipped in macro AUC", stacklevel=2)
            continue
        aucs.append(binary_auc(member, proba[:, c]))
    if not aucs:
        raise UndefinedAUC("every class was skipped; AUC undefined")
    return float(np.mean(aucs))
