"""Per-feature standardization fitted on training rows only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import ValidationError


@dataclass(frozen=True)
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray


def fit_scaler(X: np.ndarray) -> FeatureScaler:
    """Column mean and population std; zero std is replaced by 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("cannot fit a scaler on an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureScaler(mean, std)


def apply_scaler(scaler: FeatureScaler, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != scaler.mean.shape[0]:
        raise ValidationError(f"scaler expects {scaler.mean.shape[0]} features, got {X.shape[-1]}")
    return (X - scaler.mean) / scaler.std
