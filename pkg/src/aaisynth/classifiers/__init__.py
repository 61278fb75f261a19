"""Classifier suite: logistic regression (L1/L2), extra trees, MLP."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..domain import ValidationError
from .logistic import LogisticRegressionOVR, logistic_loss_grad
from .metrics import UndefinedAUC, binary_auc, roc_auc_multiclass
from .mlp import MLPClassifier, MLPDiverged, mlp_loss_grad
from .scaler import FeatureScaler, apply_scaler, fit_scaler
from .trees import ExtraTreesClassifier

KINDS = ("logreg_l1", "logreg_l2", "extra_trees", "mlp")
STOCHASTIC_KINDS = frozenset({"extra_trees", "mlp"})

DEFAULT_HYPERPARAMS: dict[str, dict[str, Any]] = {
    "logreg_l1": {"C": 1.0, "tol": 1e-6, "max_iter": 1000},
    "logreg_l2": {"C": 1.0, "tol": 1e-6, "max_iter": 1000},
    "extra_trees": {"n_estimators": 500, "min_samples_split": 2},
    "mlp": {"hidden_units": 100, "learning_rate": 1e-3, "max_iter": 1000, "tol": 1e-4, "n_iter_no_change": 10},
}


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparams: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        merged = {**DEFAULT_HYPERPARAMS[self.kind], **dict(self.hyperparams)}
        object.__setattr__(self, "hyperparams", merged)

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC_KINDS

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "hyperparams": dict(self.hyperparams), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ClassifierSpec":
        return cls(d["kind"], d.get("hyperparams", {}), int(d.get("seed", 0)))


def make_classifier(spec: ClassifierSpec, seed: int | None = None) -> Any:
    seed = spec.seed if seed is None else seed
    hp = dict(spec.hyperparams)
    if spec.kind == "logreg_l1":
        return LogisticRegressionOVR(penalty="l1", **hp)
    if spec.kind == "logreg_l2":
        return LogisticRegressionOVR(penalty="l2", **hp)
    if spec.kind == "extra_trees":
        return ExtraTreesClassifier(seed=seed, **hp)
    return MLPClassifier(seed=seed, **hp)


def fit_predict_proba(
    spec: ClassifierSpec,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    n_classes: int,
    seed: int | None = None,
    scale: bool = True,
) -> np.ndarray:
    """Scale on training rows, fit, and return probabilities over all ``n_classes``.

    Classes missing from the training rows get probability 0. With a single
    training class the prediction falls back to the (degenerate) class prior.
    """
    y_train = np.asarray(y_train, dtype=int)
    present = np.unique(y_train)
    X_test = np.atleast_2d(X_test)
    if present.size < 2:
        warnings.warn("training split has a single class; predicting class priors", stacklevel=2)
        prior = np.bincount(y_train, minlength=n_classes) / y_train.size
        return np.tile(prior, (X_test.shape[0], 1))
    if scale:
        scaler = fit_scaler(X_train)
        X_train, X_test = apply_scaler(scaler, X_train), apply_scaler(scaler, X_test)
    model = make_classifier(spec, seed).fit(X_train, y_train)
    proba = np.zeros((X_test.shape[0], n_classes))
    proba[:, model.classes_.astype(int)] = model.predict_proba(X_test)
    return proba


__all__ = [
    "KINDS",
    "ClassifierSpec",
    "ExtraTreesClassifier",
    "FeatureScaler",
    "LogisticRegressionOVR",
    "MLPClassifier",
    "MLPDiverged",
    "UndefinedAUC",
    "apply_scaler",
    "binary_auc",
    "fit_predict_proba",
    "fit_scaler",
    "logistic_loss_grad",
    "make_classifier",
    "mlp_loss_grad",
    "roc_auc_multiclass",
]
