"""One-vs-rest logistic regression with L1 or L2 penalty.

Per binary problem with targets ``t`` in {-1, +1} the objective is::

    penalty(w) + C * sum_i log(1 + exp(-t_i (x_i . w + b)))

with ``penalty = 0.5 ||w||^2`` (L2) or ``||w||_1`` (L1). The intercept is not
penalized. L2 is minimised with L-BFGS; L1 with accelerated proximal gradient
(soft-thresholding gives exact zeros).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..domain import ValidationError


def logistic_loss_grad(
    params: np.ndarray, X: np.ndarray, t: np.ndarray, C: float, l2: bool
) -> tuple[float, np.ndarray]:
    """Smooth part of the objective and its gradient; ``params = [w..., b]``.

    ``l2=True`` includes ``0.5 ||w||^2``; for L1 the non-smooth penalty is left
    to the proximal step.
    """
    w, b = params[:-1], params[-1]
    margin = t * (X @ w + b)
    loss = C * np.sum(np.logaddexp(0.0, -margin))
    coef = -C * t * expit(-margin)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ coef
    grad[-1] = coef.sum()
    if l2:
        loss += 0.5 * float(w @ w)
        grad[:-1] += w
    return float(loss), grad


def _soft_threshold(v: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def _fit_l2(X: np.ndarray, t: np.ndarray, C: float, tol: float, max_iter: int) -> np.ndarray:
    x0 = np.zeros(X.shape[1] + 1)
    res = minimize(
        logistic_loss_grad,
        x0,
        args=(X, t, C, True),
        jac=True,
        method="L-BFGS-B",
        options={"gtol": tol, "maxiter": max_iter},
    )
    return res.x


def _fit_l1(X: np.ndarray, t: np.ndarray, C: float, tol: float, max_iter: int) -> np.ndarray:
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    lipschitz = C * np.linalg.norm(Xb, 2) ** 2 / 4.0
    step = 1.0 / max(lipschitz, 1e-12)
    penalized = np.ones(d + 1, dtype=bool)
    penalized[-1] = False

    def prox(v: np.ndarray) -> np.ndarray:
        out = v.copy()
        out[penalized] = _soft_threshold(v[penalized], step)
        return out

    x = np.zeros(d + 1)
    y = x.copy()
    mom = 1.0
    for _ in range(max_iter):
        _, g = logistic_loss_grad(y, X, t, C, False)
        x_new = prox(y - step * g)
        # gradient mapping at the extrapolated point
        if np.max(np.abs(y - x_new)) / step < tol:
            x = x_new
            break
        if float((y - x_new) @ (x_new - x)) > 0:
            # gradient-based adaptive restart: momentum points uphill, drop it
            mom = 1.0
        mom_next = (1.0 + np.sqrt(1.0 + 4.0 * mom * mom)) / 2.0
        y = x_new + ((mom - 1.0) / mom_next) * (x_new - x)
        x, mom = x_new, mom_next
    return x


@dataclass
class LogisticRegressionOVR:
    penalty: str = "l2"
    C: float = 1.0
    tol: float = 1e-6
    max_iter: int = 1000
    coef_: np.ndarray = field(init=False, repr=False)
    intercept_: np.ndarray = field(init=False, repr=False)
    classes_: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.penalty not in ("l1", "l2"):
            raise ValidationError(f"unknown penalty {self.penalty!r}")

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressionOVR":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValidationError("logistic regression needs at least two classes")
        fit = _fit_l2 if self.penalty == "l2" else _fit_l1
        # two classes share one binary model, as the reference solver does
        targets = self.classes_[1:] if self.classes_.size == 2 else self.classes_
        params = [fit(X, np.where(y == c, 1.0, -1.0), self.C, self.tol, self.max_iter) for c in targets]
        P = np.vstack(params)
        self.coef_, self.intercept_ = P[:, :-1], P[:, -1]
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_.T + self.intercept_

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p = expit(self.decision_function(X))
        if self.classes_.size == 2:
            return np.hstack([1.0 - p, p])
        total = p.sum(axis=1, keepdims=True)
        # every sigmoid underflowed: no class claims the row
        p = np.where(total > 0, p, 1.0)
        return p / np.where(total > 0, total, p.sum(axis=1, keepdims=True))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
