"""One-hidden-layer ReLU network, softmax output, trained with Adam on cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from ..domain import ValidationError


class MLPDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"MLP loss became non-finite at epoch {epoch}")
        self.epoch = epoch


def init_params(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights and biases."""
    params = []
    for fan_in, fan_out in ((n_in, n_hidden), (n_hidden, n_out)):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        params.append(rng.uniform(-bound, bound, fan_out))
    return params


def forward(params: list[np.ndarray], X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    W1, b1, W2, b2 = params
    hidden = np.maximum(X @ W1 + b1, 0.0)
    return hidden, hidden @ W2 + b2


def mlp_loss_grad(
    params: list[np.ndarray], X: np.ndarray, Y: np.ndarray, alpha: float
) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy plus ``alpha / (2n) * sum ||W||^2`` and its backprop gradient.

    ``Y`` is one-hot, shape ``(n, n_classes)``.
    """
    W1, _, W2, _ = params
    n = X.shape[0]
    hidden, logits = forward(params, X)
    loss = -np.sum(Y * log_softmax(logits, axis=1)) / n
    loss += 0.5 * alpha * (np.sum(W1 * W1) + np.sum(W2 * W2)) / n

    delta_out = (softmax(logits, axis=1) - Y) / n
    gW2 = hidden.T @ delta_out + alpha * W2 / n
    gb2 = delta_out.sum(axis=0)
    delta_hidden = (delta_out @ W2.T) * (hidden > 0)
    gW1 = X.T @ delta_hidden + alpha * W1 / n
    gb1 = delta_hidden.sum(axis=0)
    return float(loss), [gW1, gb1, gW2, gb2]


@dataclass
class MLPClassifier:
    hidden_units: int = 100
    learning_rate: float = 1e-3
    alpha: float = 1e-4
    batch_size: int = 200
    max_iter: int = 1000
    tol: float = 1e-4
    n_iter_no_change: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    params_: list[np.ndarray] = field(init=False, repr=False, default_factory=list)
    classes_: np.ndarray = field(init=False, repr=False)
    loss_curve_: list[float] = field(init=False, repr=False, default_factory=list)
    n_iter_: int = field(init=False, default=0)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "MLPClassifier":
        X = np.asarray(X, dtype=np.float64)
        self.classes_, codes = np.unique(np.asarray(y), return_inverse=True)
        if self.classes_.size < 2:
            raise ValidationError("MLP needs at least two classes")
        Y = np.eye(self.classes_.size)[codes]
        n = X.shape[0]
        rng = np.random.default_rng(self.seed)
        init = init_params(X.shape[1], self.hidden_units, self.classes_.size, rng)
        # one flat vector with per-layer views, so Adam runs as a few in-place ops
        shapes = [p.shape for p in init]
        bounds = np.cumsum([0] + [p.size for p in init])
        flat = np.concatenate([p.ravel() for p in init])
        params = [flat[a:b].reshape(shape) for a, b, shape in zip(bounds[:-1], bounds[1:], shapes)]
        grad = np.empty_like(flat)
        m = np.zeros_like(flat)
        v = np.zeros_like(flat)
        scratch = np.empty_like(flat)
        batch = max(1, min(self.batch_size, n))
        step = 0
        best = np.inf
        stale = 0
        self.loss_curve_ = []
        for epoch in range(1, self.max_iter + 1):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                loss, grads = mlp_loss_grad(params, X[rows], Y[rows], self.alpha)
                for (a, b), g in zip(zip(bounds[:-1], bounds[1:]), grads):
                    grad[a:b] = g.ravel()
                epoch_loss += loss * rows.size
                step += 1
                lr = self.learning_rate * np.sqrt(1 - self.beta2**step) / (1 - self.beta1**step)
                m *= self.beta1
                m += (1 - self.beta1) * grad
                v *= self.beta2
                np.multiply(grad, grad, out=scratch)
                scratch *= 1 - self.beta2
                v += scratch
                np.sqrt(v, out=scratch)
                scratch += self.epsilon
                np.divide(m, scratch, out=scratch)
                scratch *= lr
                flat -= scratch
            epoch_loss /= n
            if not np.isfinite(epoch_loss):
                raise MLPDiverged(epoch)
            self.loss_curve_.append(epoch_loss)
            self.n_iter_ = epoch
            stale = stale + 1 if epoch_loss > best - self.tol else 0
            best = min(best, epoch_loss)
            if stale >= self.n_iter_no_change:
                break
        params = [p.copy() for p in params]
        self.params_ = params
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _, logits = forward(self.params_, np.asarray(X, dtype=np.float64))
        return softmax(logits, axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
