"""Evaluation protocols: human-only leave-one-out, synthetic-to-human transfer,
and the synthetic data-increment curve.

Stochastic classifiers are repeated over ``n_seeds`` consecutive seeds starting
at ``spec.seed``; the reported standard error is the sample standard deviation
of the per-seed AUCs divided by the square root of the repeat count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from .alignment import standardize
from .classifiers import ClassifierSpec, fit_predict_proba, roc_auc_multiclass
from .domain import STYLES, EmbeddingDataset, ValidationError

N_SEEDS = 10
DEFAULT_GRID = tuple(range(2, 21, 2))
DEFAULT_REPS = 10

T = TypeVar("T")
R = TypeVar("R")


def _ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def standard_error(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    auc: float
    se: float | None
    spec: ClassifierSpec
    datasets: dict[str, Any]
    aucs: tuple[float, ...] = ()
    seeds: tuple[int, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "auc": self.auc,
            "se": self.se,
            "spec": self.spec.to_dict(),
            "datasets": self.datasets,
            "aucs": list(self.aucs),
            "seeds": list(self.seeds),
        }


def _seeds(spec: ClassifierSpec, n_seeds: int) -> list[int]:
    return [spec.seed + i for i in range(n_seeds)] if spec.stochastic else [spec.seed]


def _summarise(protocol: str, spec: ClassifierSpec, seeds: list[int], aucs: list[float], datasets: dict) -> EvalReport:
    se = standard_error(aucs) if spec.stochastic else None
    return EvalReport(protocol, float(np.mean(aucs)), se, spec, datasets, tuple(aucs), tuple(seeds))


# --------------------------------------------------------------------------
# leave-one-out on labeled human data
# --------------------------------------------------------------------------

FitPredict = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def cvloo_predictions(X: np.ndarray, y: np.ndarray, fit_predict: FitPredict, workers: int = 1) -> np.ndarray:
    """Held-out probability row for every entry, stacked in entry order."""
    n = X.shape[0]
    if n < 2:
        raise ValidationError("leave-one-out needs at least two rows")

    def split(i: int) -> np.ndarray:
        keep = np.arange(n) != i
        return np.asarray(fit_predict(X[keep], y[keep], X[i : i + 1]))[0]

    return np.vstack(_ordered_map(split, list(range(n)), workers))


def evaluate_cvloo(
    human: EmbeddingDataset,
    spec: ClassifierSpec,
    n_seeds: int = N_SEEDS,
    workers: int = 1,
) -> EvalReport:
    """Concatenate the N held-out predictions, then score one multiclass AUC."""
    X = human.matrix()
    y = human.label_indices()
    if np.unique(y).size < 2:
        raise ValidationError("leave-one-out evaluation needs at least two classes")
    k = len(STYLES)
    seeds = _seeds(spec, n_seeds)

    def one_seed(seed: int) -> float:
        P = cvloo_predictions(X, y, lambda Xt, yt, Xh: fit_predict_proba(spec, Xt, yt, Xh, k, seed))
        return roc_auc_multiclass(y, P, STYLES)

    aucs = _ordered_map(one_seed, seeds, workers)
    return _summarise("cvloo", spec, seeds, aucs, {"test": human.descriptor()})


# --------------------------------------------------------------------------
# synthetic -> human transfer
# --------------------------------------------------------------------------


def evaluate_transfer(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    spec: ClassifierSpec,
    standardized: bool = False,
    unlabeled: EmbeddingDataset | None = None,
    n_seeds: int = N_SEEDS,
    workers: int = 1,
) -> EvalReport:
    if standardized:
        if unlabeled is None:
            raise ValidationError("standardized transfer needs the unlabeled human dataset")
        train = standardize(train, unlabeled)
    X_train, y_train = train.matrix(), train.label_indices()
    X_test, y_test = test.matrix(), test.label_indices()
    k = len(STYLES)
    seeds = _seeds(spec, n_seeds)

    def one_seed(seed: int) -> float:
        return roc_auc_multiclass(y_test, fit_predict_proba(spec, X_train, y_train, X_test, k, seed), STYLES)

    aucs = _ordered_map(one_seed, seeds, workers)
    datasets = {"train": train.descriptor(), "test": test.descriptor(), "standardized": standardized}
    if unlabeled is not None and standardized:
        datasets["unlabeled"] = unlabeled.descriptor()
    return _summarise("transfer", spec, seeds, aucs, datasets)


# --------------------------------------------------------------------------
# data increment
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IncrementPoint:
    n_per_style: int
    mean_auc: float
    se: float
    aucs: tuple[float, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class IncrementCurve:
    points: tuple[IncrementPoint, ...]
    spec: ClassifierSpec
    datasets: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ns = [p.n_per_style for p in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValidationError("increment grid must be strictly increasing")

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": "increment",
            "spec": self.spec.to_dict(),
            "datasets": self.datasets,
            "points": [
                {"n_per_style": p.n_per_style, "mean_auc": p.mean_auc, "se": p.se, "aucs": list(p.aucs)}
                for p in self.points
            ],
        }


def sample_per_style(ds: EmbeddingDataset, n: int, rng: np.random.Generator) -> list[int]:
    """``n`` entries per style without replacement, returned in dataset order."""
    y = ds.label_indices()
    picked: list[int] = []
    for c in range(len(STYLES)):
        pool = np.flatnonzero(y == c)
        if n > pool.size:
            raise ValidationError(f"requested {n} interviews of style {STYLES[c].value}, only {pool.size} available")
        picked.extend(rng.choice(pool, size=n, replace=False).tolist())
    return sorted(picked)


def data_increment_curve(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    spec: ClassifierSpec,
    grid: Iterable[int] = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    unlabeled: EmbeddingDataset | None = None,
    workers: int = 1,
) -> IncrementCurve:
    """Resample ``n`` per style, standardize the sample, evaluate; ``reps`` times per ``n``.

    Repeat ``r`` trains with seed ``spec.seed + r``, so the point where the
    sample is the whole dataset reproduces :func:`evaluate_transfer` exactly
    when ``reps`` equals its seed count.
    """
    grid = list(grid)
    if reps < 2:
        raise ValidationError("increment experiment needs at least two repetitions")
    if unlabeled is None:
        raise ValidationError("increment experiment standardizes each sample; pass the unlabeled human set")
    X_test, y_test = test.matrix(), test.label_indices()
    k = len(STYLES)
    available = min(train.style_counts().values())
    for n in grid:
        if n > available:
            raise ValidationError(f"grid value {n} exceeds per-style availability {available}")

    points = []
    for n in grid:

        def one_rep(r: int, n: int = n) -> float:
            rng = np.random.default_rng([spec.seed, n, r])
            sample = standardize(train.subset(sample_per_style(train, n, rng)), unlabeled)
            proba = fit_predict_proba(spec, sample.matrix(), sample.label_indices(), X_test, k, spec.seed + r)
            return roc_auc_multiclass(y_test, proba, STYLES)

        aucs = _ordered_map(one_rep, list(range(reps)), workers)
        points.append(IncrementPoint(n, float(np.mean(aucs)), standard_error(aucs), tuple(aucs)))
    return IncrementCurve(
        tuple(points),
        spec,
        {"train": train.descriptor(), "test": test.descriptor(), "unlabeled": unlabeled.descriptor(), "reps": reps},
    )
