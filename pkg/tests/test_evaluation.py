from __future__ import annotations

import math

import numpy as np
import pytest

from aaisynth.classifiers import ClassifierSpec, roc_auc_multiclass
from aaisynth.domain import STYLES, EmbeddingDataset, InterviewEmbedding, ValidationError
from aaisynth.evaluation import (
    DEFAULT_GRID,
    IncrementCurve,
    IncrementPoint,
    cvloo_predictions,
    data_increment_curve,
    evaluate_cvloo,
    evaluate_transfer,
    sample_per_style,
    standard_error,
)
from aaisynth.fixtures import offset_domains

FAST_TREES = {"n_estimators": 25}


def labeled(X, y, domain="human_labeled", prefix="h") -> EmbeddingDataset:
    return EmbeddingDataset.from_entries(
        [InterviewEmbedding(f"{prefix}{i:03d}", X[i], domain, STYLES[int(y[i])]) for i in range(len(y))], X.shape[1]
    )


def test_standard_error_definition():
    v = [0.5, 0.7, 0.6, 0.9]
    assert standard_error(v) == np.std(v, ddof=1) / 2.0
    assert standard_error([0.3]) == 0.0


def test_cvloo_concatenates_then_scores():
    X = np.arange(9.0)[:, None]
    y = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
    table = np.random.default_rng(0).dirichlet(np.ones(3), size=9)
    seen = []

    def fit_predict(Xt, yt, Xh):
        seen.append((Xt.shape[0], int(Xh[0, 0])))
        return table[int(Xh[0, 0])][None, :]

    P = cvloo_predictions(X, y, fit_predict)
    assert np.array_equal(P, table)
    assert seen == [(8, i) for i in range(9)]


def test_cvloo_deterministic_model_has_no_se():
    rng = np.random.default_rng(0)
    y = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2])
    X = rng.normal(size=(9, 4)) + np.eye(3, 4)[y] * 3
    r = evaluate_cvloo(labeled(X, y), ClassifierSpec("logreg_l2"))
    assert r.se is None and r.seeds == (0,) and 0 <= r.auc <= 1 and r.protocol == "cvloo"


def test_cvloo_stochastic_has_se_over_ten_seeds():
    rng = np.random.default_rng(1)
    y = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2])
    X = rng.normal(size=(9, 3)) + np.eye(3)[y] * 2
    r = evaluate_cvloo(labeled(X, y), ClassifierSpec("extra_trees", FAST_TREES, seed=4))
    assert r.seeds == tuple(range(4, 14))
    assert r.se == pytest.approx(np.std(r.aucs, ddof=1) / math.sqrt(10), abs=0)
    assert r.auc == pytest.approx(np.mean(r.aucs), abs=0)


def test_cvloo_minimal_two_rows():
    X = np.array([[0.0], [1.0]])
    with pytest.warns(UserWarning):
        r = evaluate_cvloo(labeled(X, np.array([0, 1])), ClassifierSpec("logreg_l2"))
    assert 0 <= r.auc <= 1


def test_cvloo_single_class_dataset_rejected():
    with pytest.raises(ValidationError):
        evaluate_cvloo(labeled(np.zeros((3, 2)), np.zeros(3, dtype=int)), ClassifierSpec("logreg_l2"))


def test_transfer_requires_unlabeled_when_standardized():
    f = offset_domains(0)
    with pytest.raises(ValidationError, match="unlabeled"):
        evaluate_transfer(f.train, f.test, ClassifierSpec("logreg_l2"), standardized=True)


def test_transfer_train_equals_test_on_mock(mock_run):
    syn = mock_run.synthetic
    r = evaluate_transfer(syn, syn, ClassifierSpec("logreg_l2"))
    assert r.auc >= 0.95


def test_transfer_report_reproducible_and_parallel_stable():
    f = offset_domains(3)
    spec = ClassifierSpec("mlp", {"max_iter": 50}, seed=2)
    a = evaluate_transfer(f.train, f.test, spec, True, f.unlabeled, n_seeds=3)
    b = evaluate_transfer(f.train, f.test, spec, True, f.unlabeled, n_seeds=3, workers=3)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict()["datasets"]["standardized"] is True


def test_offset_fixture_shape():
    f = offset_domains(0)
    assert np.linalg.norm(f.offset) >= 5 * f.class_std - 1e-12
    assert len(f.train) == 60 and len(f.test) == 30 and len(f.unlabeled) == 30
    assert all(e.label is None for e in f.unlabeled.entries)


def test_sample_per_style_without_replacement():
    f = offset_domains(0)
    idx = sample_per_style(f.train, 5, np.random.default_rng(0))
    assert len(set(idx)) == 15 and idx == sorted(idx)
    labels = f.train.subset(idx).label_indices()
    assert np.bincount(labels).tolist() == [5, 5, 5]
    with pytest.raises(ValidationError):
        sample_per_style(f.train, 21, np.random.default_rng(0))


def test_increment_curve_validation():
    f = offset_domains(0)
    spec = ClassifierSpec("logreg_l2")
    with pytest.raises(ValidationError):
        data_increment_curve(f.train, f.test, spec, [2], reps=1, unlabeled=f.unlabeled)
    with pytest.raises(ValidationError):
        data_increment_curve(f.train, f.test, spec, [2], reps=2)
    with pytest.raises(ValidationError, match="exceeds"):
        data_increment_curve(f.train, f.test, spec, [25], reps=2, unlabeled=f.unlabeled)
    with pytest.raises(ValidationError):
        IncrementCurve((IncrementPoint(4, 0.5, 0.0), IncrementPoint(4, 0.5, 0.0)), spec)
    assert DEFAULT_GRID == (2, 4, 6, 8, 10, 12, 14, 16, 18, 20)


def test_increment_points_and_full_sample():
    f = offset_domains(1)
    spec = ClassifierSpec("extra_trees", FAST_TREES, seed=3)
    curve = data_increment_curve(f.train, f.test, spec, [2, 10, 20], reps=4, unlabeled=f.unlabeled)
    assert [p.n_per_style for p in curve.points] == [2, 10, 20]
    for p in curve.points:
        assert len(p.aucs) == 4
        assert p.se == np.std(p.aucs, ddof=1) / 2.0
    full = evaluate_transfer(f.train, f.test, spec, True, f.unlabeled, n_seeds=4)
    assert curve.points[-1].aucs == full.aucs
    assert curve.points[-1].mean_auc == full.auc


def test_macro_auc_uses_style_order():
    y = np.array([0, 1, 2])
    assert roc_auc_multiclass(y, np.eye(3), STYLES) == 1.0
