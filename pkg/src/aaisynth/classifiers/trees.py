"""Extremely randomized trees (Geurts et al.), classification with Gini impurity.

Every tree sees the full training sample. At each node ``ceil(sqrt(d))``
non-constant features are drawn without replacement, each gets one threshold
drawn uniformly between its node minimum and maximum, and the candidate with
the largest impurity decrease wins. Leaves keep class frequencies; the forest
averages leaf distributions.

All trees are grown together, one depth level at a time, so the per-node work
is a handful of array operations over the whole frontier instead of a Python
loop per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..domain import ValidationError


@dataclass
class Forest:
    """Flat node arrays shared by all trees; ``roots[t]`` is tree ``t``'s root."""

    roots: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) class frequencies

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id of every (row, tree) pair."""
        node = np.tile(self.roots, (X.shape[0], 1))
        rows = np.repeat(np.arange(X.shape[0]), self.n_trees).reshape(node.shape)
        active = self.left[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[rows[active], self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.left[node] >= 0
        return node

    def tree_proba(self, X: np.ndarray) -> np.ndarray:
        """Per-tree class distributions, shape (n_rows, n_trees, n_classes)."""
        return self.value[self.apply(X)]


def weighted_gini(left_counts: np.ndarray, total: np.ndarray) -> np.ndarray:
    """``n_left * G_left + n_right * G_right`` for class-count arrays ``(..., C)``.

    ``total`` broadcasts against ``left_counts``; minimising this is the same
    as maximising the Gini impurity decrease of the split.
    """
    right_counts = total - left_counts
    nl = left_counts.sum(axis=-1)
    nr = right_counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gl = nl - np.where(nl > 0, (left_counts**2).sum(axis=-1) / nl, 0.0)
        gr = nr - np.where(nr > 0, (right_counts**2).sum(axis=-1) / nr, 0.0)
    return gl + gr


def _first_occurrences(draws: np.ndarray) -> np.ndarray:
    """Mask of entries that are the first occurrence of their value in the row."""
    order = np.argsort(draws, axis=1, kind="stable")
    srt = np.take_along_axis(draws, order, axis=1)
    dup_sorted = np.zeros(draws.shape, dtype=bool)
    dup_sorted[:, 1:] = srt[:, 1:] == srt[:, :-1]
    first = np.ones(draws.shape, dtype=bool)
    np.put_along_axis(first, order, ~dup_sorted, axis=1)
    return first


def _node_ranges(XT: np.ndarray, samples: np.ndarray, starts: np.ndarray, feats: np.ndarray, owner: np.ndarray):
    """Per-node min and max of the given candidate features over the node's samples.

    Works on the transposed design matrix: segment reductions along the last
    axis are much faster than along the first.
    """
    vals = XT[feats[owner].T, samples[None, :]]
    return np.minimum.reduceat(vals, starts, axis=1).T, np.maximum.reduceat(vals, starts, axis=1).T


def _draw_candidates(
    XT: np.ndarray,
    samples: np.ndarray,
    starts: np.ndarray,
    owner: np.ndarray,
    k: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Up to ``k`` distinct non-constant features per frontier node.

    Returns (features, lo, hi, ok) with shape (F, k); ``ok`` marks real
    candidates (a node may have fewer than ``k`` non-constant features).
    The draw is a random sequence of features with duplicates and constant
    features skipped, i.e. a uniform k-subset of the non-constant features.
    """
    F = starts.size
    d = XT.shape[0]
    if d <= k + 8:
        draws = np.argsort(rng.random((F, d)), axis=1)
        first = np.ones(draws.shape, dtype=bool)
        exhaustive = np.ones(F, dtype=bool)
    else:
        draws = rng.integers(0, d, size=(F, k + 8))
        first = _first_occurrences(draws)
        exhaustive = np.zeros(F, dtype=bool)

    lo, hi = _node_ranges(XT, samples, starts, draws, owner)
    valid = first & (hi > lo)
    take = valid & (np.cumsum(valid, axis=1) <= k)

    feats = np.zeros((F, k), dtype=np.int64)
    lo_k = np.zeros((F, k))
    hi_k = np.zeros((F, k))
    ok = np.zeros((F, k), dtype=bool)
    counts = take.sum(axis=1)
    row, col = np.nonzero(take)
    slot = np.cumsum(take, axis=1)[row, col] - 1
    feats[row, slot] = draws[row, col]
    lo_k[row, slot] = lo[row, col]
    hi_k[row, slot] = hi[row, col]
    ok[row, slot] = True

    # rare: the short random sequence ran out before k usable features
    ends = np.append(starts[1:], samples.size)
    for f in np.flatnonzero((counts < k) & ~exhaustive):
        node_rows = samples[starts[f] : ends[f]]
        sub = XT[:, node_rows]
        all_lo, all_hi = sub.min(axis=1), sub.max(axis=1)
        usable = np.flatnonzero(all_hi > all_lo)
        have = feats[f, : counts[f]]
        rest = np.setdiff1d(usable, have)
        extra = rng.permutation(rest)[: k - counts[f]]
        sel = np.concatenate([have, extra])
        feats[f, : sel.size] = sel
        lo_k[f, : sel.size] = all_lo[sel]
        hi_k[f, : sel.size] = all_hi[sel]
        ok[f, : sel.size] = True
    return feats, lo_k, hi_k, ok


class _NodeStore:
    """Growable flat node arrays."""

    def __init__(self, n_classes: int, capacity: int):
        self.size = 0
        self.feature = np.full(capacity, -1, dtype=np.int64)
        self.threshold = np.zeros(capacity)
        self.left = np.full(capacity, -1, dtype=np.int64)
        self.right = np.full(capacity, -1, dtype=np.int64)
        self.counts = np.zeros((capacity, n_classes))

    def add(self, counts: np.ndarray) -> np.ndarray:
        """Append leaves with the given class counts; returns their ids."""
        m = counts.shape[0]
        need = self.size + m
        if need > self.feature.size:
            cap = max(need, 2 * self.feature.size)
            grow = cap - self.feature.size
            self.feature = np.concatenate([self.feature, np.full(grow, -1, dtype=np.int64)])
            self.threshold = np.concatenate([self.threshold, np.zeros(grow)])
            self.left = np.concatenate([self.left, np.full(grow, -1, dtype=np.int64)])
            self.right = np.concatenate([self.right, np.full(grow, -1, dtype=np.int64)])
            self.counts = np.concatenate([self.counts, np.zeros((grow, self.counts.shape[1]))])
        ids = np.arange(self.size, need)
        self.counts[ids] = counts
        self.size = need
        return ids


def build_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_trees: int,
    max_features: int,
    rng: np.random.Generator,
    min_samples_split: int = 2,
) -> Forest:
    n = X.shape[0]
    XT = np.ascontiguousarray(X.T)
    onehot = np.eye(n_classes)[y]
    store = _NodeStore(n_classes, 4 * n_trees)
    roots = store.add(np.tile(onehot.sum(axis=0), (n_trees, 1)))

    # members of the current frontier, grouped by node id (ascending)
    mem_node = np.repeat(roots, n)
    mem_sample = np.tile(np.arange(n), n_trees)

    while mem_node.size:
        node_counts = store.counts[mem_node]
        splittable = (node_counts.sum(axis=1) >= min_samples_split) & (np.count_nonzero(node_counts, axis=1) > 1)
        mem_node, mem_sample = mem_node[splittable], mem_sample[splittable]
        if not mem_node.size:
            break

        starts = np.flatnonzero(np.r_[True, mem_node[1:] != mem_node[:-1]])
        frontier = mem_node[starts]
        owner = np.repeat(np.arange(frontier.size), np.diff(np.append(starts, mem_node.size)))

        feats, lo, hi, ok = _draw_candidates(XT, mem_sample, starts, owner, max_features, rng)
        thr = rng.uniform(lo, hi)
        thr = np.where(thr >= hi, lo, thr)

        # (k, members) layout for fast segment sums
        goes_left = XT[feats[owner].T, mem_sample[None, :]] <= thr[owner].T
        member_class = y[mem_sample]
        left_counts = np.stack(
            [
                np.add.reduceat(goes_left & (member_class == c)[None, :], starts, axis=1, dtype=np.int64).T
                for c in range(n_classes)
            ],
            axis=-1,
        ).astype(np.float64)
        totals = store.counts[frontier]
        score = np.where(ok, weighted_gini(left_counts, totals[:, None, :]), np.inf)
        best = np.argmin(score, axis=1)

        # nodes whose features are all constant stay leaves
        split = np.flatnonzero(ok.any(axis=1))
        parents = frontier[split]
        lc = left_counts[split, best[split]]
        children = store.add(np.stack([lc, totals[split] - lc], axis=1).reshape(-1, n_classes))
        store.feature[parents] = feats[split, best[split]]
        store.threshold[parents] = thr[split, best[split]]
        store.left[parents] = children[0::2]
        store.right[parents] = children[1::2]

        rank = np.full(frontier.size, -1)
        rank[split] = np.arange(split.size)
        went_right = ~goes_left[best[owner], np.arange(owner.size)]
        keep = rank[owner] >= 0
        mem_node = children[2 * rank[owner[keep]] + went_right[keep]]
        mem_sample = mem_sample[keep]
        order = np.argsort(mem_node, kind="stable")
        mem_node, mem_sample = mem_node[order], mem_sample[order]

    m = store.size
    counts = store.counts[:m]
    return Forest(
        roots,
        store.feature[:m].copy(),
        store.threshold[:m].copy(),
        store.left[:m].copy(),
        store.right[:m].copy(),
        counts / counts.sum(axis=1, keepdims=True),
    )


@dataclass
class ExtraTreesClassifier:
    n_estimators: int = 500
    min_samples_split: int = 2
    max_features: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0
    forest_: Forest | None = field(init=False, repr=False, default=None)
    classes_: np.ndarray = field(init=False, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "ExtraTreesClassifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValidationError("extra trees need at least two classes")
        k = self.max_features or math.ceil(math.sqrt(X.shape[1]))
        k = max(1, min(k, X.shape[1]))
        rng = np.random.default_rng(self.seed)
        self.forest_ = build_forest(X, codes, self.classes_.size, self.n_estimators, k, rng, self.min_samples_split)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.forest_.tree_proba(np.asarray(X, dtype=np.float64)).mean(axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
