"""Constructed Gaussian datasets with a known answer, for protocol checks.

``offset_domains`` builds a labeled "synthetic" training domain, a labeled
"human" test domain and an unlabeled human reference set. The two domains share
class structure and differ only by one global mean offset, so any transfer gap
is caused by the offset alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import STYLES, EmbeddingDataset, InterviewEmbedding


@dataclass(frozen=True)
class OffsetDomains:
    train: EmbeddingDataset
    test: EmbeddingDataset
    unlabeled: EmbeddingDataset
    offset: np.ndarray
    class_std: float


def offset_domains(
    seed: int,
    dim: int = 2,
    n_train_per_style: int = 20,
    n_test_per_style: int = 10,
    n_unlabeled: int = 30,
    class_separation: float = 1.5,
    class_std: float = 1.0,
    offset_ratio: float = 5.0,
) -> OffsetDomains:
    """Three Gaussian classes; the training domain is displaced by ``offset_ratio * class_std``."""
    rng = np.random.default_rng(seed)
    # class means on an equilateral triangle of the given radius, randomly rotated
    angles = 2 * np.pi * np.arange(len(STYLES)) / len(STYLES)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    centers = class_separation * np.column_stack([np.cos(angles), np.sin(angles)]) @ basis.T
    direction = rng.normal(size=dim)
    offset = offset_ratio * class_std * direction / np.linalg.norm(direction)

    def draw(n_per_style: int, shift: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = np.repeat(np.arange(len(STYLES)), n_per_style)
        return centers[y] + class_std * rng.normal(size=(y.size, dim)) + shift, y

    def dataset(X: np.ndarray, y: np.ndarray | None, domain: str, prefix: str) -> EmbeddingDataset:
        entries = [
            InterviewEmbedding(f"{prefix}-{i:04d}", X[i], domain, None if y is None else STYLES[int(y[i])])
            for i in range(X.shape[0])
        ]
        return EmbeddingDataset.from_entries(entries, dim)

    Xs, ys = draw(n_train_per_style, offset)
    Xh, yh = draw(n_test_per_style, np.zeros(dim))
    Xu, _ = draw(-(-n_unlabeled // len(STYLES)), np.zeros(dim))
    Xu = Xu[rng.permutation(Xu.shape[0])[:n_unlabeled]]
    return OffsetDomains(
        dataset(Xs, ys, "synthetic:fixture", "syn"),
        dataset(Xh, yh, "human_labeled", "hum"),
        dataset(Xu, None, "human_unlabeled", "unl"),
        offset,
        class_std,
    )
