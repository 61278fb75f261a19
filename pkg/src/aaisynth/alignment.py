"""Mean-shift standardization, within-style diversity, and 2D projection."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .domain import STYLES, AttachmentStyle, EmbeddingDataset, ValidationError

log = logging.getLogger(__name__)


def mean_vector(vs: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    if len(vs) == 0:
        raise ValidationError("mean of an empty vector set")
    dims = {np.shape(v) for v in vs}
    if len(dims) != 1:
        raise ValidationError(f"dimension mismatch among vectors: {sorted(dims)}")
    return np.mean(np.asarray(vs, dtype=np.float64), axis=0)


def _grid_exponents(X: np.ndarray) -> np.ndarray:
    """Per column, the largest ``g`` with every entry an integer multiple of ``2**g``.

    All-zero columns get a huge sentinel so that any grid accepts them.
    """
    mant, exp = np.frexp(X)
    ints = np.abs(np.ldexp(mant, 53)).astype(np.int64)
    low = ints & -ints
    with np.errstate(divide="ignore"):
        tz = np.log2(low.astype(np.float64))
    g = np.where(ints != 0, exp.astype(np.float64) - 53 + tz, np.inf)
    return g.min(axis=0)


def _snap_delta(X: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Round each shift component so that adding it to its column is exact.

    For a column with values on the grid ``2**g`` and ``|x| + |d| < 2**e``, a
    shift rounded to the grid ``2**(e - 53)`` makes every ``x + d`` an exact
    53-bit sum, provided ``g >= e - 53``. Then differences between shifted rows
    are bit-identical to differences between the originals. The rounding moves
    the shift by at most half an ulp of the largest sum. Columns whose values
    use too many bits (generic float64 data) keep the plain shift.
    """
    g = _grid_exponents(X)
    m = np.abs(X).max(axis=0)
    top = m + np.abs(delta)
    usable = np.isfinite(g) & np.isfinite(top) & (top > 0)
    h = np.frexp(np.where(usable, top, 1.0))[1].astype(np.int64) - 53
    snapped = np.ldexp(np.rint(np.ldexp(delta, -h)), h)
    # rounding up may carry the largest sum into the next binade
    carry = m + np.abs(snapped) >= np.ldexp(1.0, h + 53)
    h = np.where(carry, h + 1, h)
    snapped = np.where(carry, np.ldexp(np.rint(np.ldexp(delta, -h)), h), snapped)
    return np.where(usable & (g >= h), snapped, delta)


@dataclass(frozen=True)
class ShiftVector:
    delta: np.ndarray
    u_source_count: int
    s_source_count: int

    def __post_init__(self) -> None:
        if self.u_source_count < 1 or self.s_source_count < 1:
            raise ValidationError("shift needs at least one vector on each side")


def compute_shift(synthetic: EmbeddingDataset, unlabeled_human: EmbeddingDataset) -> ShiftVector:
    if len(synthetic) == 0 or len(unlabeled_human) == 0:
        raise ValidationError("standardization needs non-empty synthetic and unlabeled human datasets")
    if synthetic.embed_dim != unlabeled_human.embed_dim:
        raise ValidationError(
            f"dimension mismatch: synthetic {synthetic.embed_dim} vs human {unlabeled_human.embed_dim}"
        )
    if any(e.label is not None for e in unlabeled_human.entries):
        raise ValidationError("the human reference set for standardization must be unlabeled")
    S = synthetic.matrix()
    u = mean_vector(unlabeled_human.matrix())
    s = mean_vector(S)
    return ShiftVector(_snap_delta(S, u - s), len(unlabeled_human), len(synthetic))


def standardize(synthetic: EmbeddingDataset, unlabeled_human: EmbeddingDataset) -> EmbeddingDataset:
    """Translate every synthetic vector by (human mean - synthetic mean)."""
    shift = compute_shift(synthetic, unlabeled_human)
    return synthetic.with_vectors(synthetic.matrix() + shift.delta)


# --------------------------------------------------------------------------
# diversity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilaritySummary:
    mean: float
    std: float
    min: float
    max: float
    count: int

    @classmethod
    def of(cls, values: np.ndarray) -> "SimilaritySummary":
        if values.size == 0:
            return cls(math.nan, math.nan, math.nan, math.nan, 0)
        return cls(float(values.mean()), float(values.std()), float(values.min()), float(values.max()), int(values.size))


@dataclass(frozen=True)
class DiversityGroup:
    source: str
    style: AttachmentStyle
    n_interviews: int
    similarities: np.ndarray = field(compare=False)

    @property
    def summary(self) -> SimilaritySummary:
        return SimilaritySummary.of(self.similarities)


@dataclass(frozen=True)
class DiversityReport:
    groups: tuple[DiversityGroup, ...]

    def group(self, source: str, style: AttachmentStyle) -> DiversityGroup:
        for g in self.groups:
            if g.source == source and g.style is style:
                return g
        raise KeyError((source, style))

    def to_dict(self) -> dict[str, Any]:
        return {
            "groups": [
                {
                    "source": g.source,
                    "style": g.style.value,
                    "n_interviews": g.n_interviews,
                    "summary": g.summary.__dict__,
                    "similarities": g.similarities.tolist(),
                }
                for g in self.groups
            ]
        }


def pairwise_cosines(X: np.ndarray) -> np.ndarray:
    """Cosine similarity of every unordered pair, in (i, j>i) row-major order."""
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValidationError("zero-norm embedding in diversity computation")
    U = X / norms[:, None]
    iu = np.triu_indices(len(X), k=1)
    return np.clip((U @ U.T)[iu], -1.0, 1.0)


def pairwise_cosine_by_style(ds: EmbeddingDataset) -> DiversityReport:
    buckets: dict[tuple[str, AttachmentStyle], list[np.ndarray]] = {}
    for e in ds.entries:
        if e.label is None:
            raise ValidationError(f"{e.interview_id} is unlabeled; diversity is computed per style")
        buckets.setdefault((e.domain, e.label), []).append(e.vector)
    groups = []
    for source in sorted({k[0] for k in buckets}):
        for style in STYLES:
            vecs = buckets.get((source, style), [])
            if not vecs:
                continue
            if len(vecs) < 2:
                log.warning("%s/%s has %d interview(s); no pairs to compare", source, style.value, len(vecs))
                sims = np.zeros(0)
            else:
                sims = pairwise_cosines(np.vstack(vecs))
            groups.append(DiversityGroup(source, style, len(vecs), sims))
    return DiversityReport(tuple(groups))


# --------------------------------------------------------------------------
# projection
# --------------------------------------------------------------------------

Projector = Callable[[np.ndarray], np.ndarray]


class DegenerateProjection(ValidationError):
    pass


def pca_2d(X: np.ndarray, allow_degenerate: bool = False, rtol: float = 1e-10) -> np.ndarray:
    """Coordinates on the top two principal directions of the centred data.

    Each axis is oriented so its largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise DegenerateProjection(f"projection needs at least 3 points, got {X.shape[0] if X.ndim else 0}")
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    if s.size == 0 or s[0] <= 0 or s[0] < rtol * max(1.0, np.abs(X).max()):
        raise DegenerateProjection("data has zero variance")
    axes = Vt[:2].copy()
    if axes.shape[0] < 2 or s[1] <= rtol * s[0]:
        if not allow_degenerate:
            raise DegenerateProjection("second principal direction carries no variance")
        coords = np.zeros((X.shape[0], 2))
        coords[:, 0] = Xc @ _orient(axes[0])
        return coords
    for i in range(2):
        axes[i] = _orient(axes[i])
    return Xc @ axes.T


def _orient(axis: np.ndarray) -> np.ndarray:
    return axis if axis[np.argmax(np.abs(axis))] > 0 else -axis


@dataclass(frozen=True)
class ProjectedPoint:
    interview_id: str
    x: float
    y: float
    domain: str
    label: str


@dataclass(frozen=True)
class Projection2D:
    points: tuple[ProjectedPoint, ...]

    def coords(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["interview_id", "x", "y", "domain", "label"])
        for p in self.points:
            w.writerow([p.interview_id, repr(p.x), repr(p.y), p.domain, p.label])
        return buf.getvalue()


def project_2d(datasets: Iterable[EmbeddingDataset], method: Projector | None = None) -> Projection2D:
    datasets = list(datasets)
    dims = {d.embed_dim for d in datasets if len(d)}
    if len(dims) > 1:
        raise ValidationError(f"datasets disagree on dimension: {sorted(dims)}")
    entries = [e for d in datasets for e in d.entries]
    X = np.vstack([e.vector for e in entries]) if entries else np.zeros((0, 0))
    coords = (method or pca_2d)(X)
    return Projection2D(
        tuple(
            ProjectedPoint(e.interview_id, float(c[0]), float(c[1]), e.domain, e.label.value if e.label else "")
            for e, c in zip(entries, coords)
        )
    )
