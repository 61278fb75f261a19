from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aaisynth.domain import AgentRecord, AttachmentStyle, ChatMessage, ChildhoodMemory, Role, validate_profile
from aaisynth.mock import MockEmbedder
from aaisynth.retrieval import (
    DegenerateEmbedding,
    MemoryIndex,
    build_query,
    cosine,
    index_memories,
    rank,
    retrieve,
)
from conftest import LEONARD, MEMORY_TAG, mock_gateway


class Table:
    """Embedder returning fixed vectors for known texts."""

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.dim = len(next(iter(self.table.values())))

    def embed(self, texts):
        return np.vstack([self.table[t] for t in texts])


def _agent(contents=None) -> AgentRecord:
    contents = contents or [f"memory number {i} about school" for i in range(10)]
    mems = tuple(ChildhoodMemory(f"1985-01-{i + 1:02d} 10:00:00", c) for i, c in enumerate(contents))
    return AgentRecord("agent-000", validate_profile(LEONARD), AttachmentStyle.SECURE, mems, "gpt-4")


def _msgs(texts):
    return [ChatMessage(Role.INTERVIEWER if i % 2 == 0 else Role.INTERVIEWEE, t, i) for i, t in enumerate(texts)]


def test_index_ten_entries_dim_384():
    gw = mock_gateway()
    idx = index_memories(_agent(), gw.embedder(MEMORY_TAG))
    assert len(idx) == 10 and idx.vectors.shape == (10, 384) and idx.embed_dim == 384
    again = index_memories(_agent(), gw.embedder(MEMORY_TAG))
    assert np.array_equal(idx.vectors, again.vectors)
    with pytest.raises(ValueError):
        idx.vectors[0, 0] = 1.0


def test_index_empty_memories():
    agent = _agent()
    object.__setattr__(agent, "memories", ())
    with pytest.raises(Exception, match="empty memory set"):
        index_memories(agent, MockEmbedder(8))


def test_build_query_windows():
    assert build_query(_msgs(list("abcdef"))) == "c\nd\ne\nf"
    assert build_query(_msgs(["only"])) == "only"
    assert build_query(_msgs(list("abcd"))) == "a\nb\nc\nd"
    with pytest.raises(Exception, match="empty history"):
        build_query([])


def test_toy_cosine_retrieval():
    idx = MemoryIndex("a", ("m1", "m2"), np.array([[1.0, 0.0], [0.0, 1.0]]), 2)
    res = retrieve(idx, "q", 1, Table({"q": [1.0, 0.0]}))
    assert res.ranked == ((0, 1.0),)


def test_ties_prefer_lower_ref():
    idx = MemoryIndex("a", ("m1", "m2", "m3"), np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 1.0]]), 2)
    assert rank(idx.vectors, np.array([1.0, 1.0]), 1).refs() == [1]


def test_k_equals_size_returns_all_sorted():
    vecs = np.array([[1.0, 0.2], [0.1, 1.0], [1.0, 1.0]])
    res = rank(vecs, np.array([1.0, 0.0]), 3)
    assert sorted(res.refs()) == [0, 1, 2]
    scores = [s for _, s in res.ranked]
    assert scores == sorted(scores, reverse=True)


def test_zero_norm_is_error():
    with pytest.raises(DegenerateEmbedding):
        rank(np.array([[1.0, 0.0]]), np.zeros(2))
    with pytest.raises(DegenerateEmbedding):
        rank(np.array([[0.0, 0.0]]), np.ones(2))
    with pytest.raises(DegenerateEmbedding):
        cosine(np.zeros(3), np.ones(3))


def test_index_sidecar_round_trip(tmp_path):
    idx = index_memories(_agent(), MockEmbedder(16))
    idx.save(tmp_path / "a.npz")
    back = MemoryIndex.load(tmp_path / "a.npz")
    assert back.contents == idx.contents and np.array_equal(back.vectors, idx.vectors)


vec = arrays(np.float64, st.integers(2, 6), elements=st.floats(-10, 10, allow_nan=False)).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)


@given(vec)
def test_self_cosine_is_one(v):
    assert abs(cosine(v, v) - 1.0) < 1e-12


@st.composite
def index_and_query(draw):
    d = draw(st.integers(2, 5))
    n = draw(st.integers(1, 12))
    el = st.floats(-5, 5, allow_nan=False).filter(lambda x: abs(x) > 1e-2)
    vecs = draw(arrays(np.float64, (n, d), elements=el))
    q = draw(arrays(np.float64, d, elements=el))
    k = draw(st.integers(1, n + 2))
    scale = draw(arrays(np.float64, n, elements=st.floats(0.1, 100)))
    return vecs, q, k, scale


@given(index_and_query())
def test_rank_matches_exhaustive_sort(case):
    vecs, q, k, _ = case
    res = rank(vecs, q, k)
    scores = [cosine(v, q) for v in vecs]
    oracle = sorted(range(len(vecs)), key=lambda i: (-scores[i], i))[:k]
    got_scores = [s for _, s in res.ranked]
    assert len(res.ranked) == min(k, len(vecs))
    assert got_scores == sorted(got_scores, reverse=True)
    assert all(-1 <= s <= 1 for s in got_scores)
    np.testing.assert_allclose(got_scores, [scores[i] for i in oracle], atol=1e-12)


@given(index_and_query())
def test_scores_scale_invariant(case):
    vecs, q, k, scale = case
    a = rank(vecs, q, k)
    b = rank(vecs * scale[:, None], 3.5 * q, k)
    np.testing.assert_allclose([s for _, s in a.ranked], [s for _, s in b.ranked], atol=1e-12)
