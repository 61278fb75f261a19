"""Per-agent memory index with exhaustive cosine-similarity retrieval."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .domain import AgentRecord, ChatMessage, ValidationError

QUERY_WINDOW = 4
DEFAULT_K = 3


class DegenerateEmbedding(ValidationError):
    """A zero-norm vector reached the similarity computation."""


class Embedder(Protocol):
    @property
    def dim(self) -> int: ...

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DegenerateEmbedding("cosine similarity of a zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class MemoryIndex:
    agent_id: str
    contents: tuple[str, ...]
    vectors: np.ndarray
    embed_dim: int

    def __post_init__(self) -> None:
        vecs = np.array(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape != (len(self.contents), self.embed_dim):
            raise ValidationError(
                f"index vectors have shape {vecs.shape}, expected {(len(self.contents), self.embed_dim)}"
            )
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.contents)

    def save(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(tmp, agent_id=self.agent_id, contents=np.array(self.contents, dtype=object), vectors=self.vectors)
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path | str) -> "MemoryIndex":
        with np.load(path, allow_pickle=True) as z:
            vectors = z["vectors"]
            return cls(str(z["agent_id"]), tuple(str(c) for c in z["contents"]), vectors, vectors.shape[1])


@dataclass(frozen=True)
class RetrievalResult:
    """``ranked`` holds ``(memory_ref, score)`` pairs; ``memory_ref`` is the memory's position."""

    ranked: tuple[tuple[int, float], ...]

    def refs(self) -> list[int]:
        return [r for r, _ in self.ranked]


def index_memories(agent: AgentRecord, embedder: Embedder) -> MemoryIndex:
    if not agent.memories:
        raise ValidationError(f"agent {agent.agent_id} has an empty memory set")
    contents = tuple(m.content for m in agent.memories)
    vectors = np.asarray(embedder.embed(contents), dtype=np.float64)
    return MemoryIndex(agent.agent_id, contents, vectors, vectors.shape[1])


def build_query(history: Sequence[ChatMessage], window: int = QUERY_WINDOW) -> str:
    """Texts of the last ``window`` messages, oldest first, one per line."""
    if not history:
        raise ValidationError("cannot build a retrieval query from an empty history")
    return "\n".join(m.text for m in history[-window:])


def rank(vectors: np.ndarray, query_vec: np.ndarray, k: int = DEFAULT_K) -> RetrievalResult:
    if k < 1:
        raise ValidationError("k must be at least 1")
    if len(vectors) == 0:
        raise ValidationError("cannot retrieve from an empty index")
    qn = np.linalg.norm(query_vec)
    norms = np.linalg.norm(vectors, axis=1)
    if qn == 0:
        raise DegenerateEmbedding("query embedding has zero norm")
    if np.any(norms == 0):
        raise DegenerateEmbedding(f"index entries {np.flatnonzero(norms == 0).tolist()} have zero norm")
    scores = np.clip(vectors @ query_vec / (norms * qn), -1.0, 1.0)
    # lexsort: last key is primary -> descending score, then ascending ref
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    return RetrievalResult(tuple((int(i), float(scores[i])) for i in order))


def retrieve(index: MemoryIndex, query: str, k: int = DEFAULT_K, embedder: Embedder | None = None) -> RetrievalResult:
    if embedder is None:
        raise ValidationError("retrieve needs the embedder that built the index")
    qv = np.asarray(embedder.embed([query]), dtype=np.float64)[0]
    if qv.shape != (index.embed_dim,):
        raise ValidationError(f"query dim {qv.shape[0]} does not match index dim {index.embed_dim}")
    return rank(index.vectors, qv, k)
