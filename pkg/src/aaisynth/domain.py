"""Shared value types: attachment styles, profiles, memories, transcripts, agents.

Every type round-trips through ``to_dict``/``from_dict``; the on-disk form is
one JSON object per line (see :mod:`aaisynth.io`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Any, Iterable, Mapping

import numpy as np

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
PROFILE_AGE_RANGE = (18, 100)
MEMORIES_PER_AGENT = 10
AAI_QUESTION_COUNT = 19


class ValidationError(ValueError):
    """Raised when a record does not satisfy a domain invariant."""


class AttachmentStyle(str, enum.Enum):
    AVOIDANT = "avoidant"
    SECURE = "secure"
    PREOCCUPIED = "preoccupied"

    def __str__(self) -> str:
        return self.value


STYLES: tuple[AttachmentStyle, ...] = tuple(AttachmentStyle)


def parse_attachment_style(s: str | AttachmentStyle) -> AttachmentStyle:
    """Case-insensitive lookup; anything outside the three-class scheme is rejected."""
    if isinstance(s, AttachmentStyle):
        return s
    key = str(s).strip().lower()
    for style in AttachmentStyle:
        if style.value == key:
            return style
    valid = ", ".join(st.value for st in AttachmentStyle)
    raise ValidationError(f"unknown attachment style {s!r}; valid styles: {valid}")


PROFILE_KEYS: tuple[str, ...] = (
    "name",
    "age",
    "race",
    "gender",
    "dob",
    "birthplace",
    "current_job",
    "places_lived",
    "children",
    "siblings",
    "fathers_jobs",
    "mothers_jobs",
    "father_adjectives",
    "mother_adjectives",
)


@dataclass(frozen=True)
class UserProfile:
    name: str
    age: int
    race: str
    gender: str
    dob: str
    birthplace: str
    current_job: str
    places_lived: str
    children: str
    siblings: str
    fathers_jobs: str
    mothers_jobs: str
    father_adjectives: str
    mother_adjectives: str

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in PROFILE_KEYS}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "UserProfile":
        return validate_profile(d)


def _coerce_text(key: str, value: Any) -> str:
    # LLMs sometimes emit lists for the comma-separated fields
    if isinstance(value, (list, tuple)):
        value = ", ".join(str(v) for v in value)
    if isinstance(value, bool) or value is None:
        raise ValidationError(f"profile field {key!r} has invalid value {value!r}")
    text = str(value).strip()
    if not text:
        raise ValidationError(f"profile field {key!r} is empty")
    return text


def validate_profile(p: Mapping[str, Any]) -> UserProfile:
    """Check a raw key/value record against the 14-key profile contract.

    Age must be an integer in [18, 100] (an int or a numeric string), dob must be
    a ``YYYY-MM-DD`` calendar date. Age/dob consistency is not checked.
    """
    if not isinstance(p, Mapping):
        raise ValidationError(f"profile must be a JSON object, got {type(p).__name__}")
    for key in PROFILE_KEYS:
        if key not in p:
            raise ValidationError(f"profile is missing key {key!r}")

    raw_age = p["age"]
    if isinstance(raw_age, bool):
        raise ValidationError(f"profile age {raw_age!r} is not an integer")
    if isinstance(raw_age, float) and raw_age.is_integer():
        raw_age = int(raw_age)
    if isinstance(raw_age, str):
        try:
            raw_age = int(raw_age.strip())
        except ValueError:
            raise ValidationError(f"profile age {p['age']!r} is not an integer") from None
    if not isinstance(raw_age, int):
        raise ValidationError(f"profile age {p['age']!r} is not an integer")
    lo, hi = PROFILE_AGE_RANGE
    if not lo <= raw_age <= hi:
        raise ValidationError(f"profile age {raw_age} outside [{lo}, {hi}]")

    dob = _coerce_text("dob", p["dob"])
    try:
        date.fromisoformat(dob)
    except ValueError:
        raise ValidationError(f"profile dob {dob!r} is not a YYYY-MM-DD date") from None

    fields_ = {k: _coerce_text(k, p[k]) for k in PROFILE_KEYS if k not in ("age", "dob")}
    return UserProfile(age=raw_age, dob=dob, **fields_)


@dataclass(frozen=True)
class ChildhoodMemory:
    creation_timestamp: str
    content: str

    def timestamp(self) -> datetime:
        return datetime.strptime(self.creation_timestamp, TIMESTAMP_FORMAT)

    def to_dict(self) -> dict[str, str]:
        return {"creation_timestamp": self.creation_timestamp, "content": self.content}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], reference: datetime | None = None) -> "ChildhoodMemory":
        return validate_memory(d, reference)


def validate_memory(d: Mapping[str, Any], reference: datetime | None = None) -> ChildhoodMemory:
    if not isinstance(d, Mapping):
        raise ValidationError("memory must be a JSON object")
    try:
        ts_raw, content = d["creation_timestamp"], d["content"]
    except KeyError as exc:
        raise ValidationError(f"memory is missing key {exc.args[0]!r}") from None
    content = str(content).strip()
    if not content:
        raise ValidationError("memory content is empty")
    try:
        ts = datetime.strptime(str(ts_raw).strip(), TIMESTAMP_FORMAT)
    except ValueError:
        raise ValidationError(f"memory timestamp {ts_raw!r} is not YYYY-MM-DD HH:mm:SS") from None
    if reference is not None and not ts < reference:
        raise ValidationError(
            f"memory timestamp {ts_raw} is not earlier than reference {reference:{TIMESTAMP_FORMAT}}"
        )
    return ChildhoodMemory(ts.strftime(TIMESTAMP_FORMAT), content)


class Role(str, enum.Enum):
    INTERVIEWER = "interviewer"
    INTERVIEWEE = "interviewee"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    text: str
    turn_index: int

    def to_dict(self) -> dict[str, Any]:
        return {"role": self.role.value, "text": self.text, "turn_index": self.turn_index}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ChatMessage":
        try:
            role = Role(str(d["role"]).lower())
        except ValueError:
            raise ValidationError(f"unknown role {d['role']!r}") from None
        return cls(role, str(d["text"]), int(d["turn_index"]))


HUMAN_SOURCE = "human"
SYNTHETIC_PREFIX = "synthetic:"


def synthetic_source(model_tag: str) -> str:
    return SYNTHETIC_PREFIX + model_tag


def check_alternation(turns: Iterable[ChatMessage]) -> None:
    """Turn indices strictly increase; roles alternate starting with the interviewer."""
    prev = -1
    for i, msg in enumerate(turns):
        expected = Role.INTERVIEWER if i % 2 == 0 else Role.INTERVIEWEE
        if msg.role is not expected:
            raise ValidationError(f"turn {i} has role {msg.role.value}, expected {expected.value}")
        if msg.turn_index <= prev:
            raise ValidationError(f"turn_index {msg.turn_index} does not increase (previous {prev})")
        prev = msg.turn_index


@dataclass(frozen=True)
class InterviewTranscript:
    interview_id: str
    source: str
    turns: tuple[ChatMessage, ...]
    label: AttachmentStyle | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))
        if not (self.source == HUMAN_SOURCE or self.source.startswith(SYNTHETIC_PREFIX)):
            raise ValidationError(f"unknown transcript source {self.source!r}")
        check_alternation(self.turns)
        if len(self.turns) % 2:
            raise ValidationError("transcript ends on an unanswered interviewer turn")
        if len(self.turns) < 2:
            raise ValidationError("transcript has no question/answer pair")

    @property
    def n_pairs(self) -> int:
        return len(self.turns) // 2

    @property
    def is_synthetic(self) -> bool:
        return self.source.startswith(SYNTHETIC_PREFIX)

    @property
    def model_tag(self) -> str | None:
        return self.source[len(SYNTHETIC_PREFIX):] if self.is_synthetic else None

    def answers(self) -> list[str]:
        return [t.text for t in self.turns if t.role is Role.INTERVIEWEE]

    def questions(self) -> list[str]:
        return [t.text for t in self.turns if t.role is Role.INTERVIEWER]

    def to_dict(self) -> dict[str, Any]:
        return {
            "interview_id": self.interview_id,
            "source": self.source,
            "label": self.label.value if self.label else None,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "InterviewTranscript":
        label = d.get("label")
        return cls(
            interview_id=str(d["interview_id"]),
            source=str(d["source"]),
            turns=tuple(ChatMessage.from_dict(t) for t in d["turns"]),
            label=parse_attachment_style(label) if label else None,
        )


def check_synthetic_length(t: InterviewTranscript, n_questions: int = AAI_QUESTION_COUNT) -> None:
    """Synthetic interviews follow the scripted protocol exactly: one pair per question."""
    if t.is_synthetic and t.n_pairs != n_questions:
        raise ValidationError(
            f"{t.interview_id}: synthetic transcript has {t.n_pairs} question/answer pairs, "
            f"expected {n_questions}"
        )


def unchecked_transcript(
    interview_id: str, source: str, turns: Iterable[ChatMessage], label: AttachmentStyle | None
) -> InterviewTranscript:
    """Build a transcript that may be partial (used for error reporting only)."""
    obj = object.__new__(InterviewTranscript)
    object.__setattr__(obj, "interview_id", interview_id)
    object.__setattr__(obj, "source", source)
    object.__setattr__(obj, "turns", tuple(turns))
    object.__setattr__(obj, "label", label)
    return obj


@dataclass(frozen=True)
class AgentRecord:
    agent_id: str
    profile: UserProfile
    style: AttachmentStyle
    memories: tuple[ChildhoodMemory, ...]
    model_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "memories", tuple(self.memories))
        if len(self.memories) != MEMORIES_PER_AGENT:
            raise ValidationError(
                f"agent {self.agent_id} has {len(self.memories)} memories, expected {MEMORIES_PER_AGENT}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "profile": self.profile.to_dict(),
            "style": self.style.value,
            "memories": [m.to_dict() for m in self.memories],
            "model_tag": self.model_tag,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AgentRecord":
        return cls(
            agent_id=str(d["agent_id"]),
            profile=validate_profile(d["profile"]),
            style=parse_attachment_style(d["style"]),
            memories=tuple(validate_memory(m) for m in d["memories"]),
            model_tag=str(d["model_tag"]),
        )


def as_vector(components: Iterable[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate and freeze an embedding vector (finite float64, expected dim)."""
    v = np.array(components, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"vector must be a non-empty 1-D array, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise ValidationError(f"vector has dim {v.size}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector has non-finite components")
    v.setflags(write=False)
    return v


def is_finite_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.input_tokens + other.input_tokens, self.output_tokens + other.output_tokens)

    def to_dict(self) -> dict[str, int]:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}


@dataclass(frozen=True)
class InterviewEmbedding:
    interview_id: str
    vector: np.ndarray = field(compare=False)
    domain: str
    label: AttachmentStyle | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", as_vector(self.vector))
        if self.domain == "human_labeled" and self.label is None:
            raise ValidationError(f"{self.interview_id}: human_labeled entry has no label")
        if self.domain == "human_unlabeled" and self.label is not None:
            raise ValidationError(f"{self.interview_id}: human_unlabeled entry carries a label")
        if self.domain not in ("human_labeled", "human_unlabeled") and not self.domain.startswith(
            SYNTHETIC_PREFIX
        ):
            raise ValidationError(f"unknown embedding domain {self.domain!r}")

    @property
    def model_tag(self) -> str | None:
        if self.domain.startswith(SYNTHETIC_PREFIX):
            return self.domain[len(SYNTHETIC_PREFIX):]
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "interview_id": self.interview_id,
            "domain": self.domain,
            "label": self.label.value if self.label else None,
            "vector": self.vector.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "InterviewEmbedding":
        label = d.get("label")
        return cls(
            interview_id=str(d["interview_id"]),
            vector=d["vector"],
            domain=str(d["domain"]),
            label=parse_attachment_style(label) if label else None,
        )


@dataclass(frozen=True)
class EmbeddingDataset:
    entries: tuple[InterviewEmbedding, ...]
    embed_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[str] = set()
        for e in self.entries:
            if e.vector.size != self.embed_dim:
                raise ValidationError(
                    f"{e.interview_id}: dim {e.vector.size} does not match dataset dim {self.embed_dim}"
                )
            if e.interview_id in seen:
                raise ValidationError(f"duplicate interview_id {e.interview_id!r}")
            seen.add(e.interview_id)

    @classmethod
    def from_entries(cls, entries: Iterable[InterviewEmbedding], embed_dim: int | None = None) -> "EmbeddingDataset":
        entries = sorted(entries, key=lambda e: e.interview_id)
        if embed_dim is None:
            if not entries:
                raise ValidationError("cannot infer dim of an empty dataset")
            embed_dim = entries[0].vector.size
        return cls(tuple(entries), embed_dim)

    def __len__(self) -> int:
        return len(self.entries)

    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.embed_dim))
        return np.vstack([e.vector for e in self.entries])

    def labels(self) -> list[AttachmentStyle | None]:
        return [e.label for e in self.entries]

    def label_indices(self, class_order: tuple[AttachmentStyle, ...] = STYLES) -> np.ndarray:
        if any(e.label is None for e in self.entries):
            raise ValidationError("dataset contains unlabeled entries")
        pos = {s: i for i, s in enumerate(class_order)}
        return np.array([pos[e.label] for e in self.entries], dtype=int)

    def subset(self, indices: Iterable[int]) -> "EmbeddingDataset":
        return EmbeddingDataset(tuple(self.entries[i] for i in indices), self.embed_dim)

    def with_vectors(self, X: np.ndarray) -> "EmbeddingDataset":
        if X.shape != (len(self.entries), self.embed_dim):
            raise ValidationError(f"matrix shape {X.shape} does not match dataset")
        return EmbeddingDataset(
            tuple(
                InterviewEmbedding(e.interview_id, X[i], e.domain, e.label)
                for i, e in enumerate(self.entries)
            ),
            self.embed_dim,
        )

    def style_counts(self) -> dict[AttachmentStyle, int]:
        counts = {s: 0 for s in STYLES}
        for e in self.entries:
            if e.label is not None:
                counts[e.label] += 1
        return counts

    def descriptor(self) -> dict[str, Any]:
        domains = sorted({e.domain for e in self.entries})
        return {
            "domains": domains,
            "n": len(self.entries),
            "embed_dim": self.embed_dim,
            "style_counts": {s.value: c for s, c in self.style_counts().items()},
        }
