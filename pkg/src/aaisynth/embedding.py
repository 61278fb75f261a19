"""Interview-level embeddings: clean (human only), embed answers, average."""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .domain import (
    HUMAN_SOURCE,
    AttachmentStyle,
    ChatMessage,
    EmbeddingDataset,
    InterviewEmbedding,
    InterviewTranscript,
    Role,
    ValidationError,
    parse_attachment_style,
)
from .io import SchemaError
from .retrieval import Embedder

log = logging.getLogger(__name__)

PAUSE_MARKERS = ("...", "--")
MIN_WORDS = 10
_WS = re.compile(r"\s+")


class NoUsableAnswers(ValidationError):
    pass


def clean_human_answer(text: str) -> str | None:
    """Strip pause markers, collapse whitespace; ``None`` when under ten words remain."""
    prev = None
    while prev != text:
        # repeat: removing one marker can splice a new one together ("-...-" -> "--")
        prev = text
        for marker in PAUSE_MARKERS:
            text = text.replace(marker, "")
    text = _WS.sub(" ", text).strip()
    if not text or len(text.split(" ")) < MIN_WORDS:
        return None
    return text


def usable_answers(t: InterviewTranscript) -> list[str]:
    answers = t.answers()
    if t.is_synthetic:
        return [a for a in answers if a.strip()]
    cleaned = (clean_human_answer(a) for a in answers)
    return [a for a in cleaned if a is not None]


def interview_domain(t: InterviewTranscript) -> str:
    if t.is_synthetic:
        return t.source
    return "human_labeled" if t.label is not None else "human_unlabeled"


def embed_interview(t: InterviewTranscript, embedder: Embedder) -> InterviewEmbedding:
    answers = usable_answers(t)
    if not answers:
        raise NoUsableAnswers(f"{t.interview_id}: no answers survive cleaning")
    vectors = np.asarray(embedder.embed(answers), dtype=np.float64)
    return InterviewEmbedding(t.interview_id, vectors.mean(axis=0), interview_domain(t), t.label)


def embed_transcripts(transcripts: Sequence[InterviewTranscript], embedder: Embedder) -> EmbeddingDataset:
    entries = [embed_interview(t, embedder) for t in transcripts]
    return EmbeddingDataset.from_entries(entries, embedder.dim)


def _merge_runs(turns: Sequence[Mapping[str, Any]]) -> list[ChatMessage]:
    """Consecutive turns by the same speaker are joined into one."""
    merged: list[tuple[Role, str]] = []
    for raw in turns:
        role = Role(str(raw["role"]).lower())
        text = str(raw["text"])
        if merged and merged[-1][0] is role:
            merged[-1] = (role, merged[-1][1] + " " + text)
        else:
            merged.append((role, text))
    # answers before the first question, or a dangling final question, carry no pair
    while merged and merged[0][0] is not Role.INTERVIEWER:
        merged.pop(0)
    if merged and merged[-1][0] is Role.INTERVIEWER:
        merged.pop()
    return [ChatMessage(role, text, i) for i, (role, text) in enumerate(merged)]


def parse_human_transcript(obj: Mapping[str, Any], label_override: AttachmentStyle | None = None) -> InterviewTranscript:
    label = label_override
    if label is None and obj.get("label"):
        label = parse_attachment_style(obj["label"])
    return InterviewTranscript(str(obj["interview_id"]), HUMAN_SOURCE, tuple(_merge_runs(obj["turns"])), label)


def read_human_transcripts(path: Path | str, labels: Mapping[str, Any] | None = None) -> list[InterviewTranscript]:
    """Load ``*.json`` files (one interview each) or a ``.jsonl`` file."""
    path = Path(path)
    raw: list[tuple[Path, int, Any]] = []
    if path.is_dir():
        for f in sorted(path.glob("*.json")):
            try:
                raw.append((f, 1, json.loads(f.read_text(encoding="utf-8"))))
            except json.JSONDecodeError as exc:
                raise SchemaError(f, exc.lineno, f"invalid JSON: {exc.msg}") from None
    elif path.exists():
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    raw.append((path, lineno, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise SchemaError(path, lineno, f"invalid JSON: {exc.msg}") from None
    else:
        raise FileNotFoundError(path)

    label_map = {str(k): parse_attachment_style(v) for k, v in (labels or {}).items()}
    out = []
    for f, lineno, obj in raw:
        try:
            t = parse_human_transcript(obj, label_map.get(str(obj.get("interview_id"))))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f, lineno, str(exc)) from None
        out.append(t)
    known = {t.interview_id for t in out}
    unknown = sorted(set(label_map) - known)
    if unknown:
        raise ValidationError(f"labels given for unknown interview ids: {', '.join(unknown)}")
    return out


def ingest_human_transcripts(
    path: Path | str, embedder: Embedder, labels: Mapping[str, Any] | None = None
) -> EmbeddingDataset:
    transcripts = read_human_transcripts(path, labels)
    if not transcripts:
        log.warning("no human transcripts found under %s", path)
        return EmbeddingDataset((), embedder.dim)
    return embed_transcripts(transcripts, embedder)


def human_transcript_record(t: InterviewTranscript) -> dict[str, Any]:
    """Input-schema form of a transcript: ``interview_id``, ``turns``, optional ``label``."""
    rec: dict[str, Any] = {
        "interview_id": t.interview_id,
        "turns": [{"role": m.role.value, "text": m.text} for m in t.turns],
    }
    if t.label is not None:
        rec["label"] = t.label.value
    return rec


def split_by_domain(ds: EmbeddingDataset) -> dict[str, EmbeddingDataset]:
    groups: dict[str, list[InterviewEmbedding]] = {}
    for e in ds.entries:
        groups.setdefault(e.domain, []).append(e)
    return {d: EmbeddingDataset(tuple(es), ds.embed_dim) for d, es in sorted(groups.items())}
