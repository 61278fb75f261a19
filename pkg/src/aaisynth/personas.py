"""Agent cohort generation: profile, ten childhood memories, assigned style."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable

from .domain import (
    MEMORIES_PER_AGENT,
    STYLES,
    TIMESTAMP_FORMAT,
    AgentRecord,
    ChildhoodMemory,
    UserProfile,
    ValidationError,
    validate_memory,
    validate_profile,
)
from .gateway import ChatRequest, Gateway, extract_json
from .io import JsonlAppender, read_jsonl
from .prompts import memories_template, profile_prompt, render

log = logging.getLogger(__name__)

GENERATION_TEMPERATURE = 0.7
MAX_ATTEMPTS = 3


class GenerationFailed(RuntimeError):
    def __init__(self, what: str, errors: list[str]):
        super().__init__(f"{what} failed after {len(errors)} attempts: {'; '.join(errors)}")
        self.errors = errors


class CohortGenerationError(RuntimeError):
    def __init__(self, completed: int, cause: BaseException):
        super().__init__(f"cohort generation stopped after {completed} completed agents: {cause}")
        self.completed = completed


@dataclass(frozen=True)
class CohortSpec:
    total_agents: int = 60
    per_style_count: int = 20
    generation_temperature: float = GENERATION_TEMPERATURE
    reference_timestamp: datetime | None = None
    model_tag: str = "gpt-4"

    def __post_init__(self) -> None:
        if self.per_style_count < 1:
            raise ValidationError("per_style_count must be positive")
        if self.total_agents != len(STYLES) * self.per_style_count:
            raise ValidationError(
                f"total_agents ({self.total_agents}) must equal 3 x per_style_count ({self.per_style_count})"
            )

    @classmethod
    def with_total(cls, total: int, **kw: Any) -> "CohortSpec":
        if total % len(STYLES):
            raise ValidationError(f"total_agents {total} is not divisible by {len(STYLES)}")
        return cls(total_agents=total, per_style_count=total // len(STYLES), **kw)


def _attempts(what: str, fn: Callable[[int], Any]) -> Any:
    errors: list[str] = []
    for attempt in range(MAX_ATTEMPTS):
        try:
            return fn(attempt)
        except ValidationError as exc:
            log.info("%s attempt %d invalid: %s", what, attempt + 1, exc)
            errors.append(str(exc))
    raise GenerationFailed(what, errors)


def generate_profile(
    gateway: Gateway,
    temperature: float = GENERATION_TEMPERATURE,
    model_tag: str = "gpt-4",
    nonce: str = "",
) -> UserProfile:
    prompt = profile_prompt()

    def once(attempt: int) -> UserProfile:
        resp = gateway.chat(
            ChatRequest((("user", prompt),), model_tag, temperature, nonce=f"{nonce}/profile/{attempt}")
        )
        return validate_profile(extract_json(resp.text))

    return _attempts("profile generation", once)


def render_memories_prompt(profile: UserProfile, reference: datetime) -> str:
    return render(
        memories_template(),
        {
            "reference_timestamp": reference.strftime(TIMESTAMP_FORMAT),
            "user_profile": json.dumps(profile.to_dict(), indent=2, ensure_ascii=False),
        },
    )


def parse_memories(obj: Any, reference: datetime) -> tuple[ChildhoodMemory, ...]:
    """Accept ``{"<any key>": [memory, ...]}`` (or a bare list) holding exactly ten memories."""
    items = obj
    if isinstance(obj, dict):
        lists = [v for v in obj.values() if isinstance(v, list)]
        if not lists:
            raise ValidationError("memories object holds no list")
        items = lists[0]
    if not isinstance(items, list):
        raise ValidationError("memories must be a list")
    if len(items) != MEMORIES_PER_AGENT:
        raise ValidationError(f"expected {MEMORIES_PER_AGENT} memories, got {len(items)}")
    return tuple(validate_memory(m, reference) for m in items)


def generate_memories(
    gateway: Gateway,
    profile: UserProfile,
    reference_timestamp: datetime,
    temperature: float = GENERATION_TEMPERATURE,
    model_tag: str = "gpt-4",
    nonce: str = "",
) -> tuple[ChildhoodMemory, ...]:
    prompt = render_memories_prompt(profile, reference_timestamp)

    def once(attempt: int) -> tuple[ChildhoodMemory, ...]:
        resp = gateway.chat(
            ChatRequest((("user", prompt),), model_tag, temperature, nonce=f"{nonce}/memories/{attempt}")
        )
        return parse_memories(extract_json(resp.text), reference_timestamp)

    return _attempts("memory generation", once)


def agent_id_for(index: int) -> str:
    return f"agent-{index:03d}"


def generate_agent(gateway: Gateway, spec: CohortSpec, index: int, reference: datetime) -> AgentRecord:
    agent_id = agent_id_for(index)
    profile = generate_profile(gateway, spec.generation_temperature, spec.model_tag, nonce=agent_id)
    memories = generate_memories(
        gateway, profile, reference, spec.generation_temperature, spec.model_tag, nonce=agent_id
    )
    return AgentRecord(agent_id, profile, STYLES[index % len(STYLES)], memories, spec.model_tag)


def load_agents(path: Path | str) -> list[AgentRecord]:
    return read_jsonl(path, AgentRecord.from_dict)


@dataclass
class _Progress:
    done: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def build_cohort(
    gateway: Gateway,
    spec: CohortSpec,
    out_path: Path | str | None = None,
    workers: int = 1,
    on_agent: Callable[[AgentRecord], None] | None = None,
) -> list[AgentRecord]:
    """Generate ``spec.total_agents`` agents with styles assigned round-robin.

    With ``out_path`` each agent is appended as soon as it completes, and agents
    already present in the file are kept rather than regenerated.
    """
    reference = spec.reference_timestamp or datetime.now().replace(microsecond=0)
    existing: dict[str, AgentRecord] = {}
    appender = None
    if out_path is not None:
        out_path = Path(out_path)
        appender = JsonlAppender(out_path)
        if out_path.exists():
            for rec in load_agents(out_path):
                existing[rec.agent_id] = rec

    todo = [i for i in range(spec.total_agents) if agent_id_for(i) not in existing]
    progress = _Progress(done=spec.total_agents - len(todo))

    def work(i: int) -> AgentRecord:
        rec = generate_agent(gateway, spec, i, reference)
        if appender is not None:
            appender.append(rec.to_dict())
        with progress.lock:
            progress.done += 1
        if on_agent is not None:
            on_agent(rec)
        return rec

    try:
        if workers <= 1:
            for i in todo:
                existing[agent_id_for(i)] = work(i)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(work, todo):
                    existing[rec.agent_id] = rec
    except Exception as exc:
        raise CohortGenerationError(progress.done, exc) from exc

    return [existing[agent_id_for(i)] for i in range(spec.total_agents)]
