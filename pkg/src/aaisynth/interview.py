"""Scripted interviewer plus a retrieval-augmented interviewee agent."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .domain import (
    AgentRecord,
    AttachmentStyle,
    ChatMessage,
    InterviewTranscript,
    Role,
    ValidationError,
    synthetic_source,
    unchecked_transcript,
)
from .gateway import DEFAULT_MAX_OUTPUT_TOKENS, ChatRequest, Gateway, ProviderError
from .prompts import STYLE_DESCRIPTIONS, chat_template, default_questions, render
from .retrieval import DEFAULT_K, Embedder, MemoryIndex, build_query, index_memories, retrieve

DIALOGUE_TEMPERATURE = 0.5
HISTORY_WINDOW = 4


@dataclass(frozen=True)
class InterviewProtocol:
    questions: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "questions", tuple(self.questions))
        if not self.questions:
            raise ValidationError("interview protocol has no questions")

    @classmethod
    def default(cls) -> "InterviewProtocol":
        return cls(default_questions())

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class WorkingMemory:
    memories: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class StyleDescription:
    style: AttachmentStyle
    text: str


class InterviewFailed(RuntimeError):
    """Carries the turns completed before an unrecoverable provider failure."""

    def __init__(self, partial: InterviewTranscript, turn_index: int, cause: BaseException):
        super().__init__(f"interview {partial.interview_id} failed at turn {turn_index}: {cause}")
        self.partial = partial
        self.turn_index = turn_index


def attachment_style_description(style: AttachmentStyle) -> StyleDescription:
    return StyleDescription(style, STYLE_DESCRIPTIONS[style])


def format_history(history: Sequence[ChatMessage]) -> str:
    return "\n".join(f"{m.role.value.capitalize()}: {m.text}" for m in history)


def format_memories(wm: WorkingMemory) -> str:
    return "\n".join(f"- {content}" for content, _ in wm.memories)


def render_chat_prompt(agent: AgentRecord, wm: WorkingMemory, history: Sequence[ChatMessage]) -> str:
    if not history or history[-1].role is not Role.INTERVIEWER:
        raise ValidationError("chat prompt needs a history ending in an interviewer question")
    p = agent.profile
    return render(
        chat_template(),
        {
            "attachment_style_description": STYLE_DESCRIPTIONS[agent.style],
            "name": p.name,
            "age": p.age,
            "dob": p.dob,
            "current_job": p.current_job,
            "birthplace": p.birthplace,
            "children": p.children,
            "siblings": p.siblings,
            "places_lived": p.places_lived,
            "fathers_jobs": p.fathers_jobs,
            "mothers_jobs": p.mothers_jobs,
            "life_memories": format_memories(wm),
            "chat_history": format_history(history[-HISTORY_WINDOW:]),
        },
    )


def update_working_memory(
    index: MemoryIndex, history: Sequence[ChatMessage], embedder: Embedder, k: int = DEFAULT_K
) -> WorkingMemory:
    """Fresh top-k retrieval keyed on the recent chat window; replaces the old set."""
    result = retrieve(index, build_query(history), k, embedder)
    return WorkingMemory(tuple((index.contents[ref], score) for ref, score in result.ranked))


def answer_turn(
    agent: AgentRecord,
    index: MemoryIndex,
    history: Sequence[ChatMessage],
    gateway: Gateway,
    temperature: float = DIALOGUE_TEMPERATURE,
    *,
    model_tag: str,
    memory_embedder: Embedder,
    k: int = DEFAULT_K,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
) -> ChatMessage:
    if not history or history[-1].role is not Role.INTERVIEWER:
        raise ValidationError("answer_turn needs a history ending in an interviewer question")
    wm = update_working_memory(index, history, memory_embedder, k)
    prompt = render_chat_prompt(agent, wm, history)
    turn = history[-1].turn_index + 1
    try:
        resp = gateway.chat(ChatRequest((("user", prompt),), model_tag, temperature, max_output_tokens))
    except ProviderError as exc:
        raise ProviderError(f"turn {turn}: {exc}") from exc
    return ChatMessage(Role.INTERVIEWEE, resp.text.strip(), turn)


def interview_id_for(agent_id: str, model_tag: str) -> str:
    return f"{agent_id}@{model_tag}"


def run_interview(
    agent: AgentRecord,
    protocol: InterviewProtocol,
    gateway: Gateway,
    *,
    model_tag: str,
    memory_embedder: Embedder,
    index: MemoryIndex | None = None,
    temperature: float = DIALOGUE_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
) -> InterviewTranscript:
    if index is None:
        index = index_memories(agent, memory_embedder)
    interview_id = interview_id_for(agent.agent_id, model_tag)
    source = synthetic_source(model_tag)
    turns: list[ChatMessage] = []
    for question in protocol.questions:
        turns.append(ChatMessage(Role.INTERVIEWER, question, len(turns)))
        try:
            turns.append(
                answer_turn(
                    agent,
                    index,
                    turns,
                    gateway,
                    temperature,
                    model_tag=model_tag,
                    memory_embedder=memory_embedder,
                    max_output_tokens=max_output_tokens,
                )
            )
        except ProviderError as exc:
            partial = unchecked_transcript(interview_id, source, turns[:-1], agent.style)
            raise InterviewFailed(partial, len(turns), exc) from exc
    return InterviewTranscript(interview_id, source, tuple(turns), agent.style)
