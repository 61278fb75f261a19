"""Prompt templates, the interview question list and the style descriptions.

Templates live as text assets next to this module and are rendered by
substituting ``{placeholder}`` slots; every declared slot must be filled.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

from .domain import AttachmentStyle, ValidationError

_SLOT = re.compile(r"\{(\w+)\}")


class TemplateError(ValidationError):
    pass


@lru_cache(maxsize=None)
def load_asset(name: str) -> str:
    return resources.files("aaisynth").joinpath("assets", name).read_text(encoding="utf-8")


def template_slots(template: str) -> list[str]:
    return list(dict.fromkeys(_SLOT.findall(template)))


def render(template: str, values: Mapping[str, object]) -> str:
    missing = [slot for slot in template_slots(template) if slot not in values]
    if missing:
        raise TemplateError(f"unfilled template slots: {', '.join(missing)}")
    # single pass, so braces inside substituted values are left alone
    return _SLOT.sub(lambda m: str(values[m.group(1)]), template)


def profile_prompt() -> str:
    return load_asset("profile_prompt.txt")


def memories_template() -> str:
    return load_asset("memories_prompt.txt")


def chat_template() -> str:
    return load_asset("chat_prompt.txt")


def default_questions() -> tuple[str, ...]:
    return tuple(q for q in load_asset("aai_questions.txt").splitlines() if q.strip())


def load_protocol(path: Path | str | None = None) -> tuple[str, ...]:
    """One question per line; blank lines ignored. ``None`` gives the built-in 19."""
    if path is None:
        return default_questions()
    questions = tuple(
        line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()
    )
    if not questions:
        raise ValidationError(f"protocol file {path} contains no questions")
    return questions


STYLE_DESCRIPTIONS: dict[AttachmentStyle, str] = {
    AttachmentStyle.AVOIDANT: (
        "You tend to maintain emotional distance, minimize closeness, and often reject or "
        "withdraw from intimacy in relationships. You have a selective memory, often "
        "downplaying or dismissing past experiences involving intimacy or vulnerability"
    ),
    AttachmentStyle.PREOCCUPIED: (
        "You have a heightened need for reassurance, fear of abandonment, and a constant "
        "seeking of closeness and validation in relationships. You dwell on past experiences, "
        "focusing on moments of insecurity or inconsistency in relationships"
    ),
    AttachmentStyle.SECURE: (
        "You are comfortable with intimacy, have balanced independence, effective "
        "communication, and a sense of safety and trust in relationships. You view your "
        "memories through a lens of safety and trust"
    ),
}
