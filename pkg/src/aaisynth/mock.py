"""Deterministic offline stand-ins for the chat and embedding providers.

The mock chat provider is a pure function of ``(seed, request)``. It recognises
the three prompt families (profile, memories, interview answer) and replies in
the shape a real model would. Interview answers draw on style-specific phrase
pools so classifiers downstream see a separable-but-noisy signal.

The mock embedder mixes a bag-of-words component (hash-seeded token vectors)
with a small hash-seeded per-document component: texts sharing content words
land near each other, distinct texts never coincide.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from datetime import date, datetime, timedelta
from typing import Sequence

import numpy as np

from .domain import (
    HUMAN_SOURCE,
    STYLES,
    TIMESTAMP_FORMAT,
    AttachmentStyle,
    ChatMessage,
    InterviewTranscript,
    Role,
    TokenUsage,
)
from .gateway import ChatRequest, ChatResponse
from .prompts import STYLE_DESCRIPTIONS, default_questions


def stable_seed(*parts: object) -> int:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little")


def count_tokens(text: str) -> int:
    return len(text.split())


STOPWORDS = frozenset(
    """a an the and or but if of to in on at for with from by as is was were be been being am are
    it its this that these those i me my we our you your he him his she her they them their
    do did does not no so than then there here what which who whom when where why how
    would could should can will just about into over after before again more most some any
    all each very too also up down out off""".split()
)

_WORD = re.compile(r"[a-z']+")


def content_words(text: str) -> list[str]:
    return [w for w in _WORD.findall(text.lower()) if w not in STOPWORDS and len(w) > 1]


class MockEmbedder:
    """Hash-seeded embedding: normalised bag of token vectors plus document noise."""

    def __init__(self, dim: int = 1536, seed: int = 0, noise: float = 0.25):
        self.dim = dim
        self.seed = seed
        self.noise = noise
        self._tokens: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            v = self._tokens.get(token)
            if v is None:
                v = np.random.default_rng(stable_seed("tok", self.seed, token)).standard_normal(self.dim)
                v /= np.linalg.norm(v)
                self._tokens[token] = v
            return v

    def embed_one(self, text: str) -> np.ndarray:
        words = content_words(text)
        if words:
            bow = np.sum([self._token_vector(w) for w in words], axis=0)
            bow /= np.linalg.norm(bow) or 1.0
        else:
            bow = np.zeros(self.dim)
        doc = np.random.default_rng(stable_seed("doc", self.seed, text)).standard_normal(self.dim)
        doc /= np.linalg.norm(doc)
        return bow + self.noise * doc

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.vstack([self.embed_one(t) for t in texts])

    # lets the mock stand in for a gateway-bound embedder
    embed = embed_batch


# --------------------------------------------------------------------------
# phrase pools
# --------------------------------------------------------------------------

STYLE_PHRASES: dict[AttachmentStyle, tuple[str, ...]] = {
    AttachmentStyle.AVOIDANT: (
        "I don't really think about that much anymore",
        "it was fine, nothing special really",
        "I handled things on my own",
        "we weren't a family that talked about feelings",
        "I just got on with it",
        "I honestly don't remember a lot from back then",
        "it didn't affect me that much",
        "I kept to myself most of the time",
        "people make too much of childhood stuff",
        "I learned early to rely on myself",
        "there's not much to say about it",
        "I moved on pretty quickly",
        "I preferred being alone in my room",
        "crying never solved anything in our house",
        "it was normal, I guess, like any other family",
        "I don't see the point in dwelling on it",
        "we were practical people",
        "I stayed busy with school and sports",
        "I didn't need anyone to fix things for me",
        "that's just how things were",
    ),
    AttachmentStyle.SECURE: (
        "looking back, I can see both sides of it",
        "my mother was there whenever I needed her",
        "we usually talked things through",
        "I felt safe coming home at night",
        "even when it was hard, I knew I was loved",
        "I've made peace with what happened",
        "I can talk about it openly now",
        "it taught me that people can be trusted",
        "we worked it out together as a family",
        "I'm grateful for the support I had",
        "my parents made mistakes, but they owned them",
        "I learned that asking for help is okay",
        "we could laugh about it later",
        "I understand why they acted the way they did",
        "that experience made our bond stronger",
        "I felt heard, even as a small kid",
        "my grandmother was a steady, warm presence",
        "I try to give my own kids that same steadiness",
        "it was painful, and we got through it",
        "I feel settled about my childhood now",
    ),
    AttachmentStyle.PREOCCUPIED: (
        "I still think about it all the time",
        "I was always afraid they would leave me",
        "I kept waiting for them to notice me",
        "it still makes me so upset, even now",
        "I never knew which version of my father would come home",
        "I needed them so much and it was never enough",
        "I worried constantly as a child",
        "even now I call my mother every day to check on her",
        "I go over it again and again in my head",
        "I keep asking myself what I did wrong",
        "I would cling to my mom whenever she went out",
        "I felt like I had to earn their love",
        "sometimes I'm angry, sometimes I miss them terribly",
        "I can't stop replaying that night",
        "I was terrified of being left behind",
        "I still need people to tell me it's okay",
        "it hurt so much that they didn't see me",
        "nothing I did ever felt like enough for them",
        "I get anxious when people go quiet on me",
        "I wonder if they ever really wanted me",
    ),
}

_VOICES: tuple[tuple[str, ...], ...] = (
    ("To be candid", "In hindsight", "On reflection", "Overall"),
    ("Honestly speaking", "If I'm being real", "Thinking back on it", "All in all"),
    ("Truthfully", "When I consider it now", "In many ways", "At the end of the day"),
)

_OPENERS = (
    "When you ask about {a} and {b},",
    "Thinking about {a} and {b},",
    "On {a} and {b},",
    "About {a}, and {b} too,",
)

_HUMAN_FILLERS = (
    "um", "yeah", "I mean", "like", "you know", "sort of", "I dunno", "basically",
    "kind of", "right", "well", "so yeah",
)

_HUMAN_LIFE = (
    "my dad worked shifts at the factory",
    "we lived in a council flat for years",
    "my nan used to pick me up from school",
    "we moved house when I was about seven",
    "my brother and me shared a room",
    "mum had a job at the shop down the road",
    "we didn't have much money growing up",
    "I went to the local primary school",
    "my uncle lived with us for a while",
    "there was always noise in our house",
)

_FIRST_NAMES = (
    "Leonard", "Maya", "Oliver", "Priya", "Samuel", "Grace", "Tomas", "Aisha", "Daniel", "Hannah",
    "Mateo", "Chloe", "Isaac", "Naomi", "Victor", "Elena", "Jonah", "Fatima", "Lucas", "Ruth",
)
_LAST_NAMES = (
    "Fitzgerald", "Okafor", "Lindqvist", "Moreno", "Hughes", "Tanaka", "Kowalski", "Bennett",
    "Haddad", "Osei", "Novak", "Sullivan", "Park", "Ibrahim", "Delgado", "Foster",
)
_RACES = ("Caucasian", "Black", "Asian", "Hispanic", "Mixed", "Middle Eastern")
_GENDERS = ("Male", "Female", "Non-binary")
_JOBS = (
    "Architect", "Nurse", "Teacher", "Electrician", "Accountant", "Chef", "Software developer",
    "Carpenter", "Librarian", "Sales manager", "Construction worker", "Bus driver", "Pharmacist",
)
_ADJ_POS = ("Hardworking", "Compassionate", "Funny", "Protective", "Generous", "Patient", "Loyal")
_ADJ_NEG = ("Strict", "Impatient", "Distant", "Controlling", "Anxious", "Moody", "Critical", "Overprotective")

_MEMORY_TEMPLATES = (
    "My {rel} got home late and shouted at me for leaving my shoes in the hallway. I went to my room and stayed there until morning.",
    "I fell off my bike on the gravel road and cut my knee badly. My {rel} looked at the blood and told me to stop making a fuss.",
    "We moved to a small house near the railway when money ran out. My {rel} cried in the kitchen while packing the plates.",
    "My {rel} forgot to pick me up after school and I waited by the gate until it got dark. A teacher finally drove me home.",
    "My grandmother was diagnosed with cancer and my {rel} stopped talking at dinner. I remember the silence more than anything.",
    "I hid under the stairs when my parents argued about money. My {rel} found me there and sat with me without saying a word.",
    "Our neighbour taught me to fish at the lake every Saturday. He was the only adult who asked how I was really doing.",
    "My {rel} left for a month without telling us where. I was sure they were never coming back.",
    "My little brother was rushed to hospital with a fever and my {rel} blamed me for not watching him closely enough.",
    "The police came to the door to say my uncle had died in an accident. My {rel} just nodded and closed the door.",
    "I won a drawing prize at school and ran home to show my {rel}, who barely looked up from the newspaper.",
    "My {rel} spanked me with a belt after I broke a window playing football. I had marks on my legs for days.",
)
_RELATIVES = ("father", "mother", "father", "mother", "older sister", "older brother", "stepfather")


def _pick(rng: np.random.Generator, seq: Sequence[str], k: int | None = None):
    if k is None:
        return seq[int(rng.integers(len(seq)))]
    idx = rng.choice(len(seq), size=min(k, len(seq)), replace=False)
    return [seq[int(i)] for i in idx]


def style_in_prompt(prompt: str) -> AttachmentStyle | None:
    for style, desc in STYLE_DESCRIPTIONS.items():
        if desc in prompt:
            return style
    return None


def _section(prompt: str, header: str, stop: str | None) -> str:
    start = prompt.find(header)
    if start < 0:
        return ""
    start += len(header)
    end = prompt.find(stop, start) if stop else -1
    return prompt[start:end if end >= 0 else None].strip()


class MockChatProvider:
    """Offline chat provider; replies depend only on the seed and the request."""

    def __init__(self, seed: int = 0, fence_json: bool = True):
        self.seed = seed
        self.fence_json = fence_json

    def complete(self, req: ChatRequest) -> ChatResponse:
        prompt = "\n".join(text for _, text in req.messages)
        rng = np.random.default_rng(stable_seed("chat", self.seed, req.key()))
        if "random detailed personal and" in prompt:
            text = self._json_reply(rng, self._profile(rng))
        elif "#CHILDHOOD MEMORIES#" in prompt:
            text = self._json_reply(rng, {"childhood_memories": self._memories(rng, prompt)})
        elif "#CHAT HISTORY" in prompt:
            text = self._answer(rng, prompt, req.model_tag)
        else:
            text = "Understood."
        return ChatResponse(text, TokenUsage(count_tokens(prompt), count_tokens(text)))

    def _json_reply(self, rng: np.random.Generator, obj: dict) -> str:
        body = json.dumps(obj, indent=2)
        if self.fence_json and rng.random() < 0.5:
            return f"Here is the requested JSON:\n```json\n{body}\n```"
        return body

    def _profile(self, rng: np.random.Generator) -> dict:
        age = int(rng.integers(22, 70))
        born = date(2024 - age, int(rng.integers(1, 13)), int(rng.integers(1, 29)))
        places = ", ".join(f"Place {int(x)}" for x in rng.integers(1, 1000, size=int(rng.integers(1, 4))))
        kids = int(rng.integers(0, 4))
        sibs = int(rng.integers(0, 4))
        return {
            "name": f"{_pick(rng, _FIRST_NAMES)} {_pick(rng, _LAST_NAMES)}",
            "age": age,
            "race": _pick(rng, _RACES),
            "gender": _pick(rng, _GENDERS),
            "dob": born.isoformat(),
            "birthplace": f"Place {int(rng.integers(1, 1000))}",
            "current_job": _pick(rng, _JOBS),
            "places_lived": places,
            "children": f"{kids} children" if kids else "None",
            "siblings": f"{sibs} siblings" if sibs else "None",
            "fathers_jobs": ", ".join(_pick(rng, _JOBS, 2)),
            "mothers_jobs": ", ".join(_pick(rng, _JOBS, 2)),
            "father_adjectives": ", ".join(_pick(rng, _ADJ_POS, 1) + _pick(rng, _ADJ_NEG, 2)),
            "mother_adjectives": ", ".join(_pick(rng, _ADJ_POS, 2) + _pick(rng, _ADJ_NEG, 1)),
        }

    def _memories(self, rng: np.random.Generator, prompt: str) -> list[dict]:
        m = re.search(r"today is (\d{4}-\d\d-\d\d \d\d:\d\d:\d\d)", prompt)
        reference = datetime.strptime(m.group(1), TIMESTAMP_FORMAT) if m else datetime(2024, 1, 1)
        try:
            profile = json.loads(_section(prompt, "#PROFILE#", "#TOPICS#"))
            born = date.fromisoformat(profile["dob"])
        except (ValueError, KeyError, TypeError):
            born = date(1980, 1, 1)
        out = []
        for template in _pick(rng, _MEMORY_TEMPLATES, 10):
            when = datetime(born.year, born.month, born.day) + timedelta(
                days=int(rng.integers(4 * 365, 16 * 365)), hours=int(rng.integers(7, 22))
            )
            if when >= reference:
                when = reference - timedelta(days=int(rng.integers(1, 365)))
            out.append(
                {
                    "creation_timestamp": when.strftime(TIMESTAMP_FORMAT),
                    "content": template.format(rel=_pick(rng, _RELATIVES)),
                }
            )
        return out

    def _answer(self, rng: np.random.Generator, prompt: str, model_tag: str) -> str:
        style = style_in_prompt(prompt) or STYLES[int(rng.integers(3))]
        history = _section(prompt, "#CHAT HISTORY", None)
        questions = [ln[len("Interviewer: "):] for ln in history.splitlines() if ln.startswith("Interviewer: ")]
        topic = content_words(questions[-1] if questions else history) or ["childhood", "family"]
        a, b = (_pick(rng, topic, 2) + ["family"])[:2]
        memories = [ln.lstrip("- ").strip() for ln in _section(prompt, "#MEMORIES#", "#CHAT HISTORY").splitlines()]
        memories = [m for m in memories if m]
        voice = _VOICES[stable_seed("voice", model_tag) % len(_VOICES)]

        parts = [_pick(rng, _OPENERS).format(a=a, b=b)]
        phrases = _pick(rng, STYLE_PHRASES[style], 4)
        parts.append(phrases[0] + ".")
        if memories:
            first = _pick(rng, memories).split(". ")[0].rstrip(".")
            parts.append(f"I remember that {first[0].lower()}{first[1:]}.")
        parts.append(f"{_pick(rng, voice)}, {phrases[1]}.")
        parts.extend(p[0].upper() + p[1:] + "." for p in phrases[2:])
        return " ".join(parts)


# --------------------------------------------------------------------------
# mock human corpus
# --------------------------------------------------------------------------

_FOLLOW_UPS = (
    "Can you tell me a bit more about that?",
    "How old were you then?",
    "What happened next?",
    "Could you give me an example?",
)

MOCK_HUMAN_LABELED = {
    AttachmentStyle.AVOIDANT: 4,
    AttachmentStyle.PREOCCUPIED: 3,
    AttachmentStyle.SECURE: 2,
}
MOCK_HUMAN_UNLABELED = 17


def _human_answer(rng: np.random.Generator, style: AttachmentStyle) -> str:
    if rng.random() < 0.12:
        return _pick(rng, ("Yeah.", "I don't know... maybe.", "Not really -- no.", "Um, yes, I think so."))
    bits: list[str] = []
    for _ in range(int(rng.integers(3, 6))):
        kind = rng.random()
        if kind < 0.4:
            bits.append(_pick(rng, _HUMAN_FILLERS) + ",")
        elif kind < 0.7:
            bits.append(_pick(rng, _HUMAN_LIFE))
        else:
            # mood noise: an off-style phrase now and then
            other = STYLES[int(rng.integers(3))]
            bits.append(_pick(rng, STYLE_PHRASES[other]))
        bits.append(_pick(rng, ("...", "--", "", "", "")))
    # the underlying style shows through in only some answers
    if rng.random() < 0.5:
        bits.insert(int(rng.integers(len(bits) + 1)), _pick(rng, STYLE_PHRASES[style]))
    return " ".join(b for b in bits if b).replace(" ,", ",") + "."


def mock_human_transcripts(
    seed: int = 0,
    labeled: dict[AttachmentStyle, int] | None = None,
    n_unlabeled: int = MOCK_HUMAN_UNLABELED,
    questions: Sequence[str] | None = None,
) -> list[InterviewTranscript]:
    """Stand-in for a private human corpus: disfluent, variable-length interviews.

    Labeled interviews carry their style; unlabeled ones are drawn from a
    random style that is then discarded.
    """
    labeled = MOCK_HUMAN_LABELED if labeled is None else labeled
    questions = tuple(questions or default_questions())
    rng = np.random.default_rng(stable_seed("human-corpus", seed))
    plan: list[tuple[str, AttachmentStyle, bool]] = []
    k = 0
    for style in STYLES:
        for _ in range(labeled.get(style, 0)):
            plan.append((f"human-{k:03d}", style, True))
            k += 1
    for _ in range(n_unlabeled):
        plan.append((f"human-{k:03d}", STYLES[int(rng.integers(3))], False))
        k += 1

    out = []
    for interview_id, style, keep_label in plan:
        turns: list[ChatMessage] = []
        for q in questions:
            turns.append(ChatMessage(Role.INTERVIEWER, q, len(turns)))
            turns.append(ChatMessage(Role.INTERVIEWEE, _human_answer(rng, style), len(turns)))
            if rng.random() < 0.3:
                turns.append(ChatMessage(Role.INTERVIEWER, _pick(rng, _FOLLOW_UPS), len(turns)))
                turns.append(ChatMessage(Role.INTERVIEWEE, _human_answer(rng, style), len(turns)))
        out.append(InterviewTranscript(interview_id, HUMAN_SOURCE, tuple(turns), style if keep_label else None))
    return out
