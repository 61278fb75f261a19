"""Chat-completion and embedding access behind one object.

The :class:`Gateway` owns retry/backoff, token accounting per model tag and a
content-hash embedding cache. Providers are small objects with a ``complete``
(chat) or ``embed_batch`` (embedding) method; real HTTP providers for the two
commercial vendors live here, the offline mock lives in :mod:`aaisynth.mock`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .domain import TokenUsage, ValidationError, as_vector

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_MAX_OUTPUT_TOKENS = 512
RETRY_BACKOFF_S = (1.0, 2.0, 4.0)


class ProviderError(RuntimeError):
    transient = False


class AuthenticationError(ProviderError):
    pass


class RateLimitError(ProviderError):
    transient = True


class ProviderTimeout(ProviderError):
    transient = True


class TransientProviderError(ProviderError):
    """Server-side (5xx-class) failure worth retrying."""

    transient = True


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model_tag: str
    temperature: float = 0.5
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    # only the mock reads this; it lets identical prompts yield distinct samples
    nonce: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple((str(r), str(t)) for r, t in self.messages))
        if not self.messages:
            raise ValidationError("chat request has no messages")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValidationError(f"invalid temperature {self.temperature}; must lie in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValidationError("max_output_tokens must be positive")

    def key(self) -> str:
        payload = json.dumps(
            [self.messages, self.model_tag, self.temperature, self.max_output_tokens, self.nonce],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage


@dataclass(frozen=True)
class EmbedRequest:
    texts: tuple[str, ...]
    model_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "texts", tuple(self.texts))
        if not self.texts:
            raise ValidationError("embed request has no texts")
        for i, t in enumerate(self.texts):
            if not isinstance(t, str) or not t.strip():
                raise ValidationError(f"embed request text {i} is empty")


class ChatProvider(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


class EmbedProvider(Protocol):
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def content_key(model_tag: str, text: str) -> str:
    return hashlib.sha256(f"{model_tag}\x00{text}".encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Content-hash keyed vector store; in memory, optionally backed by SQLite.

    Writes for an existing key are last-writer-wins; values for a key are
    identical by construction so the race is harmless.
    """

    def __init__(self, path: Path | str | None = None):
        self._mem: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._db: sqlite3.Connection | None = None
        self.hits = 0
        self.misses = 0
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._db = sqlite3.connect(str(path), check_same_thread=False)
            self._db.execute("CREATE TABLE IF NOT EXISTS vectors (key TEXT PRIMARY KEY, vec BLOB)")
            self._db.commit()

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            v = self._mem.get(key)
            if v is None and self._db is not None:
                row = self._db.execute("SELECT vec FROM vectors WHERE key = ?", (key,)).fetchone()
                if row is not None:
                    v = as_vector(np.frombuffer(row[0], dtype=np.float64))
                    self._mem[key] = v
            if v is None:
                self.misses += 1
            else:
                self.hits += 1
            return v

    def put(self, key: str, vec: np.ndarray) -> None:
        with self._lock:
            self._mem[key] = vec
            if self._db is not None:
                self._db.execute(
                    "INSERT OR REPLACE INTO vectors (key, vec) VALUES (?, ?)",
                    (key, np.ascontiguousarray(vec, dtype=np.float64).tobytes()),
                )
                self._db.commit()

    def __len__(self) -> int:
        return len(self._mem)

    def close(self) -> None:
        if self._db is not None:
            self._db.close()
            self._db = None


class Gateway:
    """Uniform chat/embed entry point with retries and usage accounting.

    ``chat_providers`` and ``embed_providers`` map a model tag to a provider, or
    are callables resolving a tag to one.
    """

    def __init__(
        self,
        chat_providers: Mapping[str, ChatProvider] | Callable[[str], ChatProvider] | None = None,
        embed_providers: Mapping[str, EmbedProvider] | Callable[[str], EmbedProvider] | None = None,
        cache: EmbeddingCache | None = None,
        backoff: Sequence[float] = RETRY_BACKOFF_S,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._chat = chat_providers or {}
        self._embed = embed_providers or {}
        self._resolved: dict[tuple[str, str], Any] = {}
        self.cache = cache if cache is not None else EmbeddingCache()
        self.backoff = tuple(backoff)
        self._sleep = sleep
        self._usage: dict[str, TokenUsage] = {}
        self._lock = threading.Lock()

    def _provider(self, kind: str, tag: str) -> Any:
        table = self._chat if kind == "chat" else self._embed
        with self._lock:
            if (kind, tag) in self._resolved:
                return self._resolved[(kind, tag)]
            if callable(table) and not isinstance(table, Mapping):
                provider = table(tag)
            elif tag in table:
                provider = table[tag]
            else:
                raise ProviderError(f"no {kind} provider configured for model tag {tag!r}")
            self._resolved[(kind, tag)] = provider
            return provider

    def _with_retries(self, fn: Callable[[], Any], what: str) -> Any:
        attempt = 0
        while True:
            try:
                return fn()
            except ProviderError as exc:
                if not exc.transient or attempt >= len(self.backoff):
                    raise
                delay = self.backoff[attempt]
                attempt += 1
                log.warning("%s failed (%s); retry %d in %.1fs", what, exc, attempt, delay)
                self._sleep(delay)

    def record_usage(self, model_tag: str, usage: TokenUsage) -> None:
        if usage.input_tokens < 0 or usage.output_tokens < 0:
            raise ValueError("token usage cannot be negative")
        with self._lock:
            self._usage[model_tag] = self._usage.get(model_tag, TokenUsage()) + usage

    def chat(self, req: ChatRequest) -> ChatResponse:
        provider = self._provider("chat", req.model_tag)
        resp: ChatResponse = self._with_retries(lambda: provider.complete(req), f"chat[{req.model_tag}]")
        if not resp.text or not resp.text.strip():
            raise ProviderError(f"chat[{req.model_tag}] returned an empty response")
        self.record_usage(req.model_tag, resp.usage)
        return resp

    def embed(self, req: EmbedRequest) -> list[np.ndarray]:
        provider = self._provider("embed", req.model_tag)
        keys = [content_key(req.model_tag, t) for t in req.texts]
        out: list[np.ndarray | None] = [self.cache.get(k) for k in keys]
        missing = [i for i, v in enumerate(out) if v is None]
        if missing:
            # dedupe within the batch
            uniq: dict[str, int] = {}
            for i in missing:
                uniq.setdefault(keys[i], i)
            texts = [req.texts[i] for i in uniq.values()]
            mat = self._with_retries(lambda: provider.embed_batch(texts), f"embed[{req.model_tag}]")
            mat = np.asarray(mat, dtype=np.float64)
            if mat.shape != (len(texts), provider.dim):
                raise ProviderError(
                    f"embed[{req.model_tag}] returned shape {mat.shape}, expected {(len(texts), provider.dim)}"
                )
            fresh: dict[str, np.ndarray] = {}
            for key, row in zip(uniq, mat):
                fresh[key] = as_vector(row, provider.dim)
                self.cache.put(key, fresh[key])
            for i in missing:
                out[i] = fresh[keys[i]]
        return out  # type: ignore[return-value]

    def embed_dim(self, model_tag: str) -> int:
        return int(self._provider("embed", model_tag).dim)

    def embedder(self, model_tag: str) -> "BoundEmbedder":
        return BoundEmbedder(self, model_tag)

    def usage_report(self, model_tag: str | None = None) -> TokenUsage:
        """Running totals since construction; one tag, or all tags summed."""
        with self._lock:
            if model_tag is not None:
                return self._usage.get(model_tag, TokenUsage())
            total = TokenUsage()
            for u in self._usage.values():
                total = total + u
            return total

    def usage_by_model(self) -> dict[str, TokenUsage]:
        with self._lock:
            return dict(sorted(self._usage.items()))


@dataclass(frozen=True)
class BoundEmbedder:
    """A gateway pinned to one embedding model tag."""

    gateway: Gateway
    model_tag: str

    @property
    def dim(self) -> int:
        return self.gateway.embed_dim(self.model_tag)

    def embed(self, texts: Iterable[str]) -> np.ndarray:
        vecs = self.gateway.embed(EmbedRequest(tuple(texts), self.model_tag))
        return np.vstack(vecs)

    def embed_one(self, text: str) -> np.ndarray:
        return self.gateway.embed(EmbedRequest((text,), self.model_tag))[0]


# --------------------------------------------------------------------------
# JSON extraction
# --------------------------------------------------------------------------


class JSONExtractionError(ValidationError):
    pass


def _strip_fences(text: str) -> str:
    lines = [ln for ln in text.splitlines() if not ln.strip().startswith("```")]
    return "\n".join(lines)


def _balanced_object(text: str, start: int) -> int:
    """Index one past the brace closing the object opened at ``start``, or -1."""
    depth = 0
    in_str = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return -1


def extract_json(text: str) -> dict[str, Any]:
    """Pull the first top-level JSON object out of an LLM reply."""
    body = _strip_fences(text)
    start = body.find("{")
    if start < 0:
        raise JSONExtractionError("no JSON object found in response")
    end = _balanced_object(body, start)
    if end < 0:
        raise JSONExtractionError("unterminated JSON object in response")
    try:
        obj = json.loads(body[start:end])
    except json.JSONDecodeError as exc:
        raise JSONExtractionError(f"malformed JSON object: {exc.msg}") from None
    return obj


# --------------------------------------------------------------------------
# HTTP providers
# --------------------------------------------------------------------------

OPENAI_CHAT_URL = "https://api.openai.com/v1/chat/completions"
OPENAI_EMBED_URL = "https://api.openai.com/v1/embeddings"
ANTHROPIC_URL = "https://api.anthropic.com/v1/messages"
ANTHROPIC_VERSION = "2023-06-01"


def _credential(env_var: str) -> str:
    key = os.environ.get(env_var)
    if not key:
        raise AuthenticationError(f"environment variable {env_var} is not set")
    return key


def _post(client: Any, url: str, headers: dict[str, str], body: dict[str, Any]) -> dict[str, Any]:
    import httpx

    try:
        resp = client.post(url, headers=headers, json=body)
    except httpx.TimeoutException as exc:
        raise ProviderTimeout(f"request to {url} timed out") from exc
    except httpx.TransportError as exc:
        raise TransientProviderError(f"transport error calling {url}: {type(exc).__name__}") from exc
    status = resp.status_code
    if status in (401, 403):
        raise AuthenticationError(f"{url} rejected credentials (HTTP {status})")
    if status == 429:
        raise RateLimitError(f"{url} rate limited (HTTP 429)")
    if status == 408 or status >= 500:
        raise TransientProviderError(f"{url} failed with HTTP {status}")
    if status >= 400:
        raise ProviderError(f"{url} failed with HTTP {status}: {resp.text[:200]}")
    return resp.json()


def _client(client: Any, timeout: float) -> Any:
    if client is not None:
        return client
    import httpx

    return httpx.Client(timeout=timeout)


class OpenAIChatProvider:
    env_var = "OPENAI_API_KEY"

    def __init__(self, model: str, client: Any = None, timeout: float = DEFAULT_TIMEOUT_S, url: str = OPENAI_CHAT_URL):
        self.model = model
        self.url = url
        self._client = _client(client, timeout)

    def complete(self, req: ChatRequest) -> ChatResponse:
        headers = {"Authorization": f"Bearer {_credential(self.env_var)}"}
        body = {
            "model": self.model,
            "messages": [{"role": r, "content": t} for r, t in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        data = _post(self._client, self.url, headers, body)
        try:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
        except (KeyError, IndexError, TypeError):
            raise ProviderError("unexpected chat completion payload") from None
        return ChatResponse(
            text or "",
            TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        )


class AnthropicChatProvider:
    env_var = "ANTHROPIC_API_KEY"

    def __init__(self, model: str, client: Any = None, timeout: float = DEFAULT_TIMEOUT_S, url: str = ANTHROPIC_URL):
        self.model = model
        self.url = url
        self._client = _client(client, timeout)

    def complete(self, req: ChatRequest) -> ChatResponse:
        headers = {"x-api-key": _credential(self.env_var), "anthropic-version": ANTHROPIC_VERSION}
        system = "\n\n".join(t for r, t in req.messages if r == "system")
        body: dict[str, Any] = {
            "model": self.model,
            "max_tokens": req.max_output_tokens,
            # vendor range is [0, 1]
            "temperature": min(req.temperature, 1.0),
            "messages": [{"role": r, "content": t} for r, t in req.messages if r != "system"],
        }
        if system:
            body["system"] = system
        data = _post(self._client, self.url, headers, body)
        try:
            text = "".join(b.get("text", "") for b in data["content"] if b.get("type") == "text")
            usage = data.get("usage", {})
        except (KeyError, TypeError):
            raise ProviderError("unexpected messages payload") from None
        return ChatResponse(
            text, TokenUsage(int(usage.get("input_tokens", 0)), int(usage.get("output_tokens", 0)))
        )


class OpenAIEmbedder:
    env_var = "OPENAI_API_KEY"

    def __init__(
        self,
        model: str = "text-embedding-3-small",
        dim: int = 1536,
        client: Any = None,
        timeout: float = DEFAULT_TIMEOUT_S,
        url: str = OPENAI_EMBED_URL,
    ):
        self.model = model
        self.dim = dim
        self.url = url
        self._client = _client(client, timeout)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        headers = {"Authorization": f"Bearer {_credential(self.env_var)}"}
        data = _post(self._client, self.url, headers, {"model": self.model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            return np.array([r["embedding"] for r in rows], dtype=np.float64)
        except (KeyError, TypeError):
            raise ProviderError("unexpected embeddings payload") from None


class SentenceTransformerEmbedder:
    """Local sentence-transformers model (the small memory embedder)."""

    def __init__(self, model: str = "sentence-transformers/all-MiniLM-L6-v2"):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(self._model.encode(list(texts)), dtype=np.float64)


def real_chat_provider(model_tag: str) -> ChatProvider:
    if model_tag.lower().startswith("claude"):
        return AnthropicChatProvider(model_tag)
    return OpenAIChatProvider(model_tag)

