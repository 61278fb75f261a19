from __future__ import annotations

import json
import logging
import threading

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aaisynth.domain import TokenUsage, ValidationError
from aaisynth.gateway import (
    AnthropicChatProvider,
    AuthenticationError,
    ChatRequest,
    ChatResponse,
    EmbeddingCache,
    EmbedRequest,
    Gateway,
    JSONExtractionError,
    OpenAIChatProvider,
    OpenAIEmbedder,
    ProviderError,
    ProviderTimeout,
    RateLimitError,
    TransientProviderError,
    extract_json,
    real_chat_provider,
)
from aaisynth.mock import MockChatProvider, MockEmbedder

SECRET = "sk-test-not-a-real-key-123"


def _req(text: str = "hello", **kw) -> ChatRequest:
    return ChatRequest((("user", text),), kw.pop("model_tag", "m"), **kw)


class Scripted:
    """Chat provider replaying a list of outcomes (exceptions or texts)."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def complete(self, req):
        self.calls += 1
        out = self.outcomes.pop(0)
        if isinstance(out, Exception):
            raise out
        return ChatResponse(out, TokenUsage(3, 5))


def _gw(provider, sleeps=None) -> Gateway:
    return Gateway({"m": provider}, sleep=(sleeps.append if sleeps is not None else lambda s: None))


# ---------------------------------------------------------------- requests


def test_temperature_out_of_range():
    with pytest.raises(ValidationError, match="temperature"):
        _req(temperature=2.5)


def test_empty_requests_rejected():
    with pytest.raises(ValidationError):
        ChatRequest((), "m")
    with pytest.raises(ValidationError):
        EmbedRequest((), "e")
    with pytest.raises(ValidationError, match="empty"):
        EmbedRequest(("ok", "  "), "e")


# ---------------------------------------------------------------- mock determinism


def test_mock_chat_is_deterministic():
    a = Gateway({"m": MockChatProvider(7)}).chat(_req("tell me something"))
    b = Gateway({"m": MockChatProvider(7)}).chat(_req("tell me something"))
    assert a.text.encode() == b.text.encode()


@given(st.text(min_size=1, max_size=200), st.integers(0, 10))
def test_mock_chat_pure_function(text, seed):
    req = _req(text)
    assert MockChatProvider(seed).complete(req) == MockChatProvider(seed).complete(req)


def test_mock_embed_dimension_and_cache():
    emb = MockEmbedder(1536)
    gw = Gateway(embed_providers={"e": emb})
    (v,) = gw.embed(EmbedRequest(("hello",), "e"))
    assert v.shape == (1536,)
    misses = gw.cache.misses
    (w,) = gw.embed(EmbedRequest(("hello",), "e"))
    assert np.array_equal(v, w) and gw.cache.misses == misses and gw.cache.hits >= 1


def test_mock_embed_distinct_texts_not_parallel():
    gw = Gateway(embed_providers={"e": MockEmbedder(1536)})
    a, b = gw.embed(EmbedRequest(("hello", "goodbye"), "e"))
    assert a @ b / (np.linalg.norm(a) * np.linalg.norm(b)) < 1


def test_mock_embedder_shared_words_are_closer():
    e = MockEmbedder(256)
    a, b, c = e.embed_batch(["my father was strict", "my father was very strict", "beach holidays with cousins"])
    cos = lambda u, v: u @ v / np.linalg.norm(u) / np.linalg.norm(v)
    assert cos(a, b) > cos(a, c)


def test_embed_dedupes_within_batch():
    class Counting(MockEmbedder):
        seen: list[int] = []

        def embed_batch(self, texts):
            self.seen.append(len(texts))
            return super().embed_batch(texts)

    emb = Counting(8)
    gw = Gateway(embed_providers={"e": emb})
    out = gw.embed(EmbedRequest(("x", "y", "x"), "e"))
    assert emb.seen == [2] and np.array_equal(out[0], out[2])


def test_embed_wrong_shape_is_provider_error():
    class Bad:
        dim = 4

        def embed_batch(self, texts):
            return np.zeros((len(texts), 3))

    with pytest.raises(ProviderError, match="shape"):
        Gateway(embed_providers={"e": Bad()}).embed(EmbedRequest(("x",), "e"))


def test_sqlite_cache_persists(tmp_path):
    path = tmp_path / "cache" / "e.sqlite"
    c = EmbeddingCache(path)
    c.put("k", np.arange(3.0))
    c.close()
    c2 = EmbeddingCache(path)
    assert np.array_equal(c2.get("k"), np.arange(3.0))
    assert c2.get("missing") is None


def test_unknown_model_tag():
    with pytest.raises(ProviderError, match="no chat provider"):
        Gateway({}).chat(_req())


# ---------------------------------------------------------------- usage


def test_usage_fresh_is_zero():
    assert Gateway().usage_report() == TokenUsage(0, 0)


def test_usage_two_calls_add():
    gw = _gw(Scripted(["a", "b"]))
    gw.chat(_req())
    gw.chat(_req())
    assert gw.usage_report() == TokenUsage(6, 10)
    assert gw.usage_report("m") == TokenUsage(6, 10)
    assert gw.usage_report("other") == TokenUsage(0, 0)


def test_usage_counts_mock_output_tokens():
    gw = Gateway({"m": MockChatProvider(0)})
    resp = gw.chat(_req())
    assert gw.usage_report().output_tokens == len(resp.text.split())


def test_usage_partitioned_and_monotone_under_threads():
    gw = Gateway(lambda tag: MockChatProvider(0))
    totals = []

    def work(tag):
        for i in range(20):
            gw.chat(_req(f"q{i}", model_tag=tag))
            totals.append(gw.usage_report().input_tokens)

    threads = [threading.Thread(target=work, args=(t,)) for t in ("a", "b", "a")]
    [t.start() for t in threads]
    [t.join() for t in threads]
    by = gw.usage_by_model()
    assert set(by) == {"a", "b"}
    assert by["a"].input_tokens == 2 * by["b"].input_tokens
    assert gw.usage_report() == by["a"] + by["b"]
    assert max(totals) == gw.usage_report().input_tokens


def test_negative_usage_rejected():
    with pytest.raises(ValueError):
        Gateway().record_usage("m", TokenUsage(-1, 0))


# ---------------------------------------------------------------- retries


def test_transient_failures_retried_with_backoff():
    sleeps: list[float] = []
    p = Scripted([RateLimitError("429"), ProviderTimeout("t"), TransientProviderError("503"), "ok"])
    assert _gw(p, sleeps).chat(_req()).text == "ok"
    assert p.calls == 4 and sleeps == [1.0, 2.0, 4.0]


def test_rate_limit_surfaces_after_retries():
    sleeps: list[float] = []
    p = Scripted([RateLimitError("429")] * 5)
    with pytest.raises(RateLimitError):
        _gw(p, sleeps).chat(_req())
    assert p.calls == 4 and sleeps == [1.0, 2.0, 4.0]


def test_auth_error_not_retried():
    p = Scripted([AuthenticationError("bad key"), "ok"])
    with pytest.raises(AuthenticationError):
        _gw(p).chat(_req())
    assert p.calls == 1


def test_empty_text_is_error_and_not_counted():
    gw = _gw(Scripted(["   "]))
    with pytest.raises(ProviderError, match="empty"):
        gw.chat(_req())
    assert gw.usage_report() == TokenUsage()


# ---------------------------------------------------------------- extract_json


def test_extract_json_fenced():
    assert extract_json('```json\n{"a":1}\n```') == {"a": 1}


def test_extract_json_balanced_in_prose():
    assert extract_json('Here you go: {"a": {"b": 2}} thanks') == {"a": {"b": 2}}


def test_extract_json_braces_inside_strings():
    assert extract_json('x {"a": "}{", "b": "\\"}"} y') == {"a": "}{", "b": '"}'}


@pytest.mark.parametrize("text,msg", [("no braces here", "no JSON"), ('{"a": 1', "unterminated"), ("{a: 1}", "malformed")])
def test_extract_json_errors(text, msg):
    with pytest.raises(JSONExtractionError, match=msg):
        extract_json(text)


@given(st.dictionaries(st.text(max_size=8), st.integers() | st.text(max_size=8) | st.booleans(), max_size=5), st.text(alphabet="abc .:\n", max_size=20))
def test_extract_json_recovers_embedded_object(obj, prose):
    assert extract_json(f"{prose}\n```json\n{json.dumps(obj)}\n```\n{prose}") == obj


# ---------------------------------------------------------------- wire protocol


def _client(handler) -> httpx.Client:
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_openai_chat_wire(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", SECRET)
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(
            200, json={"choices": [{"message": {"content": "hi there"}}], "usage": {"prompt_tokens": 7, "completion_tokens": 2}}
        )

    p = OpenAIChatProvider("gpt-4", client=_client(handler))
    resp = p.complete(ChatRequest((("system", "s"), ("user", "u")), "gpt-4", temperature=0.5, max_output_tokens=9))
    assert resp == ChatResponse("hi there", TokenUsage(7, 2))
    assert seen["auth"] == f"Bearer {SECRET}"
    assert seen["body"] == {
        "model": "gpt-4",
        "messages": [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}],
        "temperature": 0.5,
        "max_tokens": 9,
    }


def test_anthropic_chat_wire(monkeypatch):
    monkeypatch.setenv("ANTHROPIC_API_KEY", SECRET)
    seen = {}

    def handler(request):
        seen["headers"] = request.headers
        seen["body"] = json.loads(request.content)
        return httpx.Response(
            200,
            json={"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}], "usage": {"input_tokens": 4, "output_tokens": 1}},
        )

    p = AnthropicChatProvider("claude-3-opus-20240229", client=_client(handler))
    resp = p.complete(ChatRequest((("system", "s"), ("user", "u")), "claude", temperature=1.5))
    assert resp == ChatResponse("ab", TokenUsage(4, 1))
    assert seen["headers"]["x-api-key"] == SECRET
    assert seen["body"]["system"] == "s"
    assert seen["body"]["messages"] == [{"role": "user", "content": "u"}]
    assert seen["body"]["temperature"] == 1.0


def test_openai_embed_wire_orders_by_index(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", SECRET)

    def handler(request):
        assert json.loads(request.content) == {"model": "text-embedding-3-small", "input": ["a", "b"]}
        return httpx.Response(200, json={"data": [{"index": 1, "embedding": [0.0, 1.0]}, {"index": 0, "embedding": [1.0, 0.0]}]})

    e = OpenAIEmbedder(dim=2, client=_client(handler))
    assert e.embed_batch(["a", "b"]).tolist() == [[1.0, 0.0], [0.0, 1.0]]


@pytest.mark.parametrize(
    "status,exc",
    [(401, AuthenticationError), (403, AuthenticationError), (429, RateLimitError), (500, TransientProviderError), (503, TransientProviderError), (400, ProviderError)],
)
def test_http_status_mapping(monkeypatch, status, exc):
    monkeypatch.setenv("OPENAI_API_KEY", SECRET)
    p = OpenAIChatProvider("gpt-4", client=_client(lambda r: httpx.Response(status, text="nope")))
    with pytest.raises(exc):
        p.complete(_req())


def test_timeout_mapping(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", SECRET)

    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(ProviderTimeout):
        OpenAIChatProvider("gpt-4", client=_client(handler)).complete(_req())


def test_missing_credential(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    p = OpenAIChatProvider("gpt-4", client=_client(lambda r: httpx.Response(200, json={})))
    with pytest.raises(AuthenticationError, match="OPENAI_API_KEY"):
        p.complete(_req())


def test_credential_never_logged(monkeypatch, caplog):
    monkeypatch.setenv("OPENAI_API_KEY", SECRET)
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500 if len(calls) < 3 else 401, text=f"echo {request.headers['authorization']}")

    gw = Gateway({"gpt-4": OpenAIChatProvider("gpt-4", client=_client(handler))}, sleep=lambda s: None)
    with caplog.at_level(logging.DEBUG), pytest.raises(AuthenticationError) as info:
        gw.chat(_req(model_tag="gpt-4"))
    assert SECRET not in caplog.text and SECRET not in str(info.value)


def test_provider_routing():
    assert isinstance(real_chat_provider("claude-3-opus-20240229"), AnthropicChatProvider)
    assert isinstance(real_chat_provider("gpt-4"), OpenAIChatProvider)
