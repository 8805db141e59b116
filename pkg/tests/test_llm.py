from __future__ import annotations

import json
from decimal import Decimal

import pytest
import requests

import reviewsum.llm as llm
from reviewsum.llm import (
    MOCK_ENDPOINT,
    ContextLengthError,
    GenerationParams,
    Price,
    ProviderEndpoint,
    ResponseFormatError,
    TransportError,
    UsageRecord,
    cache_key,
    cached_complete,
    complete,
    estimate_cost,
    estimate_tokens,
)

PARAMS = GenerationParams(model="test-model")

OPENAI_ENDPOINT = ProviderEndpoint(
    name="testprov",
    base_url="https://api.test.example/v1",
    auth_env="TESTPROV_API_KEY",
    request_shape="openai-chat",
)


class FakeResponse:
    def __init__(self, status_code=200, body=None, headers=None, text=None):
        self.status_code = status_code
        self._body = body
        self.headers = headers or {}
        self.text = text if text is not None else json.dumps(body or {})

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


def openai_body(text="hello", usage=True):
    body = {"choices": [{"message": {"content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 7}
    return body


class ScriptedSession:
    """Yields the scripted responses in order; records every post."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, headers=None, json=None, timeout=None):
        self.calls.append({"url": url, "headers": headers, "json": json})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


@pytest.fixture(autouse=True)
def no_sleep(monkeypatch):
    naps = []
    monkeypatch.setattr(llm, "_sleep", naps.append)
    return naps


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("TESTPROV_API_KEY", "sk-super-secret-key-123")


class TestGenerationParams:
    def test_defaults_and_validation(self):
        params = GenerationParams(model="m")
        assert params.temperature == 0.5
        assert params.top_p == 0.5
        assert params.frequency_penalty == 0.1
        assert params.presence_penalty == 0.1
        for bad in (
            dict(temperature=-1),
            dict(top_p=0.0),
            dict(top_p=1.5),
            dict(frequency_penalty=2.0),
            dict(presence_penalty=-0.1),
            dict(max_output_tokens=0),
        ):
            with pytest.raises(ValueError):
                GenerationParams(model="m", **bad)


class TestComplete:
    def test_mock_contract(self):
        result = complete(MOCK_ENDPOINT, "say something nice", PARAMS)
        assert result.text
        assert result.usage.latency >= 0.0
        assert result.usage.input_tokens > 0
        again = complete(MOCK_ENDPOINT, "say something nice", PARAMS)
        assert again.text == result.text

    def test_success_parses_usage(self):
        session = ScriptedSession([FakeResponse(body=openai_body())])
        result = complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert result.text == "hello"
        assert result.usage.input_tokens == 11
        assert result.usage.output_tokens == 7
        assert not result.usage.approximate
        assert session.calls[0]["json"]["temperature"] == 0.5
        assert session.calls[0]["json"]["messages"][0]["content"] == "ping"

    def test_rate_limit_then_success(self, no_sleep):
        session = ScriptedSession(
            [
                FakeResponse(status_code=429, body={}, headers={"Retry-After": "2"}),
                FakeResponse(body=openai_body()),
            ]
        )
        result = complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert result.text == "hello"
        assert len(session.calls) == 2
        assert no_sleep == [2.0]  # honored Retry-After

    def test_server_error_retries_with_backoff(self, no_sleep):
        session = ScriptedSession(
            [
                FakeResponse(status_code=500, body={}),
                FakeResponse(status_code=503, body={}),
                FakeResponse(body=openai_body()),
            ]
        )
        result = complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert result.text == "hello"
        assert len(session.calls) == 3
        assert len(no_sleep) == 2
        assert no_sleep[1] > no_sleep[0] >= 0.5  # exponential growth

    def test_connection_error_retries(self):
        session = ScriptedSession(
            [requests.ConnectionError("boom"), FakeResponse(body=openai_body())]
        )
        assert complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session).text == "hello"

    def test_retries_exhausted(self):
        session = ScriptedSession([FakeResponse(status_code=502, body={})] * 4)
        with pytest.raises(TransportError, match="4 attempts"):
            complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert len(session.calls) == 4

    def test_context_overflow_preflight_names_limit(self):
        tiny = ProviderEndpoint(
            name="tiny", base_url="https://x", auth_env="TESTPROV_API_KEY", context_window=10
        )
        with pytest.raises(ContextLengthError, match="10-token window"):
            complete(tiny, "word " * 50, PARAMS)

    def test_context_overflow_from_provider(self):
        session = ScriptedSession(
            [
                FakeResponse(
                    status_code=400,
                    body={"error": {"message": "maximum context length exceeded"}},
                    text='{"error": {"message": "maximum context length exceeded"}}',
                )
            ]
        )
        with pytest.raises(ContextLengthError, match="128000-token"):
            complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)

    def test_client_error_is_fatal_without_retry(self):
        session = ScriptedSession([FakeResponse(status_code=401, body={}, text="unauthorized")])
        with pytest.raises(TransportError, match="401"):
            complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert len(session.calls) == 1

    def test_malformed_body_raises(self):
        session = ScriptedSession([FakeResponse(body={"choices": []})])
        with pytest.raises(ResponseFormatError):
            complete(OPENAI_ENDPOINT, "ping", PARAMS, session=session)

    def test_missing_key_errors(self, monkeypatch):
        monkeypatch.delenv("TESTPROV_API_KEY", raising=False)
        with pytest.raises(llm.LlmError, match="TESTPROV_API_KEY"):
            complete(OPENAI_ENDPOINT, "ping", PARAMS, session=ScriptedSession([]))

    def test_gemini_shape(self):
        endpoint = ProviderEndpoint(
            name="gem",
            base_url="https://gem.example",
            auth_env="TESTPROV_API_KEY",
            request_shape="gemini",
        )
        body = {
            "candidates": [{"content": {"parts": [{"text": "pong"}]}}],
            "usageMetadata": {"promptTokenCount": 5, "candidatesTokenCount": 3},
        }
        session = ScriptedSession([FakeResponse(body=body)])
        result = complete(endpoint, "ping", PARAMS, session=session)
        assert result.text == "pong"
        assert result.usage.input_tokens == 5
        assert "generationConfig" in session.calls[0]["json"]
        # key travels in a header, never in the URL
        assert "secret" not in session.calls[0]["url"]
        assert session.calls[0]["headers"]["x-goog-api-key"] == "sk-super-secret-key-123"


class TestCache:
    def test_hit_skips_network(self, tmp_path):
        session = ScriptedSession([FakeResponse(body=openai_body())])
        first = cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        second = cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert len(session.calls) == 1
        assert second.text == first.text
        assert second.usage.input_tokens == first.usage.input_tokens

    def test_param_change_is_miss(self, tmp_path):
        session = ScriptedSession([FakeResponse(body=openai_body())] * 2)
        cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        other = GenerationParams(model="test-model", temperature=0.9)
        cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", other, session=session)
        assert len(session.calls) == 2

    def test_corrupted_entry_recomputed(self, tmp_path, caplog):
        session = ScriptedSession([FakeResponse(body=openai_body())] * 2)
        cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        entry = next(tmp_path.glob("*.json"))
        entry.write_text("{broken", encoding="utf-8")
        with caplog.at_level("WARNING"):
            result = cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        assert result.text == "hello"
        assert len(session.calls) == 2
        assert any("corrupt" in message for message in caplog.messages)

    def test_network_calls_equal_distinct_keys(self, tmp_path):
        prompts = ["a", "b", "a", "c", "b", "a"]
        session = ScriptedSession([FakeResponse(body=openai_body())] * 10)
        for prompt in prompts:
            cached_complete(tmp_path, OPENAI_ENDPOINT, prompt, PARAMS, session=session)
        distinct = {cache_key(OPENAI_ENDPOINT, p, PARAMS) for p in prompts}
        assert len(session.calls) == len(distinct) == 3

    def test_secret_never_persisted_or_logged(self, tmp_path, caplog):
        secret = "sk-super-secret-key-123"
        session = ScriptedSession([FakeResponse(body=openai_body())])
        with caplog.at_level("DEBUG"):
            cached_complete(tmp_path, OPENAI_ENDPOINT, "ping", PARAMS, session=session)
        for path in tmp_path.rglob("*"):
            if path.is_file():
                assert secret not in path.read_text(encoding="utf-8")
        assert secret not in caplog.text
        # the key went exactly where it belongs: the auth header
        assert session.calls[0]["headers"]["Authorization"] == f"Bearer {secret}"

    def test_mock_cache_round_trip_is_stable(self, tmp_path):
        first = cached_complete(tmp_path, MOCK_ENDPOINT, "tell me things", PARAMS)
        second = cached_complete(tmp_path, MOCK_ENDPOINT, "tell me things", PARAMS)
        assert first == second


class TestCost:
    def test_unit_case(self):
        usage = UsageRecord(input_tokens=1_000_000, output_tokens=0, latency=0.0)
        assert estimate_cost(usage, Price(2.5, 10.0)) == Decimal("2.50")

    def test_mixed_usage(self):
        usage = UsageRecord(input_tokens=20_000, output_tokens=2_000, latency=0.0)
        assert estimate_cost(usage, Price(2.5, 10.0)) == Decimal("0.07")

    def test_zero_usage(self):
        usage = UsageRecord(input_tokens=0, output_tokens=0, latency=0.0)
        assert estimate_cost(usage, Price(2.5, 10.0)) == Decimal("0")

    def test_negative_price_rejected(self):
        with pytest.raises(ValueError):
            Price(-1.0, 0.0)

    def test_usage_validation(self):
        with pytest.raises(ValueError):
            UsageRecord(input_tokens=-1, output_tokens=0, latency=0.0)
        with pytest.raises(ValueError):
            UsageRecord(input_tokens=0, output_tokens=0, latency=-0.5)


def test_estimate_tokens_heuristic():
    assert estimate_tokens("one two three four") == 6  # ceil(4 * 1.3)
    assert estimate_tokens("") == 0


class TestMockProvider:
    def test_chain_prompt_yields_parseable_json(self):
        prompt = (
            "[1] (5★) Great sleep stories and meditations here\n"
            "Repeat the following 2 steps 5 times.\n"
            'keys are "missing_entities" and "denser_summary".'
        )
        result = complete(MOCK_ENDPOINT, prompt, PARAMS)
        payload = json.loads(result.text)
        assert len(payload) == 5
        assert "denser_summary" in payload[0]
        assert result.usage.latency == 0.0

    def test_rating_prompt_yields_integer(self):
        result = complete(MOCK_ENDPOINT, "rate this; output a single integer", PARAMS)
        assert result.text.strip() in {"1", "2", "3", "4", "5"}

    def test_entity_prompt_yields_json_array(self):
        prompt = "[1] (2★) constant crashes and billing problems\nRespond with a JSON array of strings"
        result = complete(MOCK_ENDPOINT, prompt, PARAMS)
        values = json.loads(result.text)
        assert isinstance(values, list)
