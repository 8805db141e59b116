"""Provider-agnostic chat-completion client.

One canonical request per call, translated by a thin adapter per provider
dialect (OpenAI-style chat, Gemini-style generateContent, or the offline
mock). Transport failures retry with exponential backoff and jitter, rate
limits honor Retry-After, and oversized prompts fail fast with the window
size in the message. A file cache keyed by (endpoint, model, prompt, params)
makes reruns free, and usage records carry token counts, wall-clock latency,
and cost.

API keys are read from the environment at request time and appear only in
request headers: never in logs, cache files, or reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import re
import tempfile
import threading
import time
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path

import requests

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
DEFAULT_MAX_RETRIES = 3
TOKENS_PER_WORD = 1.3


class LlmError(Exception):
    pass


class TransportError(LlmError):
    """Network or HTTP failure that survived the retry budget."""


class ContextLengthError(LlmError):
    """The prompt does not fit the endpoint's context window."""


class ResponseFormatError(LlmError):
    """The provider replied with an unusable body."""


@dataclass(frozen=True)
class GenerationParams:
    model: str
    temperature: float = 0.5
    top_p: float = 0.5
    frequency_penalty: float = 0.1
    presence_penalty: float = 0.1
    max_output_tokens: int = 2048

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        for name in ("frequency_penalty", "presence_penalty"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ProviderEndpoint:
    name: str
    base_url: str
    auth_env: str
    request_shape: str = "openai-chat"
    context_window: int = 128_000
    max_in_flight: int = 4


MOCK_ENDPOINT = ProviderEndpoint(
    name="mock", base_url="", auth_env="", request_shape="mock", context_window=128_000
)


@dataclass(frozen=True)
class UsageRecord:
    input_tokens: int
    output_tokens: int
    latency: float
    cost: Decimal = Decimal("0")
    approximate: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if self.latency < 0:
            raise ValueError("latency must be non-negative")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: UsageRecord


@dataclass(frozen=True)
class Price:
    in_per_million: float
    out_per_million: float

    def __post_init__(self):
        if self.in_per_million < 0 or self.out_per_million < 0:
            raise ValueError("prices must be non-negative")


def estimate_tokens(text: str) -> int:
    """Whitespace-word heuristic; providers report exact counts when they do."""
    return math.ceil(len(text.split()) * TOKENS_PER_WORD)


def estimate_cost(usage: UsageRecord, price: Price) -> Decimal:
    """input_tokens * in_price/1e6 + output_tokens * out_price/1e6, exactly."""
    million = Decimal(1_000_000)
    return (
        Decimal(usage.input_tokens) * Decimal(str(price.in_per_million)) / million
        + Decimal(usage.output_tokens) * Decimal(str(price.out_per_million)) / million
    )


# --- transport -----------------------------------------------------------

_semaphores: dict[str, threading.BoundedSemaphore] = {}
_semaphore_lock = threading.Lock()
_sleep = time.sleep  # patched in tests


def _endpoint_semaphore(endpoint: ProviderEndpoint) -> threading.BoundedSemaphore:
    with _semaphore_lock:
        if endpoint.name not in _semaphores:
            _semaphores[endpoint.name] = threading.BoundedSemaphore(endpoint.max_in_flight)
        return _semaphores[endpoint.name]


def _auth_key(endpoint: ProviderEndpoint) -> str:
    key = os.environ.get(endpoint.auth_env, "")
    if not key:
        raise LlmError(
            f"no API key for endpoint {endpoint.name!r}: set the "
            f"{endpoint.auth_env or '<unconfigured>'} environment variable"
        )
    return key


def _build_request(endpoint: ProviderEndpoint, prompt: str, params: GenerationParams):
    if endpoint.request_shape == "openai-chat":
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {
            "Authorization": f"Bearer {_auth_key(endpoint)}",
            "Content-Type": "application/json",
        }
        payload = {
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "frequency_penalty": params.frequency_penalty,
            "presence_penalty": params.presence_penalty,
            "max_tokens": params.max_output_tokens,
        }
        return url, headers, payload
    if endpoint.request_shape == "gemini":
        url = endpoint.base_url.rstrip("/") + f"/models/{params.model}:generateContent"
        # Key goes in a header, never the URL: transport errors stringify URLs.
        headers = {
            "x-goog-api-key": _auth_key(endpoint),
            "Content-Type": "application/json",
        }
        payload = {
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {
                "temperature": params.temperature,
                "topP": params.top_p,
                "maxOutputTokens": params.max_output_tokens,
            },
        }
        return url, headers, payload
    raise LlmError(f"unknown request shape {endpoint.request_shape!r}")


def _parse_response(endpoint: ProviderEndpoint, body: dict, prompt: str) -> tuple[str, int, int, bool]:
    try:
        if endpoint.request_shape == "openai-chat":
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage") or {}
            in_tokens = usage.get("prompt_tokens")
            out_tokens = usage.get("completion_tokens")
        else:  # gemini
            parts = body["candidates"][0]["content"]["parts"]
            text = "".join(part.get("text", "") for part in parts)
            usage = body.get("usageMetadata") or {}
            in_tokens = usage.get("promptTokenCount")
            out_tokens = usage.get("candidatesTokenCount")
    except (KeyError, IndexError, TypeError) as exc:
        raise ResponseFormatError(f"malformed response from {endpoint.name}: {exc!r}") from exc
    if not isinstance(text, str):
        raise ResponseFormatError(f"malformed response from {endpoint.name}: no text")
    approximate = in_tokens is None or out_tokens is None
    if in_tokens is None:
        in_tokens = estimate_tokens(prompt)
    if out_tokens is None:
        out_tokens = estimate_tokens(text)
    return text, int(in_tokens), int(out_tokens), approximate


_CONTEXT_ERROR_MARKERS = ("context_length", "maximum context", "token limit", "too many tokens")


def complete(
    endpoint: ProviderEndpoint,
    prompt: str,
    params: GenerationParams,
    timeout: float = DEFAULT_TIMEOUT,
    max_retries: int = DEFAULT_MAX_RETRIES,
    session=None,
) -> CompletionResult:
    """Send one chat-completion request and return its text and usage.

    Retries transport failures and rate limits up to ``max_retries`` times
    with exponential backoff plus jitter; context-window overflow is fatal
    and reports the limit. ``session`` is any object with requests' ``post``
    signature (used for testing).
    """
    estimated = estimate_tokens(prompt)
    if estimated > endpoint.context_window:
        raise ContextLengthError(
            f"prompt is ~{estimated} tokens (approximate), which exceeds the "
            f"{endpoint.context_window}-token window of {endpoint.name}"
        )
    if endpoint.request_shape == "mock":
        return _mock_complete(prompt, params)

    url, headers, payload = _build_request(endpoint, prompt, params)
    poster = session if session is not None else requests
    last_error: Exception | None = None
    started = time.monotonic()
    with _endpoint_semaphore(endpoint):
        for attempt in range(max_retries + 1):
            try:
                response = poster.post(url, headers=headers, json=payload, timeout=timeout)
            except requests.RequestException as exc:
                last_error = exc
                if attempt < max_retries:
                    _backoff(attempt)
                continue
            status = response.status_code
            if status == 429:
                last_error = TransportError(f"{endpoint.name} rate limited (429)")
                if attempt < max_retries:
                    retry_after = response.headers.get("Retry-After")
                    _backoff(attempt, float(retry_after) if retry_after else None)
                continue
            if status >= 500:
                last_error = TransportError(f"{endpoint.name} returned {status}")
                if attempt < max_retries:
                    _backoff(attempt)
                continue
            body_text = response.text
            if status >= 400:
                lowered = body_text.lower()
                if any(marker in lowered for marker in _CONTEXT_ERROR_MARKERS):
                    raise ContextLengthError(
                        f"{endpoint.name} rejected the prompt (~{estimated} tokens) as over "
                        f"its {endpoint.context_window}-token window: {body_text[:200]}"
                    )
                raise TransportError(f"{endpoint.name} returned {status}: {body_text[:200]}")
            try:
                body = response.json()
            except ValueError as exc:
                raise ResponseFormatError(
                    f"{endpoint.name} returned non-JSON body: {body_text[:100]}"
                ) from exc
            text, in_tokens, out_tokens, approximate = _parse_response(endpoint, body, prompt)
            usage = UsageRecord(
                input_tokens=in_tokens,
                output_tokens=out_tokens,
                latency=time.monotonic() - started,
                approximate=approximate,
            )
            return CompletionResult(text=text, usage=usage)
    raise TransportError(
        f"request to {endpoint.name} failed after {max_retries + 1} attempts: {last_error}"
    )


def _backoff(attempt: int, retry_after: float | None = None) -> None:
    if retry_after is not None:
        _sleep(max(0.0, retry_after))
        return
    delay = 0.5 * (2**attempt)
    _sleep(delay + random.uniform(0, delay / 2))


# --- caching -------------------------------------------------------------


def cache_key(endpoint: ProviderEndpoint, prompt: str, params: GenerationParams) -> str:
    material = json.dumps(
        {
            "endpoint": endpoint.name,
            "model": params.model,
            "prompt": prompt,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "frequency_penalty": params.frequency_penalty,
            "presence_penalty": params.presence_penalty,
            "max_output_tokens": params.max_output_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def cached_complete(
    cache_dir: str | Path,
    endpoint: ProviderEndpoint,
    prompt: str,
    params: GenerationParams,
    **kwargs,
) -> CompletionResult:
    """complete() behind a one-file-per-key JSON cache.

    Hits skip the network entirely; corrupted entries are treated as misses
    (with a warning) and rewritten. Writes are atomic (temp file + rename).
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{cache_key(endpoint, prompt, params)}.json"
    if path.exists():
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            return CompletionResult(
                text=entry["text"],
                usage=UsageRecord(
                    input_tokens=int(entry["input_tokens"]),
                    output_tokens=int(entry["output_tokens"]),
                    latency=float(entry["latency"]),
                    approximate=bool(entry.get("approximate", False)),
                ),
            )
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("cache entry %s is corrupt (%r); recomputing", path.name, exc)
    result = complete(endpoint, prompt, params, **kwargs)
    entry = {
        "text": result.text,
        "input_tokens": result.usage.input_tokens,
        "output_tokens": result.usage.output_tokens,
        "latency": result.usage.latency,
        "approximate": result.usage.approximate,
        "model": params.model,
        "endpoint": endpoint.name,
    }
    fd, tmp_name = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return result


# --- offline mock provider ------------------------------------------------

_REVIEW_LINE_RE = re.compile(r"^\[\d+\] (?:\(\d★\) )?(.*)$", re.M)
_REPEAT_RE = re.compile(r"Repeat the following 2 steps (\d+) times")
_FILLERS = (
    "many reviewers describe",
    "several users report",
    "others mention",
    "some accounts highlight",
    "frequent comments concern",
)


def _mock_vocabulary(prompt: str) -> list[str]:
    words = set()
    for line in _REVIEW_LINE_RE.findall(prompt):
        for word in re.findall(r"[a-zA-Z]{5,}", line):
            words.add(word.lower())
    return sorted(words)


def _mock_complete(prompt: str, params: GenerationParams) -> CompletionResult:
    """Deterministic canned response derived from the prompt digest."""
    digest = hashlib.sha256((params.model + "\x00" + prompt).encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    if "missing_entities" in prompt:
        match = _REPEAT_RE.search(prompt)
        iterations = int(match.group(1)) if match else 5
        text = _mock_chain_json(prompt, iterations, rng)
    elif "single integer" in prompt:
        text = str(rng.choice((3, 4, 4, 5)))
    elif "JSON array of strings" in prompt:
        vocabulary = _mock_vocabulary(prompt) or ["interface", "pricing", "support"]
        count = min(len(vocabulary), rng.randint(3, 6))
        text = json.dumps(rng.sample(vocabulary, count))
    else:
        vocabulary = _mock_vocabulary(prompt) or ["interface", "pricing", "support"]
        picks = rng.sample(vocabulary, min(len(vocabulary), 8))
        text = (
            "Users praise "
            + ", ".join(picks[: len(picks) // 2 or 1])
            + " but criticize "
            + ", ".join(picks[len(picks) // 2 or 1 :] or ["stability"])
            + "."
        )
    usage = UsageRecord(
        input_tokens=estimate_tokens(prompt),
        output_tokens=estimate_tokens(text),
        latency=0.0,
        approximate=True,
    )
    return CompletionResult(text=text, usage=usage)


def _mock_chain_json(prompt: str, iterations: int, rng: random.Random) -> str:
    vocabulary = _mock_vocabulary(prompt) or ["interface", "pricing", "support", "updates"]
    mentioned: list[str] = []
    elements = []
    for step in range(iterations):
        available = [w for w in vocabulary if w not in mentioned]
        new_entities = (
            rng.sample(available, min(len(available), rng.randint(1, 3))) if available else []
        )
        mentioned.extend(new_entities)
        filler = _FILLERS[step % len(_FILLERS)]
        summary = (
            f"This summary of the reviews notes that {filler} "
            + ", ".join(mentioned or ["the app"])
            + "; overall sentiment remains mixed across ratings."
        )
        elements.append({"missing_entities": "; ".join(new_entities), "denser_summary": summary})
    return json.dumps(elements, ensure_ascii=False)


def with_cost(usage: UsageRecord, price: Price) -> UsageRecord:
    return replace(usage, cost=estimate_cost(usage, price))
