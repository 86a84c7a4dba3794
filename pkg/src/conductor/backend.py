"""Completion backends, token accounting, and money-cost computation.

Two backends share one interface:

* LiveBackend posts to any OpenAI-compatible ``{base_url}/chat/completions``
  endpoint with bearer auth from the CONDUCTOR_API_KEY environment variable,
  retrying transient failures with exponential backoff (never on plain 4xx).
* ReplayBackend answers from a fixture file keyed by a cryptographic hash of
  the canonicalized request and fails loudly on a miss, which makes whole
  pipeline runs deterministic and catches any template drift immediately.

Costs use a single blended per-1k-token USD rate per model. Each call's cost
is quantized to six decimal places (half-even) before summing, so cost is
exactly additive over any split of the usage list.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import unicodedata
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Callable, Iterable

from conductor.core import CallUsage
from conductor.errors import (
    AuthMissing,
    BackendUnavailable,
    ConfigError,
    RateLimited,
    ReplayMiss,
    UnpricedModel,
)
from conductor.retrieval import tokenize

API_KEY_ENV = "CONDUCTOR_API_KEY"
DEFAULT_TIMEOUT_S = 120.0
DEFAULT_ATTEMPTS = 3
DEFAULT_MAX_IN_FLIGHT = 4

_CENT_MICRO = Decimal("0.000001")


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[tuple[str, str], ...]  # ordered (role, content)
    model_id: str
    temperature: float = 0.0
    top_p: float = 0.1
    max_tokens: int | None = None
    stop: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if not self.messages:
            raise ValueError("request needs at least one message")

    @classmethod
    def from_prompt(cls, prompt: str, model_id: str, **kwargs: Any) -> "CompletionRequest":
        return cls(messages=(("user", prompt),), model_id=model_id, **kwargs)

    @property
    def prompt_text(self) -> str:
        """Single-message content, or canonical JSON for multi-message requests."""
        if len(self.messages) == 1:
            return self.messages[0][1]
        return json.dumps([list(m) for m in self.messages], ensure_ascii=False)


def request_hash(request: CompletionRequest) -> str:
    """Stable fixture key: sha256 over (model_id, messages) only.

    Sampling parameters are deliberately excluded so fixtures survive
    temperature/stop tweaks that cannot change a recorded response.
    """
    canonical = json.dumps(
        {"model": request.model_id, "messages": [list(m) for m in request.messages]},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Generation:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: int
    backend_tag: str
    model_id: str

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def usage(self) -> CallUsage:
        return CallUsage(
            model_id=self.model_id,
            backend_tag=self.backend_tag,
            prompt_tokens=self.prompt_tokens,
            completion_tokens=self.completion_tokens,
            latency_ms=self.latency_ms,
        )


def estimate_tokens(text: str) -> int:
    """Rough token estimate: word/CJK terms plus punctuation marks.

    Only used when a backend reports no usage; never overrides reported
    numbers.
    """
    punct = sum(1 for ch in text if unicodedata.category(ch).startswith("P"))
    return len(tokenize(text)) + punct


# ---------------------------------------------------------------------------
# Price table


@dataclass(frozen=True)
class PriceTable:
    """model_id -> USD per 1000 tokens, one blended rate per model."""

    rates: dict[str, Decimal]

    def __post_init__(self) -> None:
        for model_id, rate in self.rates.items():
            if rate <= 0:
                raise ValueError(f"rate for {model_id!r} must be positive")

    def rate_for(self, model_id: str) -> Decimal:
        if model_id not in self.rates:
            raise UnpricedModel(model_id)
        return self.rates[model_id]

    @classmethod
    def from_mapping(cls, mapping: dict[str, str | float | Decimal]) -> "PriceTable":
        return cls({model: Decimal(str(rate)) for model, rate in mapping.items()})

    @classmethod
    def load(cls, path: str) -> "PriceTable":
        with open(path, encoding="utf-8") as handle:
            try:
                mapping = json.load(handle)
                if not isinstance(mapping, dict):
                    raise ValueError("price table must be a JSON object")
                return cls.from_mapping(mapping)
            except (json.JSONDecodeError, ArithmeticError, ValueError) as exc:
                raise ConfigError(f"invalid price table {path}: {exc}")


DEFAULT_PRICES = PriceTable.from_mapping(
    {
        "gpt-3.5-turbo": "0.002",
        "gpt-3.5-turbo-0613": "0.002",
        "gpt-4": "0.03",
        "gpt-4-0613": "0.03",
    }
)


def call_cost(usage: CallUsage, prices: PriceTable) -> Decimal:
    rate = prices.rate_for(usage.model_id)
    tokens = Decimal(usage.prompt_tokens + usage.completion_tokens)
    return (tokens / Decimal(1000) * rate).quantize(_CENT_MICRO, rounding=ROUND_HALF_EVEN)


def compute_cost(usages: Iterable[CallUsage], prices: PriceTable) -> Decimal:
    """Sum of per-call costs, each quantized to 6 places half-even.

    Quantizing per call (not once at the end) is what makes cost exactly
    additive over any concatenation of usage lists.
    """
    total = Decimal("0.000000")
    for usage in usages:
        total += call_cost(usage, prices)
    return total


# ---------------------------------------------------------------------------
# Backends


class Backend:
    def complete(self, request: CompletionRequest) -> Generation:
        raise NotImplementedError


class TokenBucket:
    """Request-rate gate: `rate` tokens/second up to `capacity` burst.

    acquire() blocks (via the injected sleep) until a token is available.
    Thread-safe; the clock is injectable so tests can drive it.
    """

    def __init__(
        self,
        rate: float,
        capacity: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep_fn: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep_fn
        self._updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._updated) * self.rate
                )
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class LiveBackend(Backend):
    """OpenAI-compatible chat-completions client.

    Admission is bounded by a semaphore (default 4 in-flight) and, when
    `requests_per_second` is set, by a token-bucket rate limiter. Transient
    failures (connection errors, 429, 5xx) retry with exponential backoff;
    other 4xx fail immediately. `post_fn` and `sleep_fn` are injectable for
    tests.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str = API_KEY_ENV,
        attempts: int = DEFAULT_ATTEMPTS,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        requests_per_second: float | None = None,
        post_fn: Callable[..., Any] | None = None,
        sleep_fn: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.attempts = attempts
        self.timeout_s = timeout_s
        self._admission = threading.BoundedSemaphore(max_in_flight)
        self._bucket = (
            TokenBucket(requests_per_second, sleep_fn=sleep_fn)
            if requests_per_second
            else None
        )
        self._sleep = sleep_fn
        if post_fn is None:
            import requests

            post_fn = requests.post
        self._post = post_fn

    def complete(self, request: CompletionRequest) -> Generation:
        api_key = os.environ.get(self.api_key_env, "").strip()
        if not api_key:
            raise AuthMissing(self.api_key_env)
        body: dict[str, Any] = {
            "model": request.model_id,
            "messages": [
                {"role": role, "content": content} for role, content in request.messages
            ],
            "temperature": request.temperature,
            "top_p": request.top_p,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        if request.stop:
            body["stop"] = list(request.stop)
        headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        }
        url = f"{self.base_url}/chat/completions"

        last_status: int | None = None
        last_error = ""
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(2.0 ** (attempt - 1))
            started = time.monotonic()
            try:
                with self._admission:
                    if self._bucket is not None:
                        self._bucket.acquire()
                    response = self._post(
                        url, json=body, headers=headers, timeout=self.timeout_s
                    )
            except Exception as exc:  # connection-level failure: retry
                last_status, last_error = None, repr(exc)
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            status = getattr(response, "status_code", 0)
            if status == 429 or status >= 500:
                last_status, last_error = status, f"HTTP {status}"
                continue
            if status >= 400:
                raise BackendUnavailable(f"HTTP {status}: {_body_head(response)}")
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage") or {}
            return Generation(
                text=text,
                prompt_tokens=usage.get("prompt_tokens", estimate_tokens(request.prompt_text)),
                completion_tokens=usage.get("completion_tokens", estimate_tokens(text)),
                latency_ms=latency_ms,
                backend_tag="live",
                model_id=request.model_id,
            )
        if last_status == 429:
            raise RateLimited(f"still rate-limited after {self.attempts} attempts")
        raise BackendUnavailable(
            f"gave up after {self.attempts} attempts (last: {last_error})"
        )


def _body_head(response: Any) -> str:
    try:
        return str(response.text)[:200]
    except Exception:
        return "<unreadable body>"


def make_fixture_record(
    model_id: str,
    prompt: str,
    response: str,
    prompt_tokens: int | None = None,
    completion_tokens: int | None = None,
) -> dict[str, Any]:
    """One replay fixture line for a single-message prompt."""
    request = CompletionRequest.from_prompt(prompt, model_id)
    return {
        "hash": request_hash(request),
        "model": model_id,
        "prompt": prompt,
        "response": response,
        "prompt_tokens": prompt_tokens if prompt_tokens is not None else estimate_tokens(prompt),
        "completion_tokens": (
            completion_tokens if completion_tokens is not None else estimate_tokens(response)
        ),
    }


class ReplayBackend(Backend):
    """Deterministic completions from a fixture file, keyed by request hash."""

    def __init__(self, fixtures: Iterable[dict[str, Any]]):
        self._by_hash: dict[str, dict[str, Any]] = {}
        for record in fixtures:
            self._by_hash[record["hash"]] = record

    @classmethod
    def load(cls, path: str) -> "ReplayBackend":
        records = []
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    record["hash"], record["response"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ConfigError(
                        f"invalid replay fixture {path}:{line_no}: {exc}"
                    )
                records.append(record)
        return cls(records)

    def __len__(self) -> int:
        return len(self._by_hash)

    def complete(self, request: CompletionRequest) -> Generation:
        key = request_hash(request)
        record = self._by_hash.get(key)
        if record is None:
            raise ReplayMiss(key, request.prompt_text[:80])
        return Generation(
            text=record["response"],
            prompt_tokens=int(record["prompt_tokens"]),
            completion_tokens=int(record["completion_tokens"]),
            latency_ms=0,
            backend_tag="replay",
            model_id=request.model_id,
        )
