"""Chat-completions client with caching, retries, and a scriptable mock.

The wire protocol is the OpenAI-style ``POST <endpoint>/chat/completions``
with a JSON body ``{model, messages: [{role, content}], temperature?}``;
the reply content is read from ``choices[0].message.content``. Any
conforming server works. Credentials come from ``SUBJSCAN_API_KEY`` and
the base URL from ``SUBJSCAN_ENDPOINT`` (or explicit configuration).

Responses are cached on disk keyed by a content digest of the request,
one JSON record per file at ``<cache>/<first 2 hex>/<digest>.json``, so
repeated runs are free and the cache stays diff-able.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

from .errors import ConfigError, TransportError

API_KEY_ENV = "SUBJSCAN_API_KEY"
ENDPOINT_ENV = "SUBJSCAN_ENDPOINT"

ROLES = ("system", "user", "assistant")


class AuthError(TransportError):
    """401/403 from the endpoint; never retried."""


class RateLimitedExhausted(TransportError):
    """A retryable failure (429/5xx) persisted through every attempt."""


class MalformedResponse(TransportError):
    """Response body lacks the expected content field."""


class UpstreamTimeout(TransportError):
    """The final attempt timed out."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigError(f"message role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class SamplingParams:
    """Decoding knobs; temperature defaults to 0 for reproducibility."""

    temperature: Optional[float] = 0.0
    max_tokens: Optional[int] = None


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: Optional[float] = 0.0
    max_tokens: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ConfigError("a chat request needs at least one message")

    @classmethod
    def user(cls, model: str, content: str, sampling: Optional[SamplingParams] = None) -> "ChatRequest":
        sampling = sampling or SamplingParams()
        return cls(
            model=model,
            messages=(ChatMessage("user", content),),
            temperature=sampling.temperature,
            max_tokens=sampling.max_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    model: str
    usage: Optional[dict] = None
    latency_ms: float = 0.0


@dataclass(frozen=True)
class ChatExchange:
    digest: str
    request: ChatRequest
    response: ChatResponse
    timestamp: str


def cache_key(request: ChatRequest) -> str:
    """Stable content digest over model, messages, and sampling params."""
    payload = {
        "model": request.model,
        "messages": [[m.role, m.content] for m in request.messages],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _exchange_to_dict(exchange: ChatExchange) -> dict:
    return {
        "digest": exchange.digest,
        "request": {
            "model": exchange.request.model,
            "messages": [{"role": m.role, "content": m.content} for m in exchange.request.messages],
            "temperature": exchange.request.temperature,
            "max_tokens": exchange.request.max_tokens,
        },
        "response": {
            "content": exchange.response.content,
            "model": exchange.response.model,
            "usage": exchange.response.usage,
            "latency_ms": exchange.response.latency_ms,
        },
        "timestamp": exchange.timestamp,
    }


def _exchange_from_dict(obj: dict) -> ChatExchange:
    req = obj["request"]
    resp = obj["response"]
    return ChatExchange(
        digest=obj["digest"],
        request=ChatRequest(
            model=req["model"],
            messages=tuple(ChatMessage(m["role"], m["content"]) for m in req["messages"]),
            temperature=req.get("temperature"),
            max_tokens=req.get("max_tokens"),
        ),
        response=ChatResponse(
            content=resp["content"],
            model=resp.get("model", ""),
            usage=resp.get("usage"),
            latency_ms=resp.get("latency_ms", 0.0),
        ),
        timestamp=obj.get("timestamp", ""),
    )


class ResponseCache:
    """Digest-addressed on-disk exchange store, safe for threaded use."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / f"{digest}.json"

    def get(self, digest: str) -> Optional[ChatExchange]:
        path = self._path(digest)
        if not path.exists():
            return None
        return _exchange_from_dict(json.loads(path.read_text(encoding="utf-8")))

    def put(self, exchange: ChatExchange) -> None:
        path = self._path(exchange.digest)
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(_exchange_to_dict(exchange), ensure_ascii=False) + "\n", encoding="utf-8")
            tmp.replace(path)


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff: base 1s, factor 2, jitter +-20%, 5 attempts."""

    base: float = 1.0
    factor: float = 2.0
    jitter: float = 0.2
    max_attempts: int = 5

    def delay(self, attempt: int, rng: random.Random) -> float:
        raw = self.base * self.factor ** (attempt - 1)
        return raw * (1.0 + rng.uniform(-self.jitter, self.jitter))


class BackendStatusError(Exception):
    """Raised by backends to surface an HTTP-level failure."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")
        self.status = status


class BackendTimeout(Exception):
    pass


class HttpBackend:
    """Real transport against an OpenAI-compatible chat endpoint."""

    def __init__(self, endpoint: str, api_key: str, timeout: float = 120.0, transport=None):
        self.endpoint = endpoint.rstrip("/")
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self._client = httpx.Client(timeout=timeout, transport=transport)

    @classmethod
    def from_env(cls, endpoint: Optional[str] = None) -> "HttpBackend":
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ConfigError(f"no endpoint configured (flag or {ENDPOINT_ENV})")
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"{API_KEY_ENV} is not set")
        return cls(endpoint=endpoint, api_key=api_key)

    def send(self, request: ChatRequest) -> ChatResponse:
        payload: dict = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        }
        if request.temperature is not None:
            payload["temperature"] = request.temperature
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        started = time.monotonic()
        try:
            resp = self._client.post(f"{self.endpoint}/chat/completions", json=payload, headers=self._headers)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendStatusError(599, str(exc)) from exc
        latency_ms = (time.monotonic() - started) * 1000.0
        if resp.status_code != 200:
            raise BackendStatusError(resp.status_code, resp.text[:200])
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponse(f"response body lacks choices[0].message.content: {exc}") from exc
        if content is None:
            raise MalformedResponse("response content is null")
        return ChatResponse(
            content=content,
            model=body.get("model", request.model),
            usage=body.get("usage"),
            latency_ms=latency_ms,
        )


@dataclass
class MockRule:
    """One scripted behavior: when ``pattern`` matches the prompt text,
    either answer ``content`` or fail with ``status``, up to ``times``."""

    pattern: str
    content: Optional[str] = None
    status: Optional[int] = None
    times: Optional[int] = None
    delay: float = 0.0
    _regex: re.Pattern = field(init=False, repr=False)
    _used: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        self._regex = re.compile(self.pattern, re.DOTALL)

    def available(self) -> bool:
        return self.times is None or self._used < self.times


class MockBackend:
    """Deterministic in-process stand-in for the chat endpoint.

    Rules are checked in order against the concatenated message contents;
    the first available match wins. Tracks total and concurrent calls so
    tests can assert the gateway's retry and concurrency contracts.
    """

    def __init__(self, rules: Sequence[MockRule], default_content: Optional[str] = None):
        self.rules = list(rules)
        self.default_content = default_content
        self.calls = 0
        self.max_concurrent = 0
        self._inflight = 0
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, script: dict) -> "MockBackend":
        rules = [
            MockRule(
                pattern=entry["match"],
                content=entry.get("content"),
                status=entry.get("status"),
                times=entry.get("times"),
                delay=entry.get("delay", 0.0),
            )
            for entry in script.get("rules", [])
        ]
        return cls(rules, default_content=script.get("default"))

    @classmethod
    def from_script_file(cls, path: str | Path) -> "MockBackend":
        return cls.from_script(json.loads(Path(path).read_text(encoding="utf-8")))

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            self._inflight += 1
            self.max_concurrent = max(self.max_concurrent, self._inflight)
            rule = self._match(request)
        try:
            if rule is not None and rule.delay:
                time.sleep(rule.delay)
            if rule is None:
                if self.default_content is not None:
                    return ChatResponse(content=self.default_content, model=request.model)
                raise BackendStatusError(500, "no mock rule matched the request")
            if rule.status is not None:
                if rule.status == 408:
                    raise BackendTimeout("scripted timeout")
                raise BackendStatusError(rule.status, "scripted failure")
            return ChatResponse(content=rule.content or "", model=request.model)
        finally:
            with self._lock:
                self._inflight -= 1

    def _match(self, request: ChatRequest) -> Optional[MockRule]:
        target = "\n".join(m.content for m in request.messages)
        for rule in self.rules:
            if rule.available() and rule._regex.search(target):
                rule._used += 1
                return rule
        return None


class ChatGateway:
    """Caching, retrying, concurrency-bounded front to a chat backend."""

    def __init__(
        self,
        backend,
        cache: Optional[ResponseCache] = None,
        retry: RetryPolicy = RetryPolicy(),
        concurrency_limit: int = 4,
        sleeper: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        if concurrency_limit < 1:
            raise ConfigError(f"concurrency_limit must be >= 1, got {concurrency_limit}")
        self.backend = backend
        self.cache = cache
        self.retry = retry
        self._semaphore = threading.Semaphore(concurrency_limit)
        self._sleep = sleeper
        self._rng = rng or random.Random()
        self._calls_lock = threading.Lock()
        self.backend_calls = 0

    def exchange(self, request: ChatRequest) -> ChatExchange:
        """Resolve a request to an exchange, via cache when possible."""
        digest = cache_key(request)
        if self.cache is not None:
            hit = self.cache.get(digest)
            if hit is not None:
                return hit
        response = self._send_with_retries(request)
        exchange = ChatExchange(
            digest=digest,
            request=request,
            response=response,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        if self.cache is not None:
            self.cache.put(exchange)
        return exchange

    def complete(self, request: ChatRequest) -> ChatResponse:
        return self.exchange(request).response

    def _send_with_retries(self, request: ChatRequest) -> ChatResponse:
        last: Exception | None = None
        for attempt in range(1, self.retry.max_attempts + 1):
            with self._calls_lock:
                self.backend_calls += 1
            try:
                with self._semaphore:
                    return self.backend.send(request)
            except BackendStatusError as exc:
                if exc.status in (401, 403):
                    raise AuthError(str(exc)) from exc
                if exc.status == 429 or exc.status >= 500:
                    last = exc  # retryable
                else:
                    raise TransportError(str(exc)) from exc
            except BackendTimeout as exc:
                last = exc
            if attempt < self.retry.max_attempts:
                self._sleep(self.retry.delay(attempt, self._rng))
        if isinstance(last, BackendTimeout):
            raise UpstreamTimeout(f"timed out after {self.retry.max_attempts} attempts") from last
        raise RateLimitedExhausted(
            f"gave up after {self.retry.max_attempts} attempts: {last}"
        ) from last
