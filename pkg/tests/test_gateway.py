import json
import random
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from pipeline_fixtures import make_gateway
from subjscan.errors import ConfigError, TransportError
from subjscan.gateway import (
    AuthError,
    ChatGateway,
    ChatMessage,
    ChatRequest,
    HttpBackend,
    MalformedResponse,
    MockBackend,
    MockRule,
    RateLimitedExhausted,
    ResponseCache,
    RetryPolicy,
    UpstreamTimeout,
    cache_key,
)


def req(content="hello", model="o3-mini", **kwargs):
    return ChatRequest.user(model=model, content=content, **kwargs)


class TestCacheKey:
    def test_identical_requests_equal(self):
        assert cache_key(req()) == cache_key(req())

    def test_model_changes_digest(self):
        assert cache_key(req(model="o3-mini")) != cache_key(req(model="gpt-4.1-mini"))

    def test_message_order_changes_digest(self):
        a = ChatRequest(model="m", messages=(ChatMessage("user", "one"), ChatMessage("user", "two")))
        b = ChatRequest(model="m", messages=(ChatMessage("user", "two"), ChatMessage("user", "one")))
        assert cache_key(a) != cache_key(b)

    def test_sampling_changes_digest(self):
        a = ChatRequest(model="m", messages=(ChatMessage("user", "x"),), temperature=0.0)
        b = ChatRequest(model="m", messages=(ChatMessage("user", "x"),), temperature=0.7)
        assert cache_key(a) != cache_key(b)


class TestMockBackend:
    def test_canned_response(self):
        gateway, _ = make_gateway([{"pattern": ".*", "content": "OBJ-canned"}])
        assert gateway.complete(req()).content == "OBJ-canned"

    def test_no_rule_matched(self):
        gateway, _ = make_gateway([{"pattern": "never-present", "content": "x"}], max_attempts=1)
        with pytest.raises(RateLimitedExhausted):
            gateway.complete(req())

    def test_default_content(self):
        gateway, _ = make_gateway([], default="fallback answer")
        assert gateway.complete(req()).content == "fallback answer"

    def test_from_script_file(self, tmp_path):
        script = {"rules": [{"match": "hi", "content": "yo"}], "default": "dunno"}
        path = tmp_path / "script.json"
        path.write_text(json.dumps(script), encoding="utf-8")
        backend = MockBackend.from_script_file(path)
        gw = ChatGateway(backend, sleeper=lambda _s: None)
        assert gw.complete(req("hi there")).content == "yo"
        assert gw.complete(req("unmatched")).content == "dunno"


class TestRetries:
    def test_two_429s_then_success(self):
        gateway, backend = make_gateway(
            [
                {"pattern": ".*", "status": 429, "times": 2},
                {"pattern": ".*", "content": "finally"},
            ]
        )
        assert gateway.complete(req()).content == "finally"
        assert backend.calls == 3
        assert gateway.backend_calls == 3

    def test_auth_error_never_retried(self):
        for status in (401, 403):
            gateway, backend = make_gateway([{"pattern": ".*", "status": status}])
            with pytest.raises(AuthError):
                gateway.complete(req())
            assert backend.calls == 1

    def test_rate_limit_exhausted(self):
        gateway, backend = make_gateway([{"pattern": ".*", "status": 429}], max_attempts=5)
        with pytest.raises(RateLimitedExhausted):
            gateway.complete(req())
        assert backend.calls == 5

    def test_server_errors_retryable(self):
        gateway, backend = make_gateway(
            [{"pattern": ".*", "status": 503, "times": 1}, {"pattern": ".*", "content": "ok"}]
        )
        assert gateway.complete(req()).content == "ok"
        assert backend.calls == 2

    def test_timeout_exhaustion(self):
        gateway, _ = make_gateway([{"pattern": ".*", "status": 408}], max_attempts=3)
        with pytest.raises(UpstreamTimeout):
            gateway.complete(req())

    def test_other_4xx_not_retried(self):
        gateway, backend = make_gateway([{"pattern": ".*", "status": 404}])
        with pytest.raises(TransportError):
            gateway.complete(req())
        assert backend.calls == 1

    def test_backoff_schedule_with_jitter(self):
        policy = RetryPolicy()
        rng = random.Random(0)
        for attempt, nominal in ((1, 1.0), (2, 2.0), (3, 4.0)):
            for _ in range(100):
                d = policy.delay(attempt, rng)
                assert nominal * 0.8 <= d <= nominal * 1.2

    def test_sleeps_between_attempts(self):
        slept = []
        backend = MockBackend([MockRule(pattern=".*", status=429, times=2), MockRule(pattern=".*", content="ok")])
        gateway = ChatGateway(backend, sleeper=slept.append, rng=random.Random(1))
        gateway.complete(req())
        assert len(slept) == 2
        assert slept[0] < slept[1]


class TestCache:
    def test_second_call_served_from_cache(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache")
        gateway, backend = make_gateway([{"pattern": ".*", "content": "answer"}], cache=cache)
        first = gateway.complete(req())
        second = gateway.complete(req())
        assert backend.calls == 1
        assert second.content == first.content

    def test_round_trip_byte_identical(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache")
        content = "exact bytes é中文 and \"quotes\"\nline two"
        gateway, _ = make_gateway([{"pattern": ".*", "content": content}], cache=cache)
        exchange = gateway.exchange(req())
        hit = cache.get(exchange.digest)
        assert hit is not None
        assert hit.response.content.encode("utf-8") == content.encode("utf-8")

    def test_cache_dir_layout(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache")
        gateway, _ = make_gateway([{"pattern": ".*", "content": "x"}], cache=cache)
        exchange = gateway.exchange(req())
        expected = tmp_path / "cache" / exchange.digest[:2] / f"{exchange.digest}.json"
        assert expected.exists()
        assert json.loads(expected.read_text())["digest"] == exchange.digest

    def test_cache_shared_across_gateways(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache")
        gw1, b1 = make_gateway([{"pattern": ".*", "content": "one"}], cache=cache)
        gw1.complete(req())
        gw2, b2 = make_gateway([{"pattern": ".*", "content": "two"}], cache=ResponseCache(tmp_path / "cache"))
        assert gw2.complete(req()).content == "one"
        assert b2.calls == 0


class TestConcurrency:
    def test_inflight_bounded(self):
        backend = MockBackend([MockRule(pattern=".*", content="ok", delay=0.02)])
        gateway = ChatGateway(backend, concurrency_limit=2, sleeper=lambda _s: None)
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda i: gateway.complete(req(f"msg {i}")), range(16)))
        assert backend.calls == 16
        assert backend.max_concurrent <= 2

    def test_rejects_nonpositive_limit(self):
        with pytest.raises(ConfigError):
            ChatGateway(MockBackend([]), concurrency_limit=0)


def _http_gateway(handler, max_attempts=2):
    backend = HttpBackend("https://llm.example", "k", transport=httpx.MockTransport(handler))
    return ChatGateway(backend, retry=RetryPolicy(max_attempts=max_attempts), sleeper=lambda _s: None)


class TestHttpBackend:
    def test_happy_path(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={
                "model": "o3-mini-2025",
                "choices": [{"message": {"role": "assistant", "content": "hi there"}}],
                "usage": {"total_tokens": 5},
            })

        response = _http_gateway(handler).complete(req("ping", model="o3-mini"))
        assert response.content == "hi there"
        assert response.model == "o3-mini-2025"
        assert response.usage == {"total_tokens": 5}
        assert seen["url"] == "https://llm.example/chat/completions"
        assert seen["auth"] == "Bearer k"
        assert seen["body"]["model"] == "o3-mini"
        assert seen["body"]["messages"] == [{"role": "user", "content": "ping"}]
        assert seen["body"]["temperature"] == 0.0

    def test_malformed_body(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        with pytest.raises(MalformedResponse):
            _http_gateway(handler).complete(req())

    def test_timeout_maps_to_upstream_timeout(self):
        def handler(request):
            raise httpx.ReadTimeout("slow")

        with pytest.raises(UpstreamTimeout):
            _http_gateway(handler).complete(req())

    def test_500_retried_then_exhausted(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(500, text="boom")

        with pytest.raises(RateLimitedExhausted):
            _http_gateway(handler, max_attempts=3).complete(req())
        assert calls["n"] == 3

    def test_from_env_requires_config(self, monkeypatch):
        monkeypatch.delenv("SUBJSCAN_ENDPOINT", raising=False)
        monkeypatch.delenv("SUBJSCAN_API_KEY", raising=False)
        with pytest.raises(ConfigError):
            HttpBackend.from_env()
        monkeypatch.setenv("SUBJSCAN_ENDPOINT", "https://llm.example")
        with pytest.raises(ConfigError):
            HttpBackend.from_env()
        monkeypatch.setenv("SUBJSCAN_API_KEY", "secret")
        backend = HttpBackend.from_env()
        assert backend.endpoint == "https://llm.example"


class TestRequestValidation:
    def test_empty_messages_rejected(self):
        with pytest.raises(ConfigError):
            ChatRequest(model="m", messages=())

    def test_bad_role_rejected(self):
        with pytest.raises(ConfigError):
            ChatMessage("narrator", "once upon a time")
