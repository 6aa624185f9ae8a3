"""Provider transports, retry budgets, and the parse-retry loop."""

from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cracking_aegis.provider as provider_mod
from cracking_aegis.errors import (
    AuthError,
    ProtocolError,
    TransportError,
)
from cracking_aegis.errors import TimeoutError as RequestTimeout
from cracking_aegis.provider import (
    ChatMessage,
    LiveProvider,
    ProviderConfig,
    ScriptedProvider,
    check_history,
    complete,
    complete_parsed,
)
from helpers import make_reply

HISTORY = [
    ChatMessage(role="system", content="rules"),
    ChatMessage(role="user", content="hi"),
]

CORRECTIVE = "format reminder"


class FlakyProvider:
    """Scripted provider whose queue can also hold exceptions to raise."""

    def __init__(self, steps, config=None):
        self.steps = list(steps)
        self.config = config or ProviderConfig(backoff_base=0.0)
        self.calls = 0

    def request_once(self, history):
        self.calls += 1
        step = self.steps.pop(0)
        if isinstance(step, Exception):
            raise step
        return step


class TestScriptedProvider:
    def test_replies_in_order(self):
        p = ScriptedProvider(["a", "b"])
        assert p.request_once(HISTORY) == "a"
        assert p.request_once(HISTORY) == "b"
        assert p.remaining == 0

    def test_logs_request_histories(self):
        p = ScriptedProvider(["a"])
        p.request_once(HISTORY)
        assert p.requests == [HISTORY]

    def test_exhaustion_is_transport_error(self):
        p = ScriptedProvider([])
        with pytest.raises(TransportError):
            p.request_once(HISTORY)


class TestConfig:
    def test_defaults(self):
        cfg = ProviderConfig()
        assert cfg.max_retries == 2
        assert cfg.api_key_env == "AEGIS_API_KEY"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"temperature": -0.1},
            {"temperature": 2.5},
            {"timeout": 0},
            {"max_retries": -1},
            {"max_retries": 6},
            {"backoff_base": -1.0},
        ],
    )
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ValueError):
            ProviderConfig(**kwargs)


class TestCheckHistory:
    def test_accepts_well_formed(self):
        check_history(HISTORY)

    @pytest.mark.parametrize(
        "history",
        [
            [],
            [ChatMessage(role="user", content="hi")],
            [ChatMessage(role="system", content="a"), ChatMessage(role="system", content="b")],
            [ChatMessage(role="system", content="a"), ChatMessage(role="user", content="")],
            [ChatMessage(role="system", content="a"), ChatMessage(role="oracle", content="x")],
        ],
    )
    def test_rejects_malformed(self, history):
        with pytest.raises(ValueError):
            check_history(history)


class TestComplete:
    def test_retries_transient_failures(self):
        p = FlakyProvider([TransportError("down"), TransportError("down"), "answer"])
        result = complete(p, HISTORY)
        assert result.raw_text == "answer"
        assert result.attempt == 3
        assert p.calls == 3

    def test_exhausted_budget_reraises_last(self):
        p = FlakyProvider([TransportError("a"), TransportError("b"), TransportError("c")])
        with pytest.raises(TransportError, match="c"):
            complete(p, HISTORY)
        assert p.calls == 3

    def test_auth_error_fails_fast(self):
        p = FlakyProvider([AuthError("no key"), "never reached"])
        with pytest.raises(AuthError):
            complete(p, HISTORY)
        assert p.calls == 1

    def test_backoff_doubles(self, monkeypatch):
        naps = []
        monkeypatch.setattr(provider_mod.time, "sleep", naps.append)
        p = FlakyProvider(
            [TransportError("x"), TransportError("x"), "ok"],
            config=ProviderConfig(backoff_base=0.5),
        )
        complete(p, HISTORY)
        assert naps == [0.5, 1.0]

    def test_validates_history(self):
        with pytest.raises(ValueError):
            complete(ScriptedProvider(["a"]), [])


class TestCompleteParsed:
    def test_malformed_then_valid_takes_two_calls(self):
        p = ScriptedProvider(["not json", make_reply(reaction="fine")])
        resp = complete_parsed(p, HISTORY, CORRECTIVE)
        assert resp.aegis_reaction == "fine"
        assert len(p.requests) == 2

    def test_corrective_message_appended_between_attempts(self):
        p = ScriptedProvider(["not json", make_reply()])
        complete_parsed(p, HISTORY, CORRECTIVE)
        second = p.requests[1]
        assert second[:len(HISTORY)] == HISTORY
        assert second[-2] == ChatMessage(role="assistant", content="not json")
        assert second[-1] == ChatMessage(role="user", content=CORRECTIVE)

    def test_three_malformed_exhausts_budget(self):
        p = ScriptedProvider(["junk one", "junk two", "junk three"])
        with pytest.raises(ProtocolError) as err:
            complete_parsed(p, HISTORY, CORRECTIVE)
        assert err.value.last_raw == "junk three"
        assert len(p.requests) == 3

    def test_transport_and_parse_share_one_budget(self):
        p = FlakyProvider([TransportError("down"), "junk", make_reply()])
        resp = complete_parsed(p, HISTORY, CORRECTIVE)
        assert resp.aegis_reaction == "Noted."
        assert p.calls == 3

    def test_transport_failure_on_last_attempt_reraises(self):
        p = FlakyProvider(["junk", "junk", TransportError("down")])
        with pytest.raises(TransportError):
            complete_parsed(p, HISTORY, CORRECTIVE)
        assert p.calls == 3

    def test_auth_error_fails_fast(self):
        p = FlakyProvider(["junk", AuthError("denied")])
        with pytest.raises(AuthError):
            complete_parsed(p, HISTORY, CORRECTIVE)
        assert p.calls == 2

    def test_on_attempt_sees_every_raw_reply(self):
        p = ScriptedProvider(["junk", make_reply()])
        seen = []
        complete_parsed(p, HISTORY, CORRECTIVE, on_attempt=seen.append)
        assert seen == ["junk", make_reply()]

    @given(
        st.lists(st.sampled_from(["transport", "malformed", "valid"]), min_size=1, max_size=8),
        st.integers(min_value=0, max_value=5),
    )
    @settings(max_examples=200, deadline=None)
    def test_outbound_requests_never_exceed_budget(self, steps, max_retries):
        queue = []
        for step in steps:
            if step == "transport":
                queue.append(TransportError("down"))
            elif step == "malformed":
                queue.append("junk")
            else:
                queue.append(make_reply())
        queue.extend([make_reply()] * 8)  # pad so the queue never runs dry
        p = FlakyProvider(queue, config=ProviderConfig(max_retries=max_retries, backoff_base=0.0))
        try:
            complete_parsed(p, HISTORY, CORRECTIVE)
        except (ProtocolError, TransportError):
            pass
        assert p.calls <= 1 + max_retries


def _chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


class TestLiveProvider:
    def make(self, handler, monkeypatch, **cfg) -> LiveProvider:
        monkeypatch.setenv("AEGIS_API_KEY", "k-test")
        config = ProviderConfig(
            endpoint_url="https://llm.test/v1/chat/completions", backoff_base=0.0, **cfg
        )
        client = httpx.Client(transport=httpx.MockTransport(handler))
        return LiveProvider(config, client=client)

    def test_requires_endpoint(self):
        with pytest.raises(ValueError):
            LiveProvider(ProviderConfig())

    def test_missing_api_key_is_auth_error(self, monkeypatch):
        monkeypatch.delenv("AEGIS_API_KEY", raising=False)
        provider = LiveProvider(
            ProviderConfig(endpoint_url="https://llm.test/x"),
            client=httpx.Client(transport=httpx.MockTransport(lambda r: None)),
        )
        with pytest.raises(AuthError):
            provider.request_once(HISTORY)

    def test_happy_path_sends_bearer_and_body(self, monkeypatch):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers["Authorization"]
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json=_chat_payload("hello there"))

        provider = self.make(handler, monkeypatch, model_name="m-1", temperature=0.3)
        assert provider.request_once(HISTORY) == "hello there"
        assert seen["auth"] == "Bearer k-test"
        assert seen["body"]["model"] == "m-1"
        assert seen["body"]["temperature"] == 0.3
        assert seen["body"]["messages"][0] == {"role": "system", "content": "rules"}

    def test_500s_then_success_lands_on_third_attempt(self, monkeypatch):
        count = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            count["n"] += 1
            if count["n"] < 3:
                return httpx.Response(500, text="boom")
            return httpx.Response(200, json=_chat_payload("finally"))

        provider = self.make(handler, monkeypatch)
        result = complete(provider, HISTORY)
        assert result.attempt == 3
        assert result.raw_text == "finally"
        assert count["n"] == 3

    @pytest.mark.parametrize("status", [401, 403])
    def test_credential_rejection(self, status, monkeypatch):
        provider = self.make(lambda r: httpx.Response(status), monkeypatch)
        with pytest.raises(AuthError):
            provider.request_once(HISTORY)

    def test_timeout_maps_to_timeout_error(self, monkeypatch):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        provider = self.make(handler, monkeypatch)
        with pytest.raises(RequestTimeout):
            provider.request_once(HISTORY)

    def test_unexpected_shape_is_transport_error(self, monkeypatch):
        provider = self.make(
            lambda r: httpx.Response(200, json={"unexpected": True}), monkeypatch
        )
        with pytest.raises(TransportError, match="shape"):
            provider.request_once(HISTORY)

    def test_non_text_content_rejected(self, monkeypatch):
        payload = {"choices": [{"message": {"content": 42}}]}
        provider = self.make(lambda r: httpx.Response(200, json=payload), monkeypatch)
        with pytest.raises(TransportError):
            provider.request_once(HISTORY)
