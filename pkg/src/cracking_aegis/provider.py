"""Chat-completion backends: live HTTP, scripted mock, and the parse loop.

One outbound-request budget of 1 + max_retries covers everything that can
go wrong in a turn, transport failures and malformed replies alike, so a
single complete_parsed call can never fan out into unbounded traffic.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

import httpx

from .errors import AuthError, MalformedResponse, ProtocolError, TransportError
from .errors import TimeoutError as RequestTimeout
from .protocol import TurnResponse, parse_turn_response

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str = ""
    model_name: str = ""
    temperature: float = 0.7
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str = "AEGIS_API_KEY"
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ValueError(f"max_retries must be in [0, 5], got {self.max_retries}")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be nonnegative")


@dataclass(frozen=True)
class ProviderResult:
    raw_text: str
    latency: float
    attempt: int


class Provider(Protocol):
    config: ProviderConfig

    def request_once(self, history: list[ChatMessage]) -> str:
        """Issue exactly one request; raise a transport-family error on failure."""
        ...


def check_history(history: list[ChatMessage]) -> None:
    if not history or history[0].role != "system":
        raise ValueError("history must start with the system message")
    for i, msg in enumerate(history):
        if msg.role not in ROLES:
            raise ValueError(f"message {i} has unknown role {msg.role!r}")
        if msg.role == "system" and i != 0:
            raise ValueError("exactly one system message allowed, first")
        if msg.role in ("user", "assistant") and not msg.content:
            raise ValueError(f"message {i} ({msg.role}) has empty content")


class ScriptedProvider:
    """Deterministic provider fed from a fixed queue of raw reply texts."""

    def __init__(self, queue: Iterable[str], config: ProviderConfig | None = None):
        self._queue = list(queue)
        self._next = 0
        self.config = config or ProviderConfig(backoff_base=0.0)
        self.requests: list[list[ChatMessage]] = []

    @property
    def remaining(self) -> int:
        return len(self._queue) - self._next

    def request_once(self, history: list[ChatMessage]) -> str:
        self.requests.append(list(history))
        if self._next >= len(self._queue):
            raise TransportError("scripted queue exhausted")
        raw = self._queue[self._next]
        self._next += 1
        return raw


def scripted_provider(queue: Iterable[str], config: ProviderConfig | None = None) -> ScriptedProvider:
    return ScriptedProvider(queue, config)


class LiveProvider:
    """Speaks the common chat-completions HTTP contract."""

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        if not config.endpoint_url:
            raise ValueError("live provider needs an endpoint_url")
        self.config = config
        self._client = client or httpx.Client()

    def request_once(self, history: list[ChatMessage]) -> str:
        api_key = os.environ.get(self.config.api_key_env, "")
        if not api_key:
            raise AuthError(f"environment variable {self.config.api_key_env} is not set")
        body = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in history],
            "temperature": self.config.temperature,
        }
        try:
            response = self._client.post(
                self.config.endpoint_url,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.config.timeout,
            )
        except httpx.TimeoutException as exc:
            raise RequestTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials ({response.status_code})")
        if response.status_code != 200:
            raise TransportError(f"provider returned HTTP {response.status_code}")
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("response content is not text")
        return content

    def close(self) -> None:
        self._client.close()


def _sleep_before_retry(config: ProviderConfig, attempt: int) -> None:
    if config.backoff_base > 0:
        time.sleep(config.backoff_base * (2 ** (attempt - 1)))


def complete(provider: Provider, history: list[ChatMessage]) -> ProviderResult:
    """One model call with transient-failure retries and backoff."""
    check_history(history)
    config = provider.config
    budget = 1 + config.max_retries
    last_error: TransportError | None = None
    for attempt in range(1, budget + 1):
        start = time.monotonic()
        try:
            raw = provider.request_once(history)
        except AuthError:
            raise
        except TransportError as exc:
            last_error = exc
            if attempt < budget:
                _sleep_before_retry(config, attempt)
            continue
        return ProviderResult(raw_text=raw, latency=time.monotonic() - start, attempt=attempt)
    assert last_error is not None
    raise last_error


def complete_parsed(
    provider: Provider,
    history: list[ChatMessage],
    corrective_message: str,
    parse: Callable[[str], TurnResponse] = parse_turn_response,
    on_attempt: Callable[[str], None] | None = None,
) -> TurnResponse:
    """Call the model until a reply parses, within the shared request budget.

    A malformed reply earns one corrective user message (restating the
    response contract) before the next attempt; transport failures burn
    budget the same way. When the budget runs out the last failure mode
    decides the error: ProtocolError for parse trouble, the transport
    error itself otherwise.
    """
    check_history(history)
    config = provider.config
    budget = 1 + config.max_retries
    messages = list(history)
    last_raw: str | None = None
    for attempt in range(1, budget + 1):
        try:
            raw = provider.request_once(messages)
        except AuthError:
            raise
        except TransportError:
            if attempt >= budget:
                raise
            _sleep_before_retry(config, attempt)
            continue
        if on_attempt is not None:
            on_attempt(raw)
        try:
            return parse(raw)
        except MalformedResponse:
            last_raw = raw
            messages = messages + [
                ChatMessage(role="assistant", content=raw or "(empty reply)"),
                ChatMessage(role="user", content=corrective_message),
            ]
    raise ProtocolError(last_raw)
