"""Exception types shared across the engine.

Everything raised on purpose by this package derives from GameError, so
callers can catch the whole family with one clause. Parse-level failures
and trigger-domain failures are related by subclassing: TriggerDomainError
is a MalformedResponse, which keeps the "parsing yields a TurnResponse or
a MalformedResponse, nothing else" guarantee simple to state and test.
"""

from __future__ import annotations


class GameError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GameError):
    """A script document is not well-formed."""

    def __init__(self, location: str, reason: str):
        super().__init__(f"{location}: {reason}")
        self.location = location
        self.reason = reason


class SchemaError(GameError):
    """A script document is well-formed but missing or mistyping a field."""


class InvalidScript(GameError):
    """A script failed validation where a valid one is required."""


class MalformedResponse(GameError):
    """Raw model output could not be parsed into a turn response."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TriggerDomainError(MalformedResponse):
    """A trigger field held a value outside None / positive integer."""

    def __init__(self, value: object):
        super().__init__(f"trigger value out of domain: {value!r}")
        self.value = value


class TransportError(GameError):
    """The provider could not be reached or returned an unusable reply."""


class TimeoutError(TransportError):  # noqa: A001 - deliberate, scoped name
    """The provider did not answer within the configured deadline."""


class AuthError(GameError):
    """The provider rejected our credentials, or none were configured."""


class ProtocolError(GameError):
    """Every parse attempt for one turn produced malformed output."""

    def __init__(self, last_raw: str | None):
        super().__init__("model never produced a parseable turn reply")
        self.last_raw = last_raw


class EmptyInput(GameError):
    """Player input was empty after trimming."""


class WrongPhase(GameError):
    """The requested action is not legal in the session's current phase."""


class NoSuchDecision(GameError):
    """No pending decision matches the given scene."""


class AlreadyDecided(GameError):
    """The decision for this scene was already recorded."""


class UnknownOption(GameError):
    """The chosen option id is not offered."""


class UnknownSession(GameError):
    """No session with that id exists in the store."""


class StorageError(GameError):
    """The session store could not complete a durable write."""


class ReplayDivergence(GameError):
    """Replaying a recorded session produced a different outcome."""

    def __init__(self, seq: int, detail: str = ""):
        msg = f"replay diverged at seq {seq}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)
        self.seq = seq
        self.detail = detail


class IoError(GameError):
    """An analysis artifact could not be read or written."""


class NoSessions(GameError):
    """An aggregate was requested over an empty session collection."""
