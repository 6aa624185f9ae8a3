"""Durable session transcripts and deterministic replay.

A session is an append-only sequence of events; the event log plus the
script is the whole truth about a playthrough. FileSessionStore keeps
one NDJSON log per session under data/sessions plus a small meta
sidecar, and replay() walks a log back through the pure progression
functions, flagging the first point where the record and the rules
disagree.
"""

from __future__ import annotations

import json
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .engine import (
    GameState,
    Phase,
    TurnOutcome,
    apply_player_input,
    apply_turn,
    serialize_state,
)
from .errors import (
    MalformedResponse,
    ReplayDivergence,
    StorageError,
    UnknownSession,
)
from .protocol import (
    PromptBundle,
    PromptVersion,
    assemble_system_prompt,
    default_persona,
    parse_turn_response,
)
from .provider import ChatMessage
from .script import ScenarioScript

EVENT_KINDS = (
    "PlayerInput",
    "RawModelReply",
    "ParsedTurn",
    "ClueDelivered",
    "SceneAdvanced",
    "DecisionMade",
    "EndingChosen",
    "Clamped",
    "Error",
)

_SAFE_SID = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    ts: str
    kind: str
    payload: dict


@dataclass
class SessionRecord:
    session_id: str
    script_hash: str
    prompt_version: str
    events: list[TranscriptEvent] = field(default_factory=list)
    final_state: dict | None = None


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _check_sid(session_id: str) -> str:
    if not _SAFE_SID.match(session_id):
        raise StorageError(f"unusable session id {session_id!r}")
    return session_id


class SessionStore(ABC):
    """Append-only event storage keyed by session id."""

    @abstractmethod
    def create(self, session_id: str, script_hash: str, prompt_version: str) -> None: ...

    @abstractmethod
    def exists(self, session_id: str) -> bool: ...

    @abstractmethod
    def append_event(self, session_id: str, kind: str, payload: dict) -> int:
        """Persist one event and return its sequence number (1-based)."""

    @abstractmethod
    def events(self, session_id: str) -> list[TranscriptEvent]: ...

    @abstractmethod
    def record(self, session_id: str) -> SessionRecord: ...

    @abstractmethod
    def finalize(self, session_id: str, state_doc: dict) -> None: ...

    @abstractmethod
    def session_ids(self) -> list[str]: ...


class MemorySessionStore(SessionStore):
    def __init__(self) -> None:
        self._meta: dict[str, dict] = {}
        self._events: dict[str, list[TranscriptEvent]] = {}

    def create(self, session_id: str, script_hash: str, prompt_version: str) -> None:
        _check_sid(session_id)
        if session_id in self._meta:
            raise StorageError(f"session {session_id} already exists")
        self._meta[session_id] = {
            "session_id": session_id,
            "script_hash": script_hash,
            "prompt_version": prompt_version,
            "created_at": _now_iso(),
            "final_state": None,
        }
        self._events[session_id] = []

    def exists(self, session_id: str) -> bool:
        return session_id in self._meta

    def append_event(self, session_id: str, kind: str, payload: dict) -> int:
        if session_id not in self._meta:
            raise UnknownSession(session_id)
        if kind not in EVENT_KINDS:
            raise StorageError(f"unknown event kind {kind!r}")
        seq = len(self._events[session_id]) + 1
        self._events[session_id].append(
            TranscriptEvent(seq=seq, ts=_now_iso(), kind=kind, payload=payload)
        )
        return seq

    def events(self, session_id: str) -> list[TranscriptEvent]:
        if session_id not in self._meta:
            raise UnknownSession(session_id)
        return list(self._events[session_id])

    def record(self, session_id: str) -> SessionRecord:
        if session_id not in self._meta:
            raise UnknownSession(session_id)
        meta = self._meta[session_id]
        return SessionRecord(
            session_id=session_id,
            script_hash=meta["script_hash"],
            prompt_version=meta["prompt_version"],
            events=list(self._events[session_id]),
            final_state=meta["final_state"],
        )

    def finalize(self, session_id: str, state_doc: dict) -> None:
        if session_id not in self._meta:
            raise UnknownSession(session_id)
        self._meta[session_id]["final_state"] = state_doc

    def session_ids(self) -> list[str]:
        return sorted(self._meta)


class FileSessionStore(SessionStore):
    """NDJSON log per session: <data_dir>/<session_id>.log plus meta sidecar.

    Appends are flushed per event, and a fresh store instance over the
    same directory picks up exactly where the log left off, so a crashed
    process loses at most the event it was writing.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._last_seq: dict[str, int] = {}

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{_check_sid(session_id)}.log"

    def _meta_path(self, session_id: str) -> Path:
        return self.data_dir / f"{_check_sid(session_id)}.meta.json"

    def create(self, session_id: str, script_hash: str, prompt_version: str) -> None:
        meta_path = self._meta_path(session_id)
        if meta_path.exists() or self._log_path(session_id).exists():
            raise StorageError(f"session {session_id} already exists")
        meta = {
            "session_id": session_id,
            "script_hash": script_hash,
            "prompt_version": prompt_version,
            "created_at": _now_iso(),
            "final_state": None,
        }
        try:
            meta_path.write_text(
                json.dumps(meta, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
            )
            self._log_path(session_id).touch()
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        self._last_seq[session_id] = 0

    def exists(self, session_id: str) -> bool:
        return self._meta_path(session_id).exists()

    def _scan_last_seq(self, session_id: str) -> int:
        path = self._log_path(session_id)
        if not path.exists():
            if not self.exists(session_id):
                raise UnknownSession(session_id)
            return 0
        last = 0
        try:
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        last = max(last, int(json.loads(line)["seq"]))
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        return last

    def append_event(self, session_id: str, kind: str, payload: dict) -> int:
        if kind not in EVENT_KINDS:
            raise StorageError(f"unknown event kind {kind!r}")
        if session_id not in self._last_seq:
            if not self.exists(session_id):
                raise UnknownSession(session_id)
            self._last_seq[session_id] = self._scan_last_seq(session_id)
        seq = self._last_seq[session_id] + 1
        line = json.dumps(
            {"seq": seq, "ts": _now_iso(), "kind": kind, "payload": payload},
            ensure_ascii=False,
        )
        try:
            with self._log_path(session_id).open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        self._last_seq[session_id] = seq
        return seq

    def events(self, session_id: str) -> list[TranscriptEvent]:
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        out: list[TranscriptEvent] = []
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(str(exc)) from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                out.append(
                    TranscriptEvent(
                        seq=int(doc["seq"]),
                        ts=str(doc["ts"]),
                        kind=str(doc["kind"]),
                        payload=dict(doc["payload"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise StorageError(
                    f"{path.name} line {lineno}: unreadable event ({exc})"
                ) from exc
        return out

    def record(self, session_id: str) -> SessionRecord:
        meta_path = self._meta_path(session_id)
        if not meta_path.exists():
            raise UnknownSession(session_id)
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StorageError(str(exc)) from exc
        return SessionRecord(
            session_id=session_id,
            script_hash=str(meta.get("script_hash", "")),
            prompt_version=str(meta.get("prompt_version", "")),
            events=self.events(session_id),
            final_state=meta.get("final_state"),
        )

    def finalize(self, session_id: str, state_doc: dict) -> None:
        meta_path = self._meta_path(session_id)
        if not meta_path.exists():
            raise UnknownSession(session_id)
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            meta["final_state"] = state_doc
            meta_path.write_text(
                json.dumps(meta, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
            )
        except (OSError, ValueError) as exc:
            raise StorageError(str(exc)) from exc

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.log"))


def export_session(store: SessionStore, session_id: str) -> str:
    """Render one session as NDJSON: a meta line, then one line per event."""
    rec = store.record(session_id)
    lines = [
        json.dumps(
            {
                "session_id": rec.session_id,
                "script_hash": rec.script_hash,
                "prompt_version": rec.prompt_version,
                "final_state": rec.final_state,
            },
            ensure_ascii=False,
        )
    ]
    for ev in rec.events:
        lines.append(
            json.dumps(
                {"seq": ev.seq, "ts": ev.ts, "kind": ev.kind, "payload": ev.payload},
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n"


def import_session(text: str) -> SessionRecord:
    """Parse an export back into a record, checking sequence discipline."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise StorageError("empty session export")
    try:
        head = json.loads(lines[0])
    except ValueError as exc:
        raise StorageError(f"line 1: {exc}") from exc
    if "session_id" not in head or "seq" in head:
        raise StorageError("line 1: expected the session meta line")
    rec = SessionRecord(
        session_id=str(head["session_id"]),
        script_hash=str(head.get("script_hash", "")),
        prompt_version=str(head.get("prompt_version", "")),
        final_state=head.get("final_state"),
    )
    prev = 0
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(line)
            ev = TranscriptEvent(
                seq=int(doc["seq"]),
                ts=str(doc["ts"]),
                kind=str(doc["kind"]),
                payload=dict(doc["payload"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise StorageError(f"line {lineno}: unreadable event ({exc})") from exc
        if ev.kind not in EVENT_KINDS:
            raise StorageError(f"line {lineno}: unknown event kind {ev.kind!r}")
        if ev.seq <= prev:
            raise StorageError(
                f"line {lineno}: seq {ev.seq} does not increase past {prev}"
            )
        prev = ev.seq
        rec.events.append(ev)
    return rec


def _expected_deltas(outcome: TurnOutcome) -> list[tuple[str, dict]]:
    out: list[tuple[str, dict]] = []
    if outcome.clue_delivered is not None:
        out.append(("ClueDelivered", {"clue_id": outcome.clue_delivered.clue_id}))
    if outcome.scene_advanced is not None:
        out.append(("SceneAdvanced", {"to": outcome.scene_advanced}))
    if outcome.clamped:
        out.append(
            (
                "Clamped",
                {
                    "clue_triggered_id": outcome.response.clue_triggered_id,
                    "scene_triggered_id": outcome.response.scene_triggered_id,
                },
            )
        )
    return out


def replay(
    record: SessionRecord,
    script: ScenarioScript,
    bundle: PromptBundle | None = None,
) -> GameState:
    """Re-derive the final state of a recorded session from its events.

    Every recorded consequence (parsed fields, clue deliveries, scene
    advances, clamps) is recomputed from the raw replies through the same
    pure rules the live engine used; the first disagreement raises
    ReplayDivergence with the offending sequence number.
    """
    if bundle is None:
        version = PromptVersion(record.prompt_version)
        bundle = assemble_system_prompt(default_persona(), script, version)
    state = GameState(
        history=[ChatMessage(role="system", content=bundle.system_prompt)]
    )
    held = None  # parsed response waiting for its ParsedTurn event
    expected: list[tuple[str, dict]] = []
    last_seq = 0

    for ev in record.events:
        last_seq = ev.seq
        if ev.kind == "Error":
            continue
        if ev.kind == "PlayerInput":
            if expected:
                raise ReplayDivergence(ev.seq, "previous turn is missing outcome events")
            if held is not None:
                raise ReplayDivergence(ev.seq, "a model reply was never parsed")
            state = apply_player_input(state)
            state.history.append(
                ChatMessage(role="user", content=str(ev.payload.get("text", "")))
            )
            state.transcript_cursor = ev.seq
        elif ev.kind == "RawModelReply":
            raw = str(ev.payload.get("raw", ""))
            try:
                held = parse_turn_response(raw)
            except MalformedResponse as exc:
                raise ReplayDivergence(
                    ev.seq, f"recorded reply no longer parses: {exc}"
                ) from exc
            state.history.append(ChatMessage(role="assistant", content=raw))
            state.transcript_cursor = ev.seq
        elif ev.kind == "ParsedTurn":
            if held is None:
                raise ReplayDivergence(ev.seq, "parsed turn without a raw reply")
            recorded = (
                ev.payload.get("gamemaster_guidance"),
                ev.payload.get("aegis_reaction"),
                ev.payload.get("clue_triggered_id"),
                ev.payload.get("scene_triggered_id"),
            )
            recomputed = (
                held.gamemaster_guidance,
                held.aegis_reaction,
                held.clue_triggered_id,
                held.scene_triggered_id,
            )
            if recorded != recomputed:
                raise ReplayDivergence(ev.seq, "recorded fields differ from reparse")
            state, outcome = apply_turn(state, held, script)
            expected = _expected_deltas(outcome)
            held = None
            state.transcript_cursor = ev.seq
        elif ev.kind in ("ClueDelivered", "SceneAdvanced", "Clamped"):
            if not expected:
                raise ReplayDivergence(ev.seq, f"unexpected {ev.kind} event")
            want_kind, want_payload = expected.pop(0)
            if ev.kind != want_kind or ev.payload != want_payload:
                raise ReplayDivergence(
                    ev.seq, f"expected {want_kind} {want_payload}, saw {ev.kind} {ev.payload}"
                )
            state.transcript_cursor = ev.seq
        elif ev.kind == "DecisionMade":
            scene_id = ev.payload.get("scene_id")
            option_id = ev.payload.get("option_id")
            scene = script.scene(scene_id) if isinstance(scene_id, int) else None
            if (
                state.phase.label() != f"Scene({scene_id})"
                or scene is None
                or scene.decision is None
                or scene.decision.option(str(option_id)) is None
            ):
                raise ReplayDivergence(ev.seq, "decision is not legal at this point")
            if scene_id in state.decisions:
                raise ReplayDivergence(ev.seq, f"scene {scene_id} decided twice")
            state.decisions[scene_id] = str(option_id)
            state.transcript_cursor = ev.seq
        elif ev.kind == "EndingChosen":
            option_id = str(ev.payload.get("option_id"))
            if state.phase.label() != "Ending" or script.ending(option_id) is None:
                raise ReplayDivergence(ev.seq, "ending is not legal at this point")
            state.ending_choice = option_id
            state.phase = Phase.done()
            state.transcript_cursor = ev.seq
        else:
            raise ReplayDivergence(ev.seq, f"unknown event kind {ev.kind!r}")

    if expected:
        raise ReplayDivergence(last_seq, "log ends with outcome events missing")
    if record.final_state is not None:
        recorded_doc = json.dumps(
            record.final_state, sort_keys=True, separators=(",", ":"), ensure_ascii=False
        )
        if recorded_doc != serialize_state(state):
            raise ReplayDivergence(last_seq, "final state snapshot does not match")
    return state
