"""Game state, the progression rules, and the session driver.

The progression core is two pure functions, apply_player_input and
apply_turn, that map (state, input) to a fresh state plus an outcome
description. GameSession wraps them with provider calls and durable
event logging; replay reuses the same pure functions, which is what
makes recorded sessions reproducible.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from .errors import (
    AlreadyDecided,
    EmptyInput,
    NoSuchDecision,
    ProtocolError,
    TransportError,
    UnknownOption,
    WrongPhase,
)
from .protocol import (
    PersonaProfile,
    PromptBundle,
    PromptVersion,
    TurnResponse,
    assemble_system_prompt,
    corrective_reprompt,
    default_persona,
)
from .provider import ChatMessage, Provider, complete_parsed
from .script import Clue, ScenarioScript, script_digest

if TYPE_CHECKING:
    from .store import SessionStore

STATE_VERSION = 1
DEFAULT_HISTORY_CAP = 40


class PhaseKind(str, Enum):
    INTRO = "Intro"
    AUTH = "Auth"
    SCENE = "Scene"
    ENDING = "Ending"
    DONE = "Done"


@dataclass(frozen=True)
class Phase:
    """One node of the Intro -> Auth -> Scene(1..N) -> Ending -> Done walk."""

    kind: PhaseKind
    scene: int | None = None

    @staticmethod
    def intro() -> Phase:
        return Phase(PhaseKind.INTRO)

    @staticmethod
    def auth() -> Phase:
        return Phase(PhaseKind.AUTH)

    @staticmethod
    def at_scene(scene_id: int) -> Phase:
        return Phase(PhaseKind.SCENE, scene_id)

    @staticmethod
    def ending() -> Phase:
        return Phase(PhaseKind.ENDING)

    @staticmethod
    def done() -> Phase:
        return Phase(PhaseKind.DONE)

    def label(self) -> str:
        if self.kind is PhaseKind.SCENE:
            return f"Scene({self.scene})"
        return self.kind.value

    def order_key(self, total_scenes: int) -> int:
        """Position on the forward-only walk; later phases compare greater."""
        if self.kind is PhaseKind.INTRO:
            return 0
        if self.kind is PhaseKind.AUTH:
            return 1
        if self.kind is PhaseKind.SCENE:
            return 1 + (self.scene or 0)
        if self.kind is PhaseKind.ENDING:
            return 2 + total_scenes
        return 3 + total_scenes


@dataclass
class GameState:
    phase: Phase = field(default_factory=Phase.intro)
    delivered_clues: set[int] = field(default_factory=set)
    awaiting_player_since_last_clue: bool = False
    history: list[ChatMessage] = field(default_factory=list)
    transcript_cursor: int = 0
    ending_choice: str | None = None
    decisions: dict[int, str] = field(default_factory=dict)

    def copy(self) -> GameState:
        return GameState(
            phase=self.phase,
            delivered_clues=set(self.delivered_clues),
            awaiting_player_since_last_clue=self.awaiting_player_since_last_clue,
            history=list(self.history),
            transcript_cursor=self.transcript_cursor,
            ending_choice=self.ending_choice,
            decisions=dict(self.decisions),
        )


@dataclass(frozen=True)
class TurnOutcome:
    """What one model reply did to the session."""

    response: TurnResponse
    clue_delivered: Clue | None = None
    scene_advanced: int | None = None
    clamped: bool = False
    phase_after: Phase = field(default_factory=Phase.intro)


def apply_player_input(state: GameState) -> GameState:
    """Account for the player having spoken; pure."""
    out = state.copy()
    if out.phase.kind is PhaseKind.INTRO:
        out.phase = Phase.auth()
    out.awaiting_player_since_last_clue = False
    return out


def apply_turn(
    state: GameState, response: TurnResponse, script: ScenarioScript
) -> tuple[GameState, TurnOutcome]:
    """Fold one parsed model reply into the state; pure.

    Trigger interpretation is total: any trigger that is not legal right
    now is clamped (ignored, flagged) rather than raised. The clue field
    is handled before the scene field, so a reply that both delivers the
    last clue and names the next scene still waits for the player.
    """
    if state.phase.kind is PhaseKind.DONE:
        raise WrongPhase("the session is over")
    out = state.copy()
    clue_delivered: Clue | None = None
    scene_advanced: int | None = None
    clamped = False

    clue_id = response.clue_triggered_id
    if clue_id is not None:
        scene = script.scene(out.phase.scene) if out.phase.kind is PhaseKind.SCENE else None
        clue = scene.clue(clue_id) if scene is not None else None
        if clue is not None and clue_id not in out.delivered_clues:
            out.delivered_clues.add(clue_id)
            out.awaiting_player_since_last_clue = True
            clue_delivered = clue
        else:
            clamped = True

    scene_id = response.scene_triggered_id
    if scene_id is not None:
        if out.phase.kind is PhaseKind.AUTH and scene_id == 1:
            out.phase = Phase.at_scene(1)
            scene_advanced = 1
        elif out.phase.kind is PhaseKind.SCENE:
            current = out.phase.scene or 0
            scene = script.scene(current)
            complete = scene is not None and all(
                c.clue_id in out.delivered_clues for c in scene.clues
            )
            if (
                scene_id == current + 1
                and complete
                and not out.awaiting_player_since_last_clue
            ):
                if current == len(script.scenes):
                    out.phase = Phase.ending()
                else:
                    out.phase = Phase.at_scene(scene_id)
                scene_advanced = scene_id
            else:
                clamped = True
        else:
            clamped = True

    outcome = TurnOutcome(
        response=response,
        clue_delivered=clue_delivered,
        scene_advanced=scene_advanced,
        clamped=clamped,
        phase_after=out.phase,
    )
    return out, outcome


def serialize_state(state: GameState) -> str:
    """Canonical JSON snapshot; equal states serialize byte-identically."""
    doc = {
        "state_version": STATE_VERSION,
        "phase": {"kind": state.phase.kind.value, "scene": state.phase.scene},
        "delivered_clues": sorted(state.delivered_clues),
        "awaiting_player_since_last_clue": state.awaiting_player_since_last_clue,
        "history": [{"role": m.role, "content": m.content} for m in state.history],
        "transcript_cursor": state.transcript_cursor,
        "ending_choice": state.ending_choice,
        "decisions": {str(k): state.decisions[k] for k in sorted(state.decisions)},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def state_hash(state: GameState) -> str:
    return hashlib.sha256(serialize_state(state).encode("utf-8")).hexdigest()


def session_summary(state: GameState) -> dict:
    rounds = sum(1 for m in state.history if m.role == "user")
    return {
        "phase": state.phase.label(),
        "rounds": rounds,
        "clues_delivered": sorted(state.delivered_clues),
        "decisions": {str(k): state.decisions[k] for k in sorted(state.decisions)},
        "ending_choice": state.ending_choice,
    }


@dataclass(frozen=True)
class SessionConfig:
    history_cap: int = DEFAULT_HISTORY_CAP

    def __post_init__(self) -> None:
        if self.history_cap < 4:
            raise ValueError("history_cap must leave room for a working exchange")


def _capped_history(history: list[ChatMessage], cap: int) -> list[ChatMessage]:
    if len(history) <= cap:
        return list(history)
    # Keep the system message, drop the oldest exchanges.
    return [history[0]] + history[len(history) - (cap - 1):]


class GameSession:
    """One live playthrough: state, its provider, and the event log."""

    def __init__(
        self,
        session_id: str,
        script: ScenarioScript,
        bundle: PromptBundle,
        provider: Provider,
        store: SessionStore,
        config: SessionConfig | None = None,
        state: GameState | None = None,
    ):
        self.session_id = session_id
        self.script = script
        self.bundle = bundle
        self.provider = provider
        self.store = store
        self.config = config or SessionConfig()
        self.state = state or GameState(
            history=[ChatMessage(role="system", content=bundle.system_prompt)]
        )

    @classmethod
    def new_session(
        cls,
        script: ScenarioScript,
        provider: Provider,
        store: SessionStore,
        version: PromptVersion = PromptVersion.V3,
        persona: PersonaProfile | None = None,
        session_id: str | None = None,
        config: SessionConfig | None = None,
    ) -> GameSession:
        bundle = assemble_system_prompt(persona or default_persona(), script, version)
        sid = session_id or secrets.token_urlsafe(32)
        store.create(sid, script_digest(script), version.value)
        return cls(sid, script, bundle, provider, store, config)

    def submit_input(self, text: str) -> TurnOutcome:
        """Run one full round: player text in, model reply folded into state.

        The session state and the durable log move together: nothing is
        written to either until the provider produced a parseable reply,
        except a single Error event describing a failed round. A failed
        round leaves the state bit-for-bit unchanged.
        """
        if self.state.phase.kind is PhaseKind.DONE:
            raise WrongPhase("the session is over")
        cleaned = text.strip()
        if not cleaned:
            raise EmptyInput("player input is empty")

        wire = _capped_history(self.state.history, self.config.history_cap)
        wire.append(ChatMessage(role="user", content=cleaned))
        attempts: list[str] = []
        try:
            response = complete_parsed(
                self.provider,
                wire,
                corrective_reprompt(self.bundle),
                on_attempt=attempts.append,
            )
        except (ProtocolError, TransportError) as exc:
            payload = {"stage": "provider", "error": type(exc).__name__, "detail": str(exc)}
            if isinstance(exc, ProtocolError) and exc.last_raw is not None:
                payload["last_raw"] = exc.last_raw
            self.store.append_event(self.session_id, "Error", payload)
            raise

        raw_final = attempts[-1]
        after_input = apply_player_input(self.state)
        new_state, outcome = apply_turn(after_input, response, self.script)
        new_state.history = new_state.history + [
            ChatMessage(role="user", content=cleaned),
            ChatMessage(role="assistant", content=raw_final),
        ]

        last_seq = self.store.append_event(self.session_id, "PlayerInput", {"text": cleaned})
        for raw in attempts[:-1]:
            self.store.append_event(
                self.session_id, "Error", {"stage": "parse", "raw": raw}
            )
        last_seq = self.store.append_event(
            self.session_id, "RawModelReply", {"raw": raw_final}
        )
        last_seq = self.store.append_event(
            self.session_id,
            "ParsedTurn",
            {
                "gamemaster_guidance": response.gamemaster_guidance,
                "aegis_reaction": response.aegis_reaction,
                "clue_triggered_id": response.clue_triggered_id,
                "scene_triggered_id": response.scene_triggered_id,
            },
        )
        if outcome.clue_delivered is not None:
            last_seq = self.store.append_event(
                self.session_id,
                "ClueDelivered",
                {"clue_id": outcome.clue_delivered.clue_id},
            )
        if outcome.scene_advanced is not None:
            last_seq = self.store.append_event(
                self.session_id, "SceneAdvanced", {"to": outcome.scene_advanced}
            )
        if outcome.clamped:
            last_seq = self.store.append_event(
                self.session_id,
                "Clamped",
                {
                    "clue_triggered_id": response.clue_triggered_id,
                    "scene_triggered_id": response.scene_triggered_id,
                },
            )
        new_state.transcript_cursor = last_seq
        self.state = new_state
        return outcome

    def submit_decision(self, scene_id: int, option_id: str) -> TurnOutcome:
        """Record an in-scene decision; the chat history is untouched."""
        phase = self.state.phase
        if phase.kind is not PhaseKind.SCENE or phase.scene != scene_id:
            raise NoSuchDecision(f"scene {scene_id} has no pending decision here")
        scene = self.script.scene(scene_id)
        if scene is None or scene.decision is None:
            raise NoSuchDecision(f"scene {scene_id} offers no decision")
        if scene_id in self.state.decisions:
            raise AlreadyDecided(f"scene {scene_id} was already decided")
        option = scene.decision.option(option_id)
        if option is None:
            raise UnknownOption(f"scene {scene_id} has no option {option_id!r}")

        new_state = self.state.copy()
        new_state.decisions[scene_id] = option_id
        seq = self.store.append_event(
            self.session_id,
            "DecisionMade",
            {
                "scene_id": scene_id,
                "option_id": option_id,
                "consequence_text": option.consequence_text,
            },
        )
        new_state.transcript_cursor = seq
        self.state = new_state
        return TurnOutcome(
            response=TurnResponse(
                gamemaster_guidance=option.consequence_text, aegis_reaction=""
            ),
            phase_after=new_state.phase,
        )

    def choose_ending(self, option_id: str) -> TurnOutcome:
        if self.state.phase.kind is not PhaseKind.ENDING:
            raise WrongPhase("the story has not reached its ending yet")
        ending = self.script.ending(option_id)
        if ending is None:
            raise UnknownOption(f"no ending option {option_id!r}")

        new_state = self.state.copy()
        new_state.ending_choice = option_id
        new_state.phase = Phase.done()
        seq = self.store.append_event(
            self.session_id,
            "EndingChosen",
            {"option_id": option_id, "epilogue_text": ending.epilogue_text},
        )
        new_state.transcript_cursor = seq
        self.state = new_state
        self.store.finalize(self.session_id, json.loads(serialize_state(new_state)))
        return TurnOutcome(
            response=TurnResponse(
                gamemaster_guidance=ending.epilogue_text, aegis_reaction=""
            ),
            phase_after=new_state.phase,
        )

    def summary(self) -> dict:
        return session_summary(self.state)


__all__ = [
    "DEFAULT_HISTORY_CAP",
    "GameSession",
    "GameState",
    "Phase",
    "PhaseKind",
    "SessionConfig",
    "TurnOutcome",
    "apply_player_input",
    "apply_turn",
    "serialize_state",
    "session_summary",
    "state_hash",
]
