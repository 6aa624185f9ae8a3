"""HTTP facade over the game engine, plus static hosting for the web UI.

One FastAPI app serves many concurrent sessions. Mutating endpoints for
a session are serialized behind a per-session lock; reads take cheap
snapshots. Idle sessions fall out of memory after a TTL while their
transcripts stay on disk.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import GameSession, PhaseKind
from .errors import (
    AlreadyDecided,
    AuthError,
    EmptyInput,
    NoSuchDecision,
    ProtocolError,
    TransportError,
    UnknownOption,
    WrongPhase,
)
from .protocol import PromptVersion
from .provider import LiveProvider, Provider, ProviderConfig
from .script import (
    CANONICAL_SCRIPT_ID,
    ScenarioScript,
    canonical_script_path,
    load_script_file,
)
from .store import FileSessionStore

_REPO_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_TTL_SECONDS = 24 * 60 * 60


def _default_scripts() -> dict[str, Path]:
    return {CANONICAL_SCRIPT_ID: canonical_script_path()}


def _default_provider_factory() -> Provider:
    return LiveProvider(
        ProviderConfig(
            endpoint_url=os.environ.get("AEGIS_ENDPOINT_URL", ""),
            model_name=os.environ.get("AEGIS_MODEL_NAME", ""),
            api_key_env=os.environ.get("AEGIS_API_KEY_ENV", "AEGIS_API_KEY"),
        )
    )


@dataclass
class ServiceConfig:
    data_dir: Path = Path("data/sessions")
    scripts: dict[str, Path] = dc_field(default_factory=_default_scripts)
    provider_factory: Callable[[], Provider] = _default_provider_factory
    ttl_seconds: float = DEFAULT_TTL_SECONDS
    clock: Callable[[], float] = time.time
    frontend_dir: Path = _REPO_ROOT / "frontend" / "dist"
    assets_dir: Path = _REPO_ROOT / "assets"


def config_from_env() -> ServiceConfig:
    return ServiceConfig(data_dir=Path(os.environ.get("AEGIS_DATA_DIR", "data/sessions")))


class CreateSessionBody(BaseModel):
    script_id: str = CANONICAL_SCRIPT_ID
    prompt_version: str = "V3"


class TurnBody(BaseModel):
    text: str


class DecisionBody(BaseModel):
    scene_id: int
    option_id: str


class EndingBody(BaseModel):
    option_id: str


@dataclass
class _Entry:
    session: GameSession
    lock: threading.Lock
    last_access: float


_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>Cracking Aegis</title></head>
<body><h1>Cracking Aegis</h1>
<p>The web client has not been built. The API is live; see /healthz.</p>
</body></html>
"""


def _clue_view(clue) -> dict | None:
    if clue is None:
        return None
    return {
        "clue_id": clue.clue_id,
        "title": clue.title,
        "content": clue.content,
        "image_ref": clue.image_ref,
    }


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="Cracking Aegis", docs_url=None, redoc_url=None)
    store = FileSessionStore(config.data_dir)
    sessions: dict[str, _Entry] = {}
    registry_lock = threading.Lock()
    script_cache: dict[str, ScenarioScript] = {}

    def load_script_cached(script_id: str) -> ScenarioScript:
        if script_id not in script_cache:
            script_cache[script_id] = load_script_file(config.scripts[script_id])
        return script_cache[script_id]

    def entry_for(session_id: str) -> _Entry:
        now = config.clock()
        with registry_lock:
            stale = [
                sid
                for sid, e in sessions.items()
                if now - e.last_access > config.ttl_seconds
            ]
            for sid in stale:
                del sessions[sid]
            entry = sessions.get(session_id)
            if entry is None:
                raise HTTPException(status_code=404, detail="no such session")
            entry.last_access = now
            return entry

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None) -> dict:
        body = body or CreateSessionBody()
        if body.script_id not in config.scripts:
            raise HTTPException(status_code=404, detail=f"unknown script {body.script_id!r}")
        try:
            version = PromptVersion(body.prompt_version)
        except ValueError:
            raise HTTPException(
                status_code=400, detail=f"unknown prompt version {body.prompt_version!r}"
            ) from None
        script = load_script_cached(body.script_id)
        session = GameSession.new_session(
            script, config.provider_factory(), store, version=version
        )
        with registry_lock:
            sessions[session.session_id] = _Entry(
                session=session, lock=threading.Lock(), last_access=config.clock()
            )
        return {
            "session_id": session.session_id,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "phase": session.state.phase.label(),
        }

    @app.post("/sessions/{session_id}/turns")
    def submit_turn(session_id: str, body: TurnBody) -> dict:
        entry = entry_for(session_id)
        with entry.lock:
            session = entry.session
            try:
                outcome = session.submit_input(body.text)
            except EmptyInput as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            except WrongPhase as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (ProtocolError, TransportError, AuthError) as exc:
                raise HTTPException(
                    status_code=502, detail=f"{type(exc).__name__}: {exc}"
                ) from exc
            return {
                "gamemaster_guidance": outcome.response.gamemaster_guidance,
                "aegis_reaction": outcome.response.aegis_reaction,
                "clue": _clue_view(outcome.clue_delivered),
                "scene_advanced": outcome.scene_advanced,
                "clamped": outcome.clamped,
                "phase": session.state.phase.label(),
                "seq": session.state.transcript_cursor,
            }

    @app.post("/sessions/{session_id}/decision")
    def submit_decision(session_id: str, body: DecisionBody) -> dict:
        entry = entry_for(session_id)
        with entry.lock:
            session = entry.session
            try:
                outcome = session.submit_decision(body.scene_id, body.option_id)
            except (NoSuchDecision, AlreadyDecided) as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except UnknownOption as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            return {
                "gamemaster_guidance": outcome.response.gamemaster_guidance,
                "aegis_reaction": outcome.response.aegis_reaction,
                "clue": None,
                "scene_advanced": None,
                "clamped": False,
                "phase": session.state.phase.label(),
                "seq": session.state.transcript_cursor,
            }

    @app.post("/sessions/{session_id}/ending")
    def choose_ending(session_id: str, body: EndingBody) -> dict:
        entry = entry_for(session_id)
        with entry.lock:
            session = entry.session
            try:
                outcome = session.choose_ending(body.option_id)
            except WrongPhase as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except UnknownOption as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            return {
                "gamemaster_guidance": outcome.response.gamemaster_guidance,
                "aegis_reaction": outcome.response.aegis_reaction,
                "clue": None,
                "scene_advanced": None,
                "clamped": False,
                "phase": session.state.phase.label(),
                "seq": session.state.transcript_cursor,
            }

    @app.get("/sessions/{session_id}")
    def session_view(session_id: str) -> dict:
        entry = entry_for(session_id)
        session = entry.session
        state = session.state
        script = session.script
        phase = state.phase
        delivered = [
            _clue_view(clue)
            for scene in script.scenes
            for clue in scene.clues
            if clue.clue_id in state.delivered_clues
        ]
        pending_decision = None
        if phase.kind is PhaseKind.SCENE and phase.scene is not None:
            scene = script.scene(phase.scene)
            if (
                scene is not None
                and scene.decision is not None
                and phase.scene not in state.decisions
            ):
                pending_decision = {
                    "scene_id": phase.scene,
                    "prompt_text": scene.decision.prompt_text,
                    "options": [
                        {"option_id": o.option_id, "label": o.label}
                        for o in scene.decision.options
                    ],
                }
        endings = None
        if phase.kind is PhaseKind.ENDING:
            endings = [
                {"option_id": e.option_id, "label": e.label} for e in script.endings
            ]
        return {
            "session_id": session.session_id,
            "phase": phase.label(),
            "scene_id": phase.scene,
            "prompt_version": session.bundle.version.value,
            "rounds": sum(1 for m in state.history if m.role == "user"),
            "delivered_clues": delivered,
            "decisions": {str(k): v for k, v in sorted(state.decisions.items())},
            "pending_decision": pending_decision,
            "endings": endings,
            "ending_choice": state.ending_choice,
            "seq": state.transcript_cursor,
        }

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str) -> Response:
        entry = entry_for(session_id)
        lines = [
            json.dumps(
                {"seq": ev.seq, "ts": ev.ts, "kind": ev.kind, "payload": ev.payload},
                ensure_ascii=False,
            )
            for ev in store.events(entry.session.session_id)
        ]
        body = "\n".join(lines) + ("\n" if lines else "")
        return Response(content=body, media_type="application/x-ndjson")

    @app.get("/healthz")
    def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    if config.assets_dir.is_dir():
        app.mount("/assets", StaticFiles(directory=config.assets_dir), name="assets")
    if config.frontend_dir.is_dir():
        app.mount(
            "/", StaticFiles(directory=config.frontend_dir, html=True), name="ui"
        )
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _FALLBACK_PAGE

    return app


def main() -> None:
    """Run the service with uvicorn; bind address from AEGIS_BIND."""
    import uvicorn

    bind = os.environ.get("AEGIS_BIND", "127.0.0.1:8000")
    host, _, port = bind.partition(":")
    uvicorn.run(create_app(config_from_env()), host=host or "127.0.0.1", port=int(port or "8000"))


if __name__ == "__main__":
    main()
