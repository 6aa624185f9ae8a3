"""Operator command line: validate, export-prompt, play, replay, analyze.

Exit codes are uniform across subcommands: 0 clean, 1 findings (script
violations, replay divergence, nothing to analyze), 2 runtime trouble
(unreadable files, storage failures). Everything works offline with the
scripted mock provider.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analysis import export_heatmap, load_codebook, round_stats, usage_matrix
from .engine import GameSession, PhaseKind, SessionConfig, state_hash
from .errors import (
    EmptyInput,
    GameError,
    NoSessions,
    ProtocolError,
    ReplayDivergence,
    TransportError,
    UnknownOption,
    WrongPhase,
)
from .protocol import PromptVersion, assemble_system_prompt, default_persona
from .provider import LiveProvider, Provider, ProviderConfig, ScriptedProvider
from .script import (
    canonical_script_path,
    default_codebook_path,
    load_script_file,
    validate_script,
)
from .store import FileSessionStore, replay as replay_record

VERSION_CHOICES = [v.value for v in PromptVersion]


def _fail(message: str, code: int) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load_script_or_die(path: Path):
    try:
        return load_script_file(path)
    except (OSError, GameError) as exc:
        _fail(f"cannot load script {path}: {exc}", 2)


def _make_provider(spec: str) -> Provider:
    if spec == "live":
        import os

        return LiveProvider(
            ProviderConfig(
                endpoint_url=os.environ.get("AEGIS_ENDPOINT_URL", ""),
                model_name=os.environ.get("AEGIS_MODEL_NAME", ""),
                api_key_env=os.environ.get("AEGIS_API_KEY_ENV", "AEGIS_API_KEY"),
            )
        )
    if spec.startswith("mock:"):
        queue_path = Path(spec[len("mock:"):])
        try:
            queue = json.loads(queue_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            _fail(f"cannot load mock queue {queue_path}: {exc}", 2)
        if not isinstance(queue, list) or not all(isinstance(x, str) for x in queue):
            _fail(f"mock queue {queue_path} must be a JSON array of strings", 2)
        return ScriptedProvider(queue)
    _fail(f"provider must be 'live' or 'mock:<queuefile>', got {spec!r}", 2)
    raise AssertionError("unreachable")


@click.group()
def main() -> None:
    """Cracking Aegis: an adversarial dialogue game against an AI guardian."""


@main.command()
@click.argument(
    "script_path",
    type=click.Path(path_type=Path),
    default=None,
    required=False,
)
def validate(script_path: Path | None) -> None:
    """Check a scenario script; list violations if any."""
    path = script_path or canonical_script_path()
    script = _load_script_or_die(path)
    findings = validate_script(script)
    if findings:
        for v in findings:
            click.echo(str(v))
        sys.exit(1)
    click.echo("OK")


@main.command("export-prompt")
@click.option(
    "--script",
    "script_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Scenario script to embed (default: bundled).",
)
@click.option(
    "--version",
    "version_name",
    type=click.Choice(VERSION_CHOICES),
    default=PromptVersion.V3.value,
    show_default=True,
)
@click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=None,
    help="Write to a file instead of stdout.",
)
def export_prompt(script_path: Path | None, version_name: str, out: Path | None) -> None:
    """Print the exact assembled system prompt for one iteration."""
    script = _load_script_or_die(script_path or canonical_script_path())
    try:
        bundle = assemble_system_prompt(
            default_persona(), script, PromptVersion(version_name)
        )
    except GameError as exc:
        _fail(f"cannot assemble prompt: {exc}", 2)
        raise AssertionError("unreachable")
    if out is None:
        click.echo(bundle.system_prompt, nl=False)
    else:
        out.write_text(bundle.system_prompt, encoding="utf-8")


def _print_outcome(outcome) -> None:
    if outcome.response.gamemaster_guidance:
        click.echo(f"GM: {outcome.response.gamemaster_guidance}")
    if outcome.response.aegis_reaction:
        click.echo(f"AEGIS: {outcome.response.aegis_reaction}")
    if outcome.clue_delivered is not None:
        clue = outcome.clue_delivered
        click.echo(f"[Clue {clue.clue_id}] {clue.title}: {clue.content}")
    if outcome.clamped:
        click.echo("[The scene does not change.]")


def _print_scene_entry(session: GameSession) -> None:
    phase = session.state.phase
    if phase.kind is PhaseKind.SCENE and phase.scene is not None:
        scene = session.script.scene(phase.scene)
        if scene is not None:
            click.echo(f"[Scene {scene.scene_id}] {scene.title}")
            if scene.decision is not None:
                options = ", ".join(o.option_id for o in scene.decision.options)
                click.echo(f"[Decision] {scene.decision.prompt_text} (/decide {{{options}}})")
    elif phase.kind is PhaseKind.ENDING:
        options = ", ".join(e.option_id for e in session.script.endings)
        click.echo(f"[Ending] Choose what to do with the evidence: /end {{{options}}}")


@main.command()
@click.option(
    "--script",
    "script_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Scenario script (default: bundled).",
)
@click.option(
    "--version",
    "version_name",
    type=click.Choice(VERSION_CHOICES),
    default=PromptVersion.V3.value,
    show_default=True,
)
@click.option(
    "--provider",
    "provider_spec",
    default="live",
    show_default=True,
    help="'live' or 'mock:<queuefile>' (JSON array of raw replies).",
)
@click.option(
    "--data-dir",
    type=click.Path(path_type=Path),
    default=Path("data/sessions"),
    show_default=True,
)
@click.option("--session-id", default=None, help="Fix the session id (default: random).")
def play(
    script_path: Path | None,
    version_name: str,
    provider_spec: str,
    data_dir: Path,
    session_id: str | None,
) -> None:
    """Play one session in the terminal, one line per player turn."""
    script = _load_script_or_die(script_path or canonical_script_path())
    provider = _make_provider(provider_spec)
    store = FileSessionStore(data_dir)
    try:
        session = GameSession.new_session(
            script,
            provider,
            store,
            version=PromptVersion(version_name),
            session_id=session_id,
            config=SessionConfig(),
        )
    except GameError as exc:
        _fail(f"cannot start session: {exc}", 2)
        raise AssertionError("unreachable")

    click.echo(script.title)
    click.echo(script.background)
    click.echo('[Say "hi" to approach the terminal. /decide <option>, /end <option>, quit.]')
    while session.state.phase.kind is not PhaseKind.DONE:
        try:
            line = input("> ")
        except EOFError:
            break
        line = line.strip()
        if line in ("quit", "exit"):
            break
        if not line:
            continue
        if line.startswith("/decide "):
            option_id = line[len("/decide "):].strip()
            scene_id = session.state.phase.scene
            if scene_id is None:
                click.echo("[No decision is open right now.]")
                continue
            try:
                outcome = session.submit_decision(scene_id, option_id)
            except GameError as exc:
                click.echo(f"[{exc}]")
                continue
            click.echo(f"GM: {outcome.response.gamemaster_guidance}")
            continue
        if line.startswith("/end "):
            option_id = line[len("/end "):].strip()
            try:
                outcome = session.choose_ending(option_id)
            except (WrongPhase, UnknownOption) as exc:
                click.echo(f"[{exc}]")
                continue
            click.echo(f"GM: {outcome.response.gamemaster_guidance}")
            break
        before = session.state.phase
        try:
            outcome = session.submit_input(line)
        except EmptyInput:
            continue
        except (ProtocolError, TransportError) as exc:
            click.echo(f"[provider error: {exc}]")
            continue
        except GameError as exc:
            click.echo(f"[{exc}]")
            continue
        _print_outcome(outcome)
        if session.state.phase != before:
            _print_scene_entry(session)
    click.echo("[Session closed.]")


@main.command()
@click.argument("log_path", type=click.Path(path_type=Path))
@click.option(
    "--script",
    "script_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Scenario script the session was played against (default: bundled).",
)
def replay(log_path: Path, script_path: Path | None) -> None:
    """Re-derive a recorded session and print its final state hash."""
    if not log_path.exists():
        _fail(f"no such log: {log_path}", 2)
    script = _load_script_or_die(script_path or canonical_script_path())
    store = FileSessionStore(log_path.parent)
    session_id = log_path.stem
    try:
        record = store.record(session_id)
        state = replay_record(record, script)
    except ReplayDivergence as exc:
        _fail(f"divergence: {exc}", 1)
        raise AssertionError("unreachable")
    except GameError as exc:
        _fail(f"cannot replay {session_id}: {exc}", 2)
        raise AssertionError("unreachable")
    click.echo(state_hash(state))


@main.command()
@click.argument("log_dir", type=click.Path(path_type=Path))
@click.option(
    "--codebook",
    "codebook_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Tagging rules file (default: bundled).",
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    default=Path("."),
    show_default=True,
    help="Directory for heatmap.csv and stats.json.",
)
def analyze(log_dir: Path, codebook_path: Path | None, out_dir: Path) -> None:
    """Tag every recorded session and write usage + round statistics."""
    try:
        codebook = load_codebook(codebook_path or default_codebook_path())
    except GameError as exc:
        _fail(str(exc), 2)
        raise AssertionError("unreachable")
    store = FileSessionStore(log_dir)
    try:
        records = [store.record(sid) for sid in store.session_ids()]
        stats = round_stats(records)
        matrix = usage_matrix(records, codebook)
        out_dir.mkdir(parents=True, exist_ok=True)
        export_heatmap(matrix, out_dir / "heatmap.csv")
        stats_doc = {
            "mean": str(stats["mean"]),
            "min": stats["min"],
            "max": stats["max"],
            "per_session": stats["per_session"],
        }
        (out_dir / "stats.json").write_text(
            json.dumps(stats_doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    except NoSessions:
        _fail(f"no sessions found under {log_dir}", 1)
        raise AssertionError("unreachable")
    except (OSError, GameError) as exc:
        _fail(f"analysis failed: {exc}", 2)
        raise AssertionError("unreachable")
    click.echo(
        f"analyzed {len(records)} sessions: mean {stats['mean']} rounds "
        f"(min {stats['min']}, max {stats['max']})"
    )


if __name__ == "__main__":
    main()
