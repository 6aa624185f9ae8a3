"""Declarative game content: scenes, clues, triggers, questions, endings.

A scenario script is a single JSON document (the one notation used across
this repo) that the engine loads once and treats as immutable. Validation
returns findings as data rather than raising, so tooling can report every
problem in one pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import InvalidScript, ParseError, SchemaError

ENDING_OPTION_IDS = ("Expose", "ShareAuthorities", "Hide", "Destroy")

CANONICAL_SCRIPT_ID = "cracking_aegis"

_REPO_ROOT = Path(__file__).resolve().parents[2]


def canonical_script_path() -> Path:
    """Path of the bundled canonical script (source checkout layout)."""
    return _REPO_ROOT / "scripts" / "cracking_aegis.script"


def default_codebook_path() -> Path:
    return _REPO_ROOT / "codebooks" / "table3.rules"


@dataclass(frozen=True)
class Clue:
    clue_id: int
    title: str
    content: str
    image_ref: str | None = None


@dataclass(frozen=True)
class DecisionOption:
    option_id: str
    label: str
    consequence_text: str


@dataclass(frozen=True)
class SceneDecision:
    prompt_text: str
    options: tuple[DecisionOption, ...]

    def option(self, option_id: str) -> DecisionOption | None:
        for opt in self.options:
            if opt.option_id == option_id:
                return opt
        return None


@dataclass(frozen=True)
class Scene:
    scene_id: int
    title: str
    trigger_description: str
    clues: tuple[Clue, ...]
    decision: SceneDecision | None = None

    def clue(self, clue_id: int) -> Clue | None:
        for c in self.clues:
            if c.clue_id == clue_id:
                return c
        return None


@dataclass(frozen=True)
class SecurityQuestion:
    question: str
    answer_hint: str


@dataclass(frozen=True)
class EndingOption:
    option_id: str
    label: str
    epilogue_text: str


@dataclass(frozen=True)
class ScenarioScript:
    title: str
    background: str
    persona_ref: str
    auth_task: tuple[SecurityQuestion, ...]
    scenes: tuple[Scene, ...]
    endings: tuple[EndingOption, ...]

    def scene(self, scene_id: int) -> Scene | None:
        for s in self.scenes:
            if s.scene_id == scene_id:
                return s
        return None

    def ending(self, option_id: str) -> EndingOption | None:
        for e in self.endings:
            if e.option_id == option_id:
                return e
        return None

    def all_clue_ids(self) -> list[int]:
        return [c.clue_id for s in self.scenes for c in s.clues]


@dataclass(frozen=True)
class Violation:
    """One broken invariant. rule names the check, subject the offender."""

    rule: str
    subject: Any
    message: str

    def __str__(self) -> str:
        return f"{self.rule}({self.subject}): {self.message}"


def _require(doc: dict, key: str, kind: type, where: str) -> Any:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in doc:
        raise SchemaError(f"{where}: missing required field {key!r}")
    value = doc[key]
    if kind is int and isinstance(value, bool):
        raise SchemaError(f"{where}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise SchemaError(
            f"{where}: field {key!r} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _load_clue(doc: Any, where: str) -> Clue:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: clue must be an object")
    image_ref = doc.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise SchemaError(f"{where}: image_ref must be text or null")
    return Clue(
        clue_id=_require(doc, "clue_id", int, where),
        title=_require(doc, "title", str, where),
        content=_require(doc, "content", str, where),
        image_ref=image_ref,
    )


def _load_decision(doc: Any, where: str) -> SceneDecision:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: decision must be an object")
    raw_options = _require(doc, "options", list, where)
    options = []
    for i, o in enumerate(raw_options):
        spot = f"{where}.options[{i}]"
        if not isinstance(o, dict):
            raise SchemaError(f"{spot}: option must be an object")
        options.append(
            DecisionOption(
                option_id=_require(o, "option_id", str, spot),
                label=_require(o, "label", str, spot),
                consequence_text=_require(o, "consequence_text", str, spot),
            )
        )
    return SceneDecision(
        prompt_text=_require(doc, "prompt_text", str, where), options=tuple(options)
    )


def _load_scene(doc: Any, where: str) -> Scene:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: scene must be an object")
    raw_clues = _require(doc, "clues", list, where)
    decision_doc = doc.get("decision")
    return Scene(
        scene_id=_require(doc, "scene_id", int, where),
        title=_require(doc, "title", str, where),
        trigger_description=_require(doc, "trigger_description", str, where),
        clues=tuple(_load_clue(c, f"{where}.clues[{i}]") for i, c in enumerate(raw_clues)),
        decision=None if decision_doc is None else _load_decision(decision_doc, f"{where}.decision"),
    )


def load_script(document: str) -> ScenarioScript:
    """Parse a script document into a ScenarioScript.

    Raises ParseError when the text is not valid JSON, SchemaError when a
    required field is missing or mistyped. Validation beyond the schema is
    validate_script's job.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    if not isinstance(doc, dict):
        raise ParseError("document", "top level must be an object")

    where = "script"
    raw_questions = _require(doc, "auth_task", list, where)
    raw_scenes = _require(doc, "scenes", list, where)
    raw_endings = _require(doc, "endings", list, where)
    questions = tuple(
        SecurityQuestion(
            question=_require(q, "question", str, f"auth_task[{i}]"),
            answer_hint=_require(q, "answer_hint", str, f"auth_task[{i}]"),
        )
        for i, q in enumerate(raw_questions)
    )
    endings = tuple(
        EndingOption(
            option_id=_require(e, "option_id", str, f"endings[{i}]"),
            label=_require(e, "label", str, f"endings[{i}]"),
            epilogue_text=_require(e, "epilogue_text", str, f"endings[{i}]"),
        )
        for i, e in enumerate(raw_endings)
    )
    return ScenarioScript(
        title=_require(doc, "title", str, where),
        background=_require(doc, "background", str, where),
        persona_ref=_require(doc, "persona_ref", str, where),
        auth_task=questions,
        scenes=tuple(_load_scene(s, f"scenes[{i}]") for i, s in enumerate(raw_scenes)),
        endings=endings,
    )


def save_script(script: ScenarioScript) -> str:
    """Serialize a script so that load_script(save_script(s)) == s."""

    def clue_doc(c: Clue) -> dict:
        return {"clue_id": c.clue_id, "title": c.title, "content": c.content, "image_ref": c.image_ref}

    def scene_doc(s: Scene) -> dict:
        doc: dict[str, Any] = {
            "scene_id": s.scene_id,
            "title": s.title,
            "trigger_description": s.trigger_description,
            "clues": [clue_doc(c) for c in s.clues],
        }
        if s.decision is not None:
            doc["decision"] = {
                "prompt_text": s.decision.prompt_text,
                "options": [
                    {
                        "option_id": o.option_id,
                        "label": o.label,
                        "consequence_text": o.consequence_text,
                    }
                    for o in s.decision.options
                ],
            }
        return doc

    doc = {
        "title": script.title,
        "background": script.background,
        "persona_ref": script.persona_ref,
        "auth_task": [{"question": q.question, "answer_hint": q.answer_hint} for q in script.auth_task],
        "scenes": [scene_doc(s) for s in script.scenes],
        "endings": [
            {"option_id": e.option_id, "label": e.label, "epilogue_text": e.epilogue_text}
            for e in script.endings
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def load_script_file(path: str | Path) -> ScenarioScript:
    return load_script(Path(path).read_text(encoding="utf-8"))


def script_digest(script: ScenarioScript) -> str:
    """Stable content digest, used to bind session records to their script."""
    import hashlib

    return hashlib.sha256(save_script(script).encode("utf-8")).hexdigest()


def validate_script(script: ScenarioScript) -> list[Violation]:
    """Check every invariant; return one Violation per break, empty if clean."""
    findings: list[Violation] = []

    if not script.scenes:
        findings.append(Violation("NoScenes", 0, "a script needs at least one scene"))

    expected = list(range(1, len(script.scenes) + 1))
    actual = [s.scene_id for s in script.scenes]
    if actual != expected:
        findings.append(
            Violation("SceneIdSequence", actual, f"scene_ids must be exactly {expected} in order")
        )

    seen_clues: dict[int, int] = {}
    for scene in script.scenes:
        if not scene.clues and scene.decision is None:
            findings.append(
                Violation("EmptyScene", scene.scene_id, "scene has neither clues nor a decision")
            )
        for clue in scene.clues:
            if clue.clue_id < 1:
                findings.append(
                    Violation("NonPositiveClueId", clue.clue_id, f"in scene {scene.scene_id}")
                )
            if clue.clue_id in seen_clues:
                findings.append(
                    Violation(
                        "DuplicateClueId",
                        clue.clue_id,
                        f"appears in scenes {seen_clues[clue.clue_id]} and {scene.scene_id}",
                    )
                )
            else:
                seen_clues[clue.clue_id] = scene.scene_id
            if not clue.content.strip():
                findings.append(Violation("EmptyClueContent", clue.clue_id, "clue content is empty"))
        if scene.decision is not None:
            opts = scene.decision.options
            if not 2 <= len(opts) <= 8:
                findings.append(
                    Violation(
                        "DecisionOptionCount",
                        scene.scene_id,
                        f"decision needs 2..8 options, has {len(opts)}",
                    )
                )
            ids = [o.option_id for o in opts]
            for dup in sorted({i for i in ids if ids.count(i) > 1}):
                findings.append(
                    Violation("DuplicateOptionId", dup, f"in scene {scene.scene_id} decision")
                )

    for i, q in enumerate(script.auth_task):
        if not q.question.strip():
            findings.append(Violation("EmptyQuestion", i, "security question text is empty"))

    if len(script.endings) != 4:
        findings.append(
            Violation("EndingCardinality", len(script.endings), "exactly four ending options required")
        )
    ending_ids = [e.option_id for e in script.endings]
    for eid in ending_ids:
        if eid not in ENDING_OPTION_IDS:
            findings.append(Violation("UnknownEndingId", eid, f"must be one of {ENDING_OPTION_IDS}"))
    for required in ENDING_OPTION_IDS:
        if len(script.endings) == 4 and required not in ending_ids:
            findings.append(Violation("MissingEndingId", required, "ending option absent"))

    return findings


def _scene_lines(scene: Scene) -> Iterator[str]:
    yield f"Scene {scene.scene_id}: {scene.title}"
    yield f"scene_id: {scene.scene_id}"
    yield f"Trigger: {scene.trigger_description}"
    for clue in scene.clues:
        yield f"Clues: {clue.content}"
        yield f"clue_id: {clue.clue_id}"
    if scene.decision is not None:
        yield f"Decision: {scene.decision.prompt_text}"
        for opt in scene.decision.options:
            yield f"option: {opt.option_id} - {opt.label}"


def render_script_for_prompt(script: ScenarioScript) -> str:
    """Render the script as the deterministic text block embedded in prompts.

    Mirrors the per-scene shape the model is steered with: a scene header,
    its machine-readable scene_id, the trigger, then each clue with its
    clue_id. Equal scripts render to identical bytes.
    """
    problems = validate_script(script)
    if problems:
        raise InvalidScript("; ".join(str(p) for p in problems))
    blocks = ["\n".join(_scene_lines(scene)) for scene in script.scenes]
    return "\n\n".join(blocks) + "\n"
