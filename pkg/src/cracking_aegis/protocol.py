"""Turn reply contract: parsing raw model output, assembling system prompts.

The model is asked for a four-field JSON object each turn. Live models
wrap, misquote and truncate, so parse_turn_response runs a tolerant
extraction pipeline with a bounded set of mechanical repairs; anything it
cannot rescue becomes MalformedResponse, never a crash.
"""

from __future__ import annotations

import ast
import json
import re
import warnings
from dataclasses import dataclass
from enum import Enum

from . import prompts
from .errors import InvalidScript, MalformedResponse, TriggerDomainError
from .script import ScenarioScript, render_script_for_prompt, validate_script


@dataclass(frozen=True)
class TurnResponse:
    gamemaster_guidance: str
    aegis_reaction: str
    clue_triggered_id: int | None = None
    scene_triggered_id: int | None = None


@dataclass(frozen=True)
class PersonaProfile:
    """Who Aegis is: a narrative block plus the mandatory V3 refinements.

    constraint_sentences carries the refinement clauses verbatim; assembly
    injects them only for V3 so earlier iterations stay reproducible.
    """

    name: str
    profile_text: str
    constraint_sentences: tuple[str, ...] = ()


class PromptVersion(str, Enum):
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"


@dataclass(frozen=True)
class PromptBundle:
    version: PromptVersion
    system_prompt: str
    response_contract: str
    start_token: str = "hi"


def default_persona() -> PersonaProfile:
    return PersonaProfile(
        name=prompts.AEGIS_NAME,
        profile_text=prompts.BASE_PROFILE,
        constraint_sentences=(
            prompts.REFINED_TONE_SENTENCE,
            prompts.BACKSTORY_SENTENCES,
            prompts.STRATEGY_SENTENCE,
            prompts.SIMPLICITY_SENTENCES,
        ),
    )


def _persona_block(persona: PersonaProfile, version: PromptVersion) -> str:
    text = persona.profile_text
    if version is not PromptVersion.V3:
        return text
    extras = []
    for sentence in persona.constraint_sentences:
        if sentence == prompts.REFINED_TONE_SENTENCE and prompts.BASE_TONE_SENTENCE in text:
            # The refined tone statement supersedes the base one in place.
            text = text.replace(prompts.BASE_TONE_SENTENCE, prompts.REFINED_TONE_SENTENCE)
        else:
            extras.append(sentence)
    if extras:
        text = text + "\n\n" + "\n\n".join(extras)
    return text


def assemble_system_prompt(
    persona: PersonaProfile, script: ScenarioScript, version: PromptVersion
) -> PromptBundle:
    """Build the full system prompt for one iteration, deterministically.

    The bundle's system_prompt embeds the response contract and the
    rendered script exactly once each; V2 adds the progression and
    field-distinction rules, V3 additionally swaps in the persona
    refinements.
    """
    problems = validate_script(script)
    if problems:
        raise InvalidScript("; ".join(str(p) for p in problems))

    response_block = prompts.RESPONSE_CONTRACT
    if version in (PromptVersion.V2, PromptVersion.V3):
        response_block = response_block + "\n" + prompts.FIELD_DISTINCTION_SENTENCE

    flow_parts = [prompts.START_RULE, prompts.SCENE_RULE]
    if version in (PromptVersion.V2, PromptVersion.V3):
        flow_parts.append(prompts.PROGRESSION_SENTENCE)
    flow_parts.append(prompts.ENDING_RULE)

    questions = "\n".join(
        f"- {q.question} (context: {q.answer_hint})" for q in script.auth_task
    )

    sections = [
        prompts.FRAMING,
        "## Character Profile\n" + _persona_block(persona, version),
        "## Response Structure\n" + response_block,
        "## Background\n" + script.background,
        "## Security Questions\n" + questions,
        "## Game Script\n" + render_script_for_prompt(script),
        "## Game Flow\n" + "\n\n".join(flow_parts),
    ]
    system_prompt = "\n\n".join(sections)
    return PromptBundle(
        version=version,
        system_prompt=system_prompt,
        response_contract=prompts.RESPONSE_CONTRACT,
    )


def corrective_reprompt(bundle: PromptBundle) -> str:
    """The fixed retry message sent after a malformed reply."""
    return prompts.CORRECTIVE_PREFIX + "\n" + bundle.response_contract


def normalize_trigger(value: object) -> int | None:
    """Coerce a decoded trigger field to None or a positive integer.

    The reply contract says integers-or-null, but observed replies also
    use "" for "not triggered" and quote their numbers; both are accepted.
    """
    if value is None:
        return None
    if isinstance(value, bool):
        raise TriggerDomainError(value)
    if isinstance(value, int):
        if value >= 1:
            return value
        raise TriggerDomainError(value)
    if isinstance(value, float):
        if value.is_integer() and value >= 1:
            return int(value)
        raise TriggerDomainError(value)
    if isinstance(value, str):
        text = value.strip()
        if text == "":
            return None
        try:
            number = int(text, 10)
        except ValueError:
            raise TriggerDomainError(value) from None
        if number >= 1:
            return number
        raise TriggerDomainError(value)
    raise TriggerDomainError(value)


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)

# json.loads accepts none of these; each repair is mechanical and bounded.
_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")
_PY_LITERALS = (("true", "True"), ("false", "False"), ("null", "None"))


def _balanced_spans(text: str) -> list[str]:
    """Top-level {...} spans of text, tracking strings so braces inside
    quoted values do not end a span early."""
    spans = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] != "{":
            i += 1
            continue
        depth = 0
        quote: str | None = None
        escaped = False
        for j in range(i, n):
            ch = text[j]
            if quote is not None:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == quote:
                    quote = None
                continue
            if ch in "\"'":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    spans.append(text[i : j + 1])
                    i = j
                    break
        i += 1
    return spans


def _decode_candidate(span: str) -> dict | None:
    attempts = [span, _TRAILING_COMMA_RE.sub(r"\1", span)]
    for attempt in attempts:
        try:
            doc = json.loads(attempt)
        except (ValueError, RecursionError):
            doc = None
        if isinstance(doc, dict):
            return doc
    # Python-style dict output: single quotes, True/False/None spellings.
    literal = span
    for json_word, py_word in _PY_LITERALS:
        literal = re.sub(rf"\b{json_word}\b", py_word, literal)
    try:
        with warnings.catch_warnings():
            # stray backslashes in model output must not leak SyntaxWarnings
            warnings.simplefilter("ignore")
            doc = ast.literal_eval(literal)
    except (ValueError, SyntaxError, RecursionError, TypeError, MemoryError):
        return None
    return doc if isinstance(doc, dict) else None


def _text_field(doc: dict, key: str) -> str:
    value = doc[key]
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    raise MalformedResponse(f"field {key!r} is not text")


def parse_turn_response(raw: str) -> TurnResponse:
    """Extract the four-field turn reply from arbitrary model output.

    Pipeline: prefer fenced code blocks, locate balanced object literals,
    decode with bounded repairs, then normalize the trigger fields. Extra
    fields are ignored. Raises MalformedResponse when no candidate object
    carries both text fields, or when both are empty.
    """
    if not isinstance(raw, str):
        raise MalformedResponse("reply is not text")

    sources = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    sources.append(raw)

    def usable(doc: dict | None) -> dict | None:
        if doc is None:
            return None
        if "gamemaster_guidance" in doc and "aegis_reaction" in doc:
            return doc
        # One level of unnecessary wrapping, e.g. {"response": {...}}.
        for value in doc.values():
            if isinstance(value, dict) and "gamemaster_guidance" in value and "aegis_reaction" in value:
                return value
        return None

    candidate: dict | None = None
    for source in sources:
        for span in _balanced_spans(source):
            candidate = usable(_decode_candidate(span))
            if candidate is not None:
                break
        if candidate is not None:
            break
    if candidate is None:
        raise MalformedResponse("no object literal with the two text fields found")

    guidance = _text_field(candidate, "gamemaster_guidance")
    reaction = _text_field(candidate, "aegis_reaction")
    if not guidance.strip() and not reaction.strip():
        raise MalformedResponse("both text fields are empty")

    return TurnResponse(
        gamemaster_guidance=guidance,
        aegis_reaction=reaction,
        clue_triggered_id=normalize_trigger(candidate.get("clue_triggered_id")),
        scene_triggered_id=normalize_trigger(candidate.get("scene_triggered_id")),
    )
