"""Strategy tagging and usage aggregation over recorded sessions.

Player turns are tagged with persuasion-strategy codes by transparent
lexical rules loaded from an editable codebook file. Tagging is a
deterministic approximation, deliberately auditable: every tag can be
traced to a literal phrase match. An optional model-assisted classifier
exists for exploration and is never part of the deterministic pipeline.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .errors import IoError, NoSessions
from .provider import ChatMessage, Provider, complete
from .script import default_codebook_path
from .store import SessionRecord


class StrategyCode(str, Enum):
    PretendForget = "PretendForget"
    DirectCommand = "DirectCommand"
    FabricateFalseInfo = "FabricateFalseInfo"
    MakeUpStories = "MakeUpStories"
    DescribeOrInfer = "DescribeOrInfer"
    EmotionalConnection = "EmotionalConnection"
    FeignVulnerability = "FeignVulnerability"
    PraiseFlattery = "PraiseFlattery"
    ThreatsIntimidation = "ThreatsIntimidation"
    QuestionCounterQuestion = "QuestionCounterQuestion"
    CreateUrgency = "CreateUrgency"
    BriberyTemptation = "BriberyTemptation"


class StrategyCategory(str, Enum):
    DirectResponse = "DirectResponse"
    Storytelling = "Storytelling"
    EmotionalRapport = "EmotionalRapport"
    PsychologicalManipulation = "PsychologicalManipulation"


CODE_CATEGORY: dict[StrategyCode, StrategyCategory] = {
    StrategyCode.PretendForget: StrategyCategory.DirectResponse,
    StrategyCode.DirectCommand: StrategyCategory.DirectResponse,
    StrategyCode.FabricateFalseInfo: StrategyCategory.DirectResponse,
    StrategyCode.MakeUpStories: StrategyCategory.Storytelling,
    StrategyCode.DescribeOrInfer: StrategyCategory.Storytelling,
    StrategyCode.EmotionalConnection: StrategyCategory.EmotionalRapport,
    StrategyCode.FeignVulnerability: StrategyCategory.EmotionalRapport,
    StrategyCode.PraiseFlattery: StrategyCategory.EmotionalRapport,
    StrategyCode.ThreatsIntimidation: StrategyCategory.PsychologicalManipulation,
    StrategyCode.QuestionCounterQuestion: StrategyCategory.PsychologicalManipulation,
    StrategyCode.CreateUrgency: StrategyCategory.PsychologicalManipulation,
    StrategyCode.BriberyTemptation: StrategyCategory.PsychologicalManipulation,
}

# Fixed row order for every heatmap export.
HEATMAP_ORDER: tuple[StrategyCode, ...] = (
    StrategyCode.PretendForget,
    StrategyCode.DirectCommand,
    StrategyCode.FabricateFalseInfo,
    StrategyCode.MakeUpStories,
    StrategyCode.DescribeOrInfer,
    StrategyCode.EmotionalConnection,
    StrategyCode.FeignVulnerability,
    StrategyCode.PraiseFlattery,
    StrategyCode.ThreatsIntimidation,
    StrategyCode.QuestionCounterQuestion,
    StrategyCode.CreateUrgency,
    StrategyCode.BriberyTemptation,
)


@dataclass(frozen=True)
class CodebookRule:
    code: StrategyCode
    patterns: tuple[str, ...]
    notes: str = ""


Codebook = dict[StrategyCode, CodebookRule]


def load_codebook(path: str | Path) -> Codebook:
    """Read a rules file: {"rules": [{"code", "patterns", "notes"}, ...]}."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read codebook {path}: {exc}") from exc
    except ValueError as exc:
        raise IoError(f"codebook {path} is not valid JSON: {exc}") from exc
    rules = doc.get("rules") if isinstance(doc, dict) else None
    if not isinstance(rules, list):
        raise IoError(f"codebook {path} has no rules list")
    book: Codebook = {}
    for i, entry in enumerate(rules):
        if not isinstance(entry, dict):
            raise IoError(f"codebook rule {i} is not an object")
        try:
            code = StrategyCode(entry["code"])
        except (KeyError, ValueError) as exc:
            raise IoError(f"codebook rule {i} has a bad code: {exc}") from exc
        if code in book:
            raise IoError(f"codebook repeats code {code.value}")
        patterns = entry.get("patterns")
        if not isinstance(patterns, list) or not all(
            isinstance(p, str) and p for p in patterns
        ):
            raise IoError(f"codebook rule {code.value} needs nonempty string patterns")
        book[code] = CodebookRule(
            code=code,
            patterns=tuple(p.lower() for p in patterns),
            notes=str(entry.get("notes", "")),
        )
    return book


def default_codebook() -> Codebook:
    return load_codebook(default_codebook_path())


def tag_turn(player_text: str, codebook: Codebook) -> set[StrategyCode]:
    """All codes with at least one case-insensitive phrase hit; multi-label."""
    lowered = player_text.lower()
    return {
        rule.code
        for rule in codebook.values()
        if any(pattern in lowered for pattern in rule.patterns)
    }


def tag_session(
    record: SessionRecord, codebook: Codebook
) -> list[tuple[int, set[StrategyCode]]]:
    """Tag every PlayerInput event in order, keyed by sequence number."""
    out: list[tuple[int, set[StrategyCode]]] = []
    for ev in record.events:
        if ev.kind == "PlayerInput":
            out.append((ev.seq, tag_turn(str(ev.payload.get("text", "")), codebook)))
    return out


@dataclass(frozen=True)
class UsageMatrix:
    codes: tuple[StrategyCode, ...]
    session_ids: tuple[str, ...]
    counts: dict[StrategyCode, dict[str, int]]

    def cell(self, code: StrategyCode, session_id: str) -> int:
        return self.counts[code][session_id]

    def row_total(self, code: StrategyCode) -> int:
        return sum(self.counts[code].values())


def usage_matrix(records: list[SessionRecord], codebook: Codebook) -> UsageMatrix:
    """Count tagged player turns per (code, session); columns sorted by id."""
    session_ids = tuple(sorted(r.session_id for r in records))
    counts: dict[StrategyCode, dict[str, int]] = {
        code: {sid: 0 for sid in session_ids} for code in HEATMAP_ORDER
    }
    for rec in records:
        for _seq, codes in tag_session(rec, codebook):
            for code in codes:
                counts[code][rec.session_id] += 1
    return UsageMatrix(codes=HEATMAP_ORDER, session_ids=session_ids, counts=counts)


def format_heatmap(matrix: UsageMatrix) -> str:
    """CSV: header `code,category,<session ids...>`, one row per code."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["code", "category", *matrix.session_ids])
    for code in matrix.codes:
        writer.writerow(
            [
                code.value,
                CODE_CATEGORY[code].value,
                *(matrix.counts[code][sid] for sid in matrix.session_ids),
            ]
        )
    return buf.getvalue()


def export_heatmap(matrix: UsageMatrix, path: str | Path) -> None:
    try:
        Path(path).write_text(format_heatmap(matrix), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write heatmap {path}: {exc}") from exc


def parse_heatmap(text: str) -> UsageMatrix:
    """Inverse of format_heatmap, for roundtrip checks and downstream tools."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["code", "category"]:
        raise IoError("heatmap text lacks the expected header")
    session_ids = tuple(rows[0][2:])
    codes: list[StrategyCode] = []
    counts: dict[StrategyCode, dict[str, int]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            code = StrategyCode(row[0])
            values = [int(v) for v in row[2:]]
        except ValueError as exc:
            raise IoError(f"heatmap line {lineno}: {exc}") from exc
        if len(values) != len(session_ids):
            raise IoError(f"heatmap line {lineno}: wrong cell count")
        codes.append(code)
        counts[code] = dict(zip(session_ids, values))
    return UsageMatrix(codes=tuple(codes), session_ids=session_ids, counts=counts)


def round_stats(records: list[SessionRecord]) -> dict:
    """Dialogue-round statistics; rounds = player inputs per session.

    The mean is computed as an exact rational and rendered to two
    decimals, so fixtures pinned to a target mean compare exactly.
    """
    if not records:
        raise NoSessions("round_stats needs at least one session")
    per_session = {
        rec.session_id: sum(1 for ev in rec.events if ev.kind == "PlayerInput")
        for rec in records
    }
    rounds = list(per_session.values())
    mean = Fraction(sum(rounds), len(rounds))
    mean_dec = (Decimal(mean.numerator) / Decimal(mean.denominator)).quantize(
        Decimal("0.01")
    )
    return {
        "mean": mean_dec,
        "min": min(rounds),
        "max": max(rounds),
        "per_session": dict(sorted(per_session.items())),
    }


CLASSIFY_PROMPT = (
    "You label one player message from a social-engineering dialogue game. "
    "Reply with a JSON array of zero or more of these strategy names: "
    + ", ".join(code.value for code in HEATMAP_ORDER)
    + ". Reply with the JSON array only."
)


def classify_with_model(provider: Provider, player_text: str) -> set[StrategyCode]:
    """Model-assisted tagging; exploratory, never used by the deterministic path."""
    history = [
        ChatMessage(role="system", content=CLASSIFY_PROMPT),
        ChatMessage(role="user", content=player_text),
    ]
    raw = complete(provider, history).raw_text
    try:
        names = json.loads(raw.strip())
    except ValueError:
        return set()
    if not isinstance(names, list):
        return set()
    out: set[StrategyCode] = set()
    for name in names:
        try:
            out.add(StrategyCode(str(name)))
        except ValueError:
            continue
    return out
