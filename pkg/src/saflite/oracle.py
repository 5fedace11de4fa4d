"""Interestingness oracle: prompt assembly, model calls, parsing and selection.

A batch of mutants is rendered into a fixed-template prompt, the model
answers one labelled analysis block per mutant, and the parser recovers
integer scores on the 0-10 scale. Scores band into three categories and
a selection policy decides which mutants are worth executing.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import requests

from . import llm
from .core import (
    Category,
    CommandBody,
    InterestingnessDefinition,
    SafliteError,
    ScenarioBody,
    SystemState,
    TestCase,
    check_score,
)


class PromptError(SafliteError):
    """The prompt cannot be built from these inputs."""


class ParseFailed(SafliteError):
    """No score could be recovered anywhere in the response."""


class OracleUnavailable(SafliteError):
    """The model could not be reached; callers should degrade gracefully."""


DEFINITION_HEADER = "# Definition of Interestingness"
STATE_HEADER = "# Current System State"
MUTANTS_HEADER = "# Mutants"
TASK_HEADER = "# Task"
EXAMPLE_HEADER = "# Example Output"

DEFAULT_MAX_BATCH = 16
DEFAULT_UNPARSED_SCORE = 5
INTERESTING_LOG_THRESHOLD = 5

TASK_TEXT = (
    "Interpret the meaning of each mutant, evaluate how executing it would impact "
    "the current system state, and give a brief explanation of your thought process "
    "for each one. Then assign each mutant an integer score from 0 to 10. A score of "
    "10 means the mutant is extremely likely to meet the definition of interestingness "
    "when executed; a score of 0 means it almost certainly will not."
)

EXAMPLE_TEXT = (
    "mutant_1:\n"
    "INTERPRETATION: A brief explanation of the expected impact goes here. "
    "Score: 7 out of 10."
)


class ParseStatus(str, Enum):
    PARSED = "parsed"
    DEFAULTED = "defaulted"


@dataclass(frozen=True)
class Prompt:
    """A rendered prompt plus the structured pieces it was built from."""

    rendered_text: str
    definition_text: str
    state_text: str
    mutant_blocks: tuple[tuple[str, str], ...]
    cases: Optional[tuple[TestCase, ...]] = None


@dataclass(frozen=True)
class ScoredMutant:
    case: TestCase
    score: int
    rationale: str
    category: Category
    parse_status: ParseStatus


def render_case_lines(case: TestCase) -> str:
    """Body of one mutant block: an obstacle table or a command line."""
    if isinstance(case.body, ScenarioBody):
        lines = []
        for i, ob in enumerate(case.body.obstacles, start=1):
            x, y, z = ob.center
            l, w, h = ob.size
            lines.append(
                f"obstacle {i}: x={x} y={y} z={z} l={l} w={w} h={h} rot={ob.yaw_deg}"
            )
        return "\n".join(lines) if lines else "no obstacles"
    if case.body.value is None:
        return f"command: {case.body.name}"
    return f"command: {case.body.name} value={case.body.value}"


def _render_state(state: SystemState) -> str:
    lines = [state.narrative]
    for key, value in state.facts.items():
        lines.append(f"- {key}: {value}")
    return "\n".join(lines)


def _render_prompt(definition_text: str, state_text: str,
                   blocks: Sequence[tuple[str, str]],
                   cases: Optional[Sequence[TestCase]]) -> Prompt:
    mutant_section = []
    for label, text in blocks:
        mutant_section.append(f"{label}:\n{text}")
    rendered = "\n\n".join([
        DEFINITION_HEADER,
        definition_text,
        STATE_HEADER,
        state_text,
        MUTANTS_HEADER,
        "\n\n".join(mutant_section),
        TASK_HEADER,
        TASK_TEXT,
        EXAMPLE_HEADER,
        EXAMPLE_TEXT,
    ])
    return Prompt(
        rendered_text=rendered,
        definition_text=definition_text,
        state_text=state_text,
        mutant_blocks=tuple(blocks),
        cases=None if cases is None else tuple(cases),
    )


def set_prompt(definition: InterestingnessDefinition, state: SystemState,
               mutants: Sequence[TestCase],
               max_batch: int = DEFAULT_MAX_BATCH) -> Prompt:
    """Assemble the scoring prompt for a batch of mutants. Deterministic."""
    if not mutants:
        raise PromptError("mutant batch is empty")
    if len(mutants) > max_batch:
        raise PromptError(f"mutant batch of {len(mutants)} exceeds the cap of {max_batch}")
    blocks = [(f"mutant_{i + 1}", render_case_lines(case))
              for i, case in enumerate(mutants)]
    return _render_prompt(definition.policy_text, _render_state(state), blocks, mutants)


@dataclass(frozen=True)
class LlmExchange:
    text: str
    latency_ms: float


def llm_agent(prompt: Prompt, client) -> LlmExchange:
    """Send the prompt and return the model's text verbatim, with timing.

    Transport-level failures surface as OracleUnavailable so campaigns can
    fall back to unguided fuzzing instead of halting.
    """
    started = time.perf_counter()
    try:
        text = client.respond(prompt)
    except OracleUnavailable:
        raise
    except (llm.TransportError, requests.RequestException, OSError) as exc:
        raise OracleUnavailable(str(exc)) from exc
    latency_ms = (time.perf_counter() - started) * 1000.0
    return LlmExchange(text=text, latency_ms=latency_ms)


_SCORE_RE = re.compile(
    r"score\s*[:=]?\s*(-?\d+(?:\.\d+)?)\s*(?:out\s+of\s+10|/\s*10)?",
    re.IGNORECASE,
)


def _parse_blocks(text: str, n: int,
                  default_score: int) -> list[tuple[int, str, ParseStatus]]:
    """Split a response into labelled blocks and pull one score from each."""
    spans = []
    for k in range(1, n + 1):
        m = re.search(rf"\bmutant[_\s]{k}\b\s*:?", text, re.IGNORECASE)
        spans.append((k, m.start(), m.end()) if m else None)
    found = sorted((s for s in spans if s), key=lambda s: s[1])
    blocks: dict[int, str] = {}
    for i, (k, start, end) in enumerate(found):
        stop = found[i + 1][1] if i + 1 < len(found) else len(text)
        blocks[k] = text[end:stop].strip()
    if not blocks and n == 1:
        blocks[1] = text.strip()

    results = []
    parsed_any = False
    for k in range(1, n + 1):
        block = blocks.get(k)
        m = _SCORE_RE.search(block) if block else None
        if m:
            raw = float(m.group(1))
            score = max(0, min(10, int(raw + 0.5) if raw >= 0 else 0))
            results.append((score, block, ParseStatus.PARSED))
            parsed_any = True
        else:
            results.append((default_score, block or "", ParseStatus.DEFAULTED))
    if not parsed_any:
        raise ParseFailed("no parsable score anywhere in the response")
    return results


def parse_response(text: str, expected: Sequence[TestCase],
                   default_score: int = DEFAULT_UNPARSED_SCORE) -> list[ScoredMutant]:
    """Recover one scored mutant per expected case, in the input order.

    Mutants whose block is missing or carries no readable score keep the
    default score and are flagged so downstream stats can discount them.
    """
    parsed = _parse_blocks(text, len(expected), default_score)
    out = []
    for case, (score, rationale, status) in zip(expected, parsed):
        out.append(ScoredMutant(
            case=case,
            score=score,
            rationale=rationale,
            category=categorize(score),
            parse_status=status,
        ))
    return out


def categorize(score: int) -> Category:
    """Band a 0-10 score: 0-4 non-interesting, 5-7 mid, 8-10 interesting."""
    check_score(score)
    if score <= 4:
        return Category.NON_INTERESTING
    if score <= 7:
        return Category.MID_INTERESTING
    return Category.INTERESTING


class SelectKind(str, Enum):
    TOP_K = "topk"
    CATEGORY_FLOOR = "floor"


@dataclass(frozen=True)
class SelectPolicy:
    """Which scored mutants go on to execution."""

    kind: SelectKind = SelectKind.CATEGORY_FLOOR
    k: int = 1
    min_category: Category = Category.MID_INTERESTING

    @classmethod
    def top_k(cls, k: int) -> "SelectPolicy":
        if k < 1:
            raise ValueError("top-k needs k >= 1")
        return cls(kind=SelectKind.TOP_K, k=k)

    @classmethod
    def category_floor(cls, min_category: Category) -> "SelectPolicy":
        return cls(kind=SelectKind.CATEGORY_FLOOR, min_category=min_category)

    @classmethod
    def parse(cls, text: str) -> "SelectPolicy":
        kind, _, arg = text.partition(":")
        if kind == "topk":
            return cls.top_k(int(arg))
        if kind == "floor":
            names = {"mid": Category.MID_INTERESTING,
                     "interesting": Category.INTERESTING,
                     "non": Category.NON_INTERESTING}
            if arg not in names:
                raise ValueError(f"unknown category floor {arg!r}")
            return cls.category_floor(names[arg])
        raise ValueError(f"unknown selection policy {text!r}")

    def to_str(self) -> str:
        if self.kind is SelectKind.TOP_K:
            return f"topk:{self.k}"
        names = {Category.MID_INTERESTING: "mid",
                 Category.INTERESTING: "interesting",
                 Category.NON_INTERESTING: "non"}
        return f"floor:{names[self.min_category]}"


def select(scored: Sequence[ScoredMutant], policy: SelectPolicy) -> list[TestCase]:
    """Pick the mutants to execute. Never empty for a non-empty batch."""
    if not scored:
        raise ValueError("nothing to select from")
    ranked = sorted(scored, key=lambda s: -s.score)  # stable: ties keep input order
    if policy.kind is SelectKind.TOP_K:
        return [s.case for s in ranked[:policy.k]]
    qualifying = [s for s in ranked if s.category >= policy.min_category]
    if not qualifying:
        qualifying = [ranked[0]]
    return [s.case for s in qualifying]


class AuditLog:
    """Append-only JSONL record of every oracle call."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.entries: list[dict] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def append(self, iteration: Optional[int], prompt: str, response: str,
               scores: Sequence[int], latency_ms: float) -> None:
        entry = {
            "iteration": iteration,
            "prompt": prompt,
            "response": response,
            "scores": list(scores),
            "latency_ms": round(latency_ms, 3),
        }
        self.entries.append(entry)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")

    def __len__(self) -> int:
        return len(self.entries)


def score_batch(definition: InterestingnessDefinition, state: SystemState,
                mutants: Sequence[TestCase], client,
                audit: Optional[AuditLog] = None,
                iteration: Optional[int] = None) -> list[ScoredMutant]:
    """Full oracle round: build prompt, call the model, parse, and audit."""
    prompt = set_prompt(definition, state, mutants)
    exchange = llm_agent(prompt, client)
    scored = parse_response(exchange.text, mutants)
    if audit is not None:
        audit.append(iteration, prompt.rendered_text, exchange.text,
                     [s.score for s in scored], exchange.latency_ms)
    return scored


@dataclass(frozen=True)
class LogClassification:
    interesting: bool
    score: int
    rationale: str


def classify_log(definition: InterestingnessDefinition, log_summary: str, client,
                 audit: Optional[AuditLog] = None,
                 iteration: Optional[int] = None) -> LogClassification:
    """Binary triage of a flight-log summary using the same 0-10 scoring."""
    if not log_summary.strip():
        raise PromptError("log summary is empty")
    state_text = "A completed flight's log is under post-run review."
    prompt = _render_prompt(definition.policy_text, state_text,
                            [("mutant_1", log_summary.strip())], cases=None)
    exchange = llm_agent(prompt, client)
    score, rationale, _status = _parse_blocks(exchange.text, 1,
                                              DEFAULT_UNPARSED_SCORE)[0]
    if audit is not None:
        audit.append(iteration, prompt.rendered_text, exchange.text,
                     [score], exchange.latency_ms)
    return LogClassification(
        interesting=score >= INTERESTING_LOG_THRESHOLD,
        score=score,
        rationale=rationale,
    )
