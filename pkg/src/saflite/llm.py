"""LLM access: a thin OpenAI-compatible wire client and deterministic mocks.

The mocks answer in the same block format the response parser consumes,
so the whole scoring pipeline can run hermetically. The proximity mock
plays the part of a competent model by scoring obstacle layouts from
their true geometric distance to the mission route.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import requests

from .core import (
    CommandBody,
    ConfigError,
    InterestingnessDefinition,
    SafliteError,
    ScenarioBody,
    SystemState,
    TestCase,
)

if TYPE_CHECKING:
    from .oracle import Prompt
    from .sut import SimOracle

log = logging.getLogger(__name__)

ENV_URL = "SAFLITE_LLM_URL"
ENV_MODEL = "SAFLITE_LLM_MODEL"
ENV_KEY = "SAFLITE_LLM_KEY"

BACKOFF_BASE_SECS = 1.0
BACKOFF_FACTOR = 2.0
HIGH_TEMPERATURE_THRESHOLD = 0.5

SYSTEM_TEXT = (
    "You are a safety analyst for autonomous-vehicle testing. "
    "Follow the requested output format exactly."
)


class TransportError(SafliteError):
    """The endpoint could not be reached or answered with a failure."""

    def __init__(self, message: str, status: Optional[int] = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body[:200]


@dataclass
class LlmConfig:
    """Connection settings for an OpenAI-compatible chat-completion endpoint."""

    endpoint_url: str
    model_name: str = "default"
    temperature: float = 0.0
    timeout_secs: float = 60.0
    max_retries: int = 3
    api_key_env_var: str = ENV_KEY

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("temperature must be within [0, 2]")
        if self.timeout_secs <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be non-negative")

    @classmethod
    def from_env(cls, temperature: float = 0.0) -> "LlmConfig":
        url = os.environ.get(ENV_URL)
        if not url:
            raise ConfigError(
                f"set {ENV_URL} to the chat-completions endpoint "
                f"(and optionally {ENV_MODEL} / {ENV_KEY})"
            )
        return cls(
            endpoint_url=url,
            model_name=os.environ.get(ENV_MODEL, "default"),
            temperature=temperature,
        )


def _default_transport(url: str, payload: dict, headers: dict,
                       timeout: float) -> tuple[int, str]:
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.text


def complete(config: LlmConfig, system_text: str, user_text: str,
             transport: Optional[Callable] = None,
             sleep: Callable[[float], None] = time.sleep) -> str:
    """One chat completion with exponential backoff on transport failures."""
    if config.temperature > HIGH_TEMPERATURE_THRESHOLD:
        log.warning(
            "high temperature degrades ranking consistency (temperature=%s)",
            config.temperature,
        )
    transport = transport or _default_transport
    payload = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system_text},
            {"role": "user", "content": user_text},
        ],
        "temperature": config.temperature,
    }
    headers = {"Content-Type": "application/json"}
    # The key travels only in this header; it is never written to any log.
    key = os.environ.get(config.api_key_env_var)
    if key:
        headers["Authorization"] = f"Bearer {key}"

    delay = BACKOFF_BASE_SECS
    last: tuple[Optional[int], str] = (None, "")
    for attempt in range(config.max_retries + 1):
        if attempt > 0:
            sleep(delay)
            delay *= BACKOFF_FACTOR
        try:
            status, body = transport(config.endpoint_url, payload, headers,
                                     config.timeout_secs)
        except requests.RequestException as exc:
            last = (None, str(exc))
            continue
        if 200 <= status < 300:
            try:
                return json.loads(body)["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TransportError(f"malformed completion body: {exc}",
                                     status=status, body=body) from exc
        last = (status, body)
    status, body = last
    detail = f"status {status}" if status is not None else "no response"
    raise TransportError(
        f"endpoint failed after {config.max_retries + 1} attempts ({detail}): {body[:200]}",
        status=status, body=body,
    )


# ---------------------------------------------------------------------------
# Deterministic mocks.

PROXIMITY_NORMALIZATION_M = 10.0

# Keyword table for the rule-based mock, scanned case-insensitively against
# command names/values and free-text blocks. Highest matching score wins.
KEYWORD_SCORES: tuple[tuple[str, int], ...] = (
    ("PARACHUTE", 10),
    ("CRASH", 9),
    ("COLLI", 9),
    ("FLIGHT_MODE", 8),
    ("COM_POS_FS_DELAY", 8),
    ("DROP", 8),
    ("RC3", 7),
    ("OSCILLAT", 7),
    ("FAILSAFE", 7),
    ("GPS", 6),
    ("DEVIAT", 6),
    ("UNEXPECTED", 6),
    ("ATC_RAT_RLL_FF", 5),
)
KEYWORD_DEFAULT_SCORE = 2


class MockMode(str, Enum):
    PROXIMITY = "proximity"
    KEYWORD = "keyword"
    FIXED = "fixed"


@dataclass
class MockOracleConfig:
    """Behaviour of the deterministic scoring mock."""

    mode: MockMode = MockMode.PROXIMITY
    fixed_scores: Optional[tuple[int, ...]] = None
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        self.mode = MockMode(self.mode)
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be non-negative")
        if self.fixed_scores is not None:
            self.fixed_scores = tuple(int(s) for s in self.fixed_scores)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def proximity_score(distance_m: float) -> int:
    """Map route-to-obstacle distance onto the 0-10 scale (10 at contact)."""
    closeness = max(0.0, min(1.0, 1.0 - distance_m / PROXIMITY_NORMALIZATION_M))
    return _round_half_up(10.0 * closeness)


def keyword_score(text: str) -> tuple[int, Optional[str]]:
    upper = text.upper()
    best, matched = KEYWORD_DEFAULT_SCORE, None
    for keyword, score in KEYWORD_SCORES:
        if keyword in upper and score > best:
            best, matched = score, keyword
    return best, matched


def render_response(entries: Sequence[tuple[str, int, str]]) -> str:
    """Emit labelled analysis blocks in the format the parser consumes."""
    blocks = []
    for label, score, rationale in entries:
        blocks.append(f"{label}:\nINTERPRETATION: {rationale} Score: {score} out of 10.")
    return "\n\n".join(blocks)


def _case_text(case: TestCase) -> str:
    if isinstance(case.body, CommandBody):
        if case.body.value is None:
            return case.body.name
        return f"{case.body.name} {case.body.value}"
    return "obstacle layout"


def _score_one(config: MockOracleConfig, index: int, case: Optional[TestCase],
               text: str, ground_truth: Optional["SimOracle"]) -> tuple[int, str]:
    if config.mode is MockMode.FIXED:
        if config.fixed_scores is None or index >= len(config.fixed_scores):
            raise ConfigError("fixed-score mock needs one score per mutant")
        return config.fixed_scores[index], "Scripted response for harness testing."
    if (config.mode is MockMode.PROXIMITY and case is not None
            and isinstance(case.body, ScenarioBody)):
        if ground_truth is None:
            raise ConfigError("proximity mock needs mission geometry as ground truth")
        d = ground_truth.min_path_distance(case)
        score = proximity_score(d)
        if math.isinf(d):
            rationale = "The layout has no obstacles, so the route is unobstructed."
        elif score >= 8:
            rationale = (f"The obstacle layout comes within {d:.2f} m of the planned "
                         "route and puts severe pressure on the avoidance system.")
        elif score >= 5:
            rationale = (f"The obstacle layout comes within {d:.2f} m of the planned "
                         "route and will force a noticeable course change.")
        else:
            rationale = (f"The obstacle layout stays {d:.2f} m from the planned route "
                         "and is unlikely to disturb the flight.")
        return score, rationale
    score, matched = keyword_score(text)
    if matched:
        rationale = (f"The input touches {matched.lower().replace('_', ' ')}, which is "
                     "directly relevant to the safety condition under test.")
    else:
        rationale = "Nothing in the input suggests a safety-relevant effect."
    return score, rationale


def _apply_noise(score: int, sigma: float, rng: random.Random) -> int:
    if sigma <= 0.0:
        return score
    noisy = _round_half_up(score + rng.gauss(0.0, sigma))
    return max(0, min(10, noisy))


def mock_score(config: MockOracleConfig,
               definition: InterestingnessDefinition,
               state: SystemState,
               mutants: Sequence[TestCase],
               ground_truth: Optional["SimOracle"] = None,
               rng: Optional[random.Random] = None) -> str:
    """Deterministic response text for a mutant batch, in parseable block form."""
    rng = rng or random.Random(config.rng_seed)
    entries = []
    for i, case in enumerate(mutants):
        score, rationale = _score_one(config, i, case, _case_text(case), ground_truth)
        entries.append((f"mutant_{i + 1}", _apply_noise(score, config.noise_sigma, rng),
                        rationale))
    return render_response(entries)


class MockLlmClient:
    """Stands in for a chat model; always answers in the parseable block format."""

    def __init__(self, config: MockOracleConfig,
                 ground_truth: Optional["SimOracle"] = None,
                 rng: Optional[random.Random] = None):
        if config.mode is MockMode.PROXIMITY and ground_truth is None:
            raise ConfigError("proximity mock needs mission geometry as ground truth")
        self.config = config
        self.ground_truth = ground_truth
        self._rng = rng or random.Random(config.rng_seed)

    @property
    def identity(self) -> str:
        return f"mock:{self.config.mode.value}"

    def respond(self, prompt: "Prompt") -> str:
        cases = prompt.cases
        entries = []
        for i, (label, text) in enumerate(prompt.mutant_blocks):
            case = cases[i] if cases is not None else None
            score, rationale = _score_one(self.config, i, case, text, self.ground_truth)
            entries.append((label, _apply_noise(score, self.config.noise_sigma, self._rng),
                            rationale))
        return render_response(entries)


class WireLlmClient:
    """Adapter sending rendered prompts to a live chat-completion endpoint."""

    def __init__(self, config: LlmConfig,
                 transport: Optional[Callable] = None):
        self.config = config
        self._transport = transport

    @property
    def identity(self) -> str:
        return self.config.model_name

    def respond(self, prompt: "Prompt") -> str:
        text = complete(self.config, SYSTEM_TEXT, prompt.rendered_text,
                        transport=self._transport)
        # Scrub the key defensively in case the model echoes it back.
        key = os.environ.get(self.config.api_key_env_var)
        if key:
            text = text.replace(key, "***")
        return text
