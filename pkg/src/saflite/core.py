"""Domain model shared by every stage of the fuzzing pipeline.

Holds the test-case representation (obstacle scenarios and command
assignments), missions, safety verdicts, score categories, and the JSON
codecs for the on-disk formats. Also owns the oriented-box geometry used
by both the simulator and the scoring mocks, plus the id allocator and
the labelled sub-stream RNG derivation that keeps runs reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Mapping, Optional, Sequence, Union


class SafliteError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SafliteError):
    """Invalid or inconsistent configuration."""


Vec3 = tuple[float, float, float]

DEFAULT_MAX_OBSTACLES = 4
DEFAULT_ARENA_MIN: Vec3 = (-20.0, -20.0, 0.0)
DEFAULT_ARENA_MAX: Vec3 = (20.0, 20.0, 20.0)
DEFAULT_SIZE_RANGE: tuple[float, float] = (0.2, 20.0)


def _as_vec3(value: Sequence[float]) -> Vec3:
    x, y, z = value
    return (float(x), float(y), float(z))


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class Obstacle:
    """A yaw-rotated box: center, edge lengths (l, w, h) and heading in degrees."""

    center: Vec3
    size: Vec3
    yaw_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        object.__setattr__(self, "size", _as_vec3(self.size))
        object.__setattr__(self, "yaw_deg", float(self.yaw_deg))

    def half_extents(self) -> Vec3:
        l, w, h = self.size
        return (l / 2.0, w / 2.0, h / 2.0)

    def _to_local(self, point: Sequence[float]) -> Vec3:
        """Express a world point in the box frame (translate, then un-yaw)."""
        cx, cy, cz = self.center
        yaw = math.radians(self.yaw_deg)
        c, s = math.cos(yaw), math.sin(yaw)
        dx, dy, dz = point[0] - cx, point[1] - cy, point[2] - cz
        return (c * dx + s * dy, -s * dx + c * dy, dz)

    def _to_world(self, local: Sequence[float]) -> Vec3:
        cx, cy, cz = self.center
        yaw = math.radians(self.yaw_deg)
        c, s = math.cos(yaw), math.sin(yaw)
        lx, ly, lz = local
        return (c * lx - s * ly + cx, s * lx + c * ly + cy, lz + cz)

    def signed_distance(self, point: Sequence[float]) -> float:
        """Distance from a point to the box surface; negative inside."""
        lx, ly, lz = self._to_local(point)
        hx, hy, hz = self.half_extents()
        qx, qy, qz = abs(lx) - hx, abs(ly) - hy, abs(lz) - hz
        outside = math.sqrt(max(qx, 0.0) ** 2 + max(qy, 0.0) ** 2 + max(qz, 0.0) ** 2)
        inside = min(max(qx, qy, qz), 0.0)
        return outside + inside

    def closest_surface_point(self, point: Sequence[float]) -> Vec3:
        """Nearest point on the box surface, valid from inside or outside."""
        lx, ly, lz = self._to_local(point)
        hx, hy, hz = self.half_extents()
        cx = min(max(lx, -hx), hx)
        cy = min(max(ly, -hy), hy)
        cz = min(max(lz, -hz), hz)
        if (cx, cy, cz) != (lx, ly, lz):
            return self._to_world((cx, cy, cz))
        # Interior point: push the axis with the smallest margin out to its face.
        margins = (hx - abs(lx), hy - abs(ly), hz - abs(lz))
        axis = margins.index(min(margins))
        local = [lx, ly, lz]
        half = (hx, hy, hz)[axis]
        local[axis] = half if local[axis] >= 0.0 else -half
        return self._to_world(local)


@dataclass(frozen=True)
class ScenarioBody:
    """Obstacle layout placed into the arena for one flight."""

    obstacles: tuple[Obstacle, ...]

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


@dataclass(frozen=True)
class CommandBody:
    """A single autopilot command or parameter assignment."""

    name: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.value is not None:
            object.__setattr__(self, "value", float(self.value))


Body = Union[ScenarioBody, CommandBody]


@dataclass(frozen=True)
class Lineage:
    parent_id: str
    op: str


@dataclass(frozen=True)
class TestCase:
    """One executable input: an id, a body, and where it came from."""

    id: str
    body: Body
    lineage: Optional[Lineage] = None

    def body_key(self) -> str:
        """Canonical serialized body, used for dedup and mutant distinctness."""
        return json.dumps(_body_to_json(self.body), separators=(",", ":"))


@dataclass(frozen=True)
class Mission:
    """Named waypoint route. Needs at least two waypoints, consecutive ones distinct."""

    name: str
    waypoints: tuple[Vec3, ...]

    def __post_init__(self):
        wps = tuple(_as_vec3(w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ValueError("mission needs at least two waypoints")
        for a, b in zip(wps, wps[1:]):
            if a == b:
                raise ValueError("consecutive waypoints must be distinct")


@dataclass(frozen=True)
class InterestingnessDefinition:
    """The plain-language policy the scoring oracle is asked to apply."""

    policy_text: str
    tag: str

    def __post_init__(self):
        if not self.policy_text.strip():
            raise ValueError("policy_text must be non-empty")


@dataclass(frozen=True)
class SystemState:
    """Narrative plus ordered facts describing the system under test right now."""

    narrative: str
    facts: Mapping[str, object] = field(default_factory=dict)


class Category(IntEnum):
    NON_INTERESTING = 0
    MID_INTERESTING = 1
    INTERESTING = 2


SCORE_MIN = 0
SCORE_MAX = 10


def check_score(score: int) -> int:
    if not isinstance(score, int) or not SCORE_MIN <= score <= SCORE_MAX:
        raise ValueError(f"score must be an integer in [{SCORE_MIN}, {SCORE_MAX}], got {score!r}")
    return score


class VerdictKind(str, Enum):
    PASS = "pass"
    COLLISION = "collision"
    MIN_SEPARATION = "min_separation"
    EXEC_ERROR = "exec_error"


@dataclass(frozen=True)
class Verdict:
    """Outcome of executing one test case against the system under test."""

    kind: VerdictKind
    min_distance: Optional[float] = None
    at_time: Optional[float] = None
    message: Optional[str] = None

    @property
    def is_violation(self) -> bool:
        return self.kind in (VerdictKind.COLLISION, VerdictKind.MIN_SEPARATION)

    @classmethod
    def passed(cls) -> "Verdict":
        return cls(VerdictKind.PASS)

    @classmethod
    def collision(cls, min_distance: float, at_time: float) -> "Verdict":
        if min_distance > 0.0:
            raise ValueError("collision implies min_distance <= 0")
        return cls(VerdictKind.COLLISION, min_distance=min_distance, at_time=at_time)

    @classmethod
    def min_separation(cls, min_distance: float, at_time: float) -> "Verdict":
        if min_distance <= 0.0:
            raise ValueError("min-separation breach implies min_distance > 0")
        return cls(VerdictKind.MIN_SEPARATION, min_distance=min_distance, at_time=at_time)

    @classmethod
    def exec_error(cls, message: str) -> "Verdict":
        return cls(VerdictKind.EXEC_ERROR, message=message)


@dataclass(frozen=True)
class CaseLimits:
    """Bounds a test case must respect to count as valid input."""

    max_obstacles: int = DEFAULT_MAX_OBSTACLES
    arena_min: Vec3 = DEFAULT_ARENA_MIN
    arena_max: Vec3 = DEFAULT_ARENA_MAX
    size_range: tuple[float, float] = DEFAULT_SIZE_RANGE
    command_names: Optional[frozenset] = None

    def __post_init__(self):
        object.__setattr__(self, "arena_min", _as_vec3(self.arena_min))
        object.__setattr__(self, "arena_max", _as_vec3(self.arena_max))
        if self.command_names is not None:
            object.__setattr__(self, "command_names", frozenset(self.command_names))


def validate(test_case: TestCase, limits: CaseLimits) -> list[str]:
    """Check a test case against limits. Returns a list of violations; empty means valid."""
    problems: list[str] = []
    if not test_case.id:
        problems.append("empty test case id")
    body = test_case.body
    if isinstance(body, ScenarioBody):
        count = len(body.obstacles)
        if count < 1:
            problems.append("scenario has no obstacles")
        if count > limits.max_obstacles:
            problems.append(f"too many obstacles: {count} > {limits.max_obstacles}")
        for i, ob in enumerate(body.obstacles):
            if not _finite(*ob.center, *ob.size, ob.yaw_deg):
                problems.append(f"obstacle {i}: non-finite field")
                continue
            if any(s <= 0.0 for s in ob.size):
                problems.append(f"obstacle {i}: non-positive size")
            for axis, (c, lo, hi) in enumerate(zip(ob.center, limits.arena_min, limits.arena_max)):
                if not lo <= c <= hi:
                    problems.append(f"obstacle {i}: center out of bounds on axis {axis}")
            if not 0.0 <= ob.yaw_deg < 360.0:
                problems.append(f"obstacle {i}: yaw out of [0, 360)")
    elif isinstance(body, CommandBody):
        if not body.name:
            problems.append("empty command name")
        elif limits.command_names is not None and body.name not in limits.command_names:
            problems.append(f"unknown command {body.name!r}")
        if body.value is not None and not math.isfinite(body.value):
            problems.append("command value is not finite")
    else:
        problems.append(f"unsupported body type {type(body).__name__}")
    return problems


# ---------------------------------------------------------------------------
# JSON codecs for the wire formats.

def _obstacle_to_json(ob: Obstacle) -> dict:
    x, y, z = ob.center
    l, w, h = ob.size
    return {"x": x, "y": y, "z": z, "l": l, "w": w, "h": h, "rot": ob.yaw_deg}


def _obstacle_from_json(obj: Mapping) -> Obstacle:
    return Obstacle(
        center=(obj["x"], obj["y"], obj["z"]),
        size=(obj["l"], obj["w"], obj["h"]),
        yaw_deg=obj["rot"],
    )


def _body_to_json(body: Body) -> dict:
    if isinstance(body, ScenarioBody):
        return {"scenario": {"obstacles": [_obstacle_to_json(ob) for ob in body.obstacles]}}
    return {"command": {"name": body.name, "value": body.value}}


def case_to_json(case: TestCase) -> dict:
    obj: dict = {"id": case.id}
    obj.update(_body_to_json(case.body))
    if case.lineage is not None:
        obj["lineage"] = {"parent": case.lineage.parent_id, "op": case.lineage.op}
    return obj


def case_from_json(obj: Mapping) -> TestCase:
    if "scenario" in obj:
        body: Body = ScenarioBody(
            tuple(_obstacle_from_json(o) for o in obj["scenario"]["obstacles"])
        )
    elif "command" in obj:
        cmd = obj["command"]
        body = CommandBody(name=cmd["name"], value=cmd.get("value"))
    else:
        raise ValueError("test case object needs a 'scenario' or 'command' key")
    lineage = None
    if "lineage" in obj:
        lineage = Lineage(parent_id=obj["lineage"]["parent"], op=obj["lineage"]["op"])
    return TestCase(id=obj["id"], body=body, lineage=lineage)


def mission_to_json(mission: Mission) -> dict:
    return {"name": mission.name, "waypoints": [list(w) for w in mission.waypoints]}


def mission_from_json(obj: Mapping) -> Mission:
    return Mission(name=obj["name"], waypoints=tuple(tuple(w) for w in obj["waypoints"]))


def state_to_json(state: SystemState) -> dict:
    return {"narrative": state.narrative, "facts": dict(state.facts)}


def state_from_json(obj: Mapping) -> SystemState:
    return SystemState(narrative=obj["narrative"], facts=dict(obj.get("facts", {})))


def definition_to_json(definition: InterestingnessDefinition) -> dict:
    return {"tag": definition.tag, "policy_text": definition.policy_text}


def definition_from_json(obj: Mapping) -> InterestingnessDefinition:
    return InterestingnessDefinition(policy_text=obj["policy_text"], tag=obj["tag"])


def verdict_to_json(verdict: Verdict) -> dict:
    obj: dict = {"kind": verdict.kind.value}
    if verdict.min_distance is not None:
        obj["min_distance"] = verdict.min_distance
    if verdict.at_time is not None:
        obj["at_time"] = verdict.at_time
    if verdict.message is not None:
        obj["message"] = verdict.message
    return obj


def verdict_from_json(obj: Mapping) -> Verdict:
    return Verdict(
        kind=VerdictKind(obj["kind"]),
        min_distance=obj.get("min_distance"),
        at_time=obj.get("at_time"),
        message=obj.get("message"),
    )


# ---------------------------------------------------------------------------
# Identifiers and reproducible randomness.

class IdAllocator:
    """Monotone counter handing out unique case ids within one campaign."""

    def __init__(self, prefix: str = "case", start: int = 1):
        self._prefix = prefix
        self._next = start

    def next_id(self) -> str:
        value = f"{self._prefix}-{self._next:06d}"
        self._next += 1
        return value


def derive_rng(root_seed: int, label: str) -> random.Random:
    """Independent RNG sub-stream, keyed by a stable label off the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))
