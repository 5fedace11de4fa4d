"""Mutation operators over obstacle scenarios and autopilot commands.

Every call produces exactly the requested number of mutants, each valid
under the configured limits and distinct (by serialized body) from the
seed and from each other. Geometry tweaks are Gaussian with clamping;
command tweaks draw from a catalog of known parameters.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .core import (
    CaseLimits,
    CommandBody,
    IdAllocator,
    Lineage,
    Obstacle,
    SafliteError,
    ScenarioBody,
    TestCase,
    validate,
)
from .seeds import Seed


class MutationExhausted(SafliteError):
    """Could not produce enough distinct valid mutants within the attempt cap."""


DEFAULT_SIGMA_POS_M = 2.0
DEFAULT_SIGMA_SIZE_M = 1.0
DEFAULT_SIGMA_ROT_DEG = 30.0
DEFAULT_N_MUTANTS = 5
ATTEMPT_FACTOR = 10


class OpKind(str, Enum):
    ADD_OBSTACLE = "add_obstacle"
    REMOVE_OBSTACLE = "remove_obstacle"
    MOVE_OBSTACLE = "move_obstacle"
    RESIZE_OBSTACLE = "resize_obstacle"
    ROTATE_OBSTACLE = "rotate_obstacle"
    PICK_COMMAND = "pick_command"
    PERTURB_VALUE = "perturb_value"


SCENARIO_KINDS = frozenset({
    OpKind.ADD_OBSTACLE, OpKind.REMOVE_OBSTACLE, OpKind.MOVE_OBSTACLE,
    OpKind.RESIZE_OBSTACLE, OpKind.ROTATE_OBSTACLE,
})
COMMAND_KINDS = frozenset({OpKind.PICK_COMMAND, OpKind.PERTURB_VALUE})


@dataclass(frozen=True)
class MutationOp:
    kind: OpKind
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")


def scenario_ops(sigma_pos: float = DEFAULT_SIGMA_POS_M,
                 sigma_size: float = DEFAULT_SIGMA_SIZE_M,
                 sigma_rot: float = DEFAULT_SIGMA_ROT_DEG) -> list[MutationOp]:
    return [
        MutationOp(OpKind.ADD_OBSTACLE),
        MutationOp(OpKind.REMOVE_OBSTACLE),
        MutationOp(OpKind.MOVE_OBSTACLE, sigma=sigma_pos),
        MutationOp(OpKind.RESIZE_OBSTACLE, sigma=sigma_size),
        MutationOp(OpKind.ROTATE_OBSTACLE, sigma=sigma_rot),
    ]


def command_ops() -> list[MutationOp]:
    return [MutationOp(OpKind.PICK_COMMAND), MutationOp(OpKind.PERTURB_VALUE)]


@dataclass(frozen=True)
class CatalogEntry:
    description: str
    value_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.value_range is not None:
            lo, hi = (float(v) for v in self.value_range)
            if lo > hi:
                raise ValueError("value range is inverted")
            object.__setattr__(self, "value_range", (lo, hi))


@dataclass(frozen=True)
class CommandCatalog:
    """Known commands/parameters the command mutators may draw from."""

    entries: Mapping[str, CatalogEntry]

    def names(self) -> list[str]:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_json(cls, obj: Mapping) -> "CommandCatalog":
        entries = {}
        for name, spec in obj.items():
            rng = spec.get("range")
            entries[name] = CatalogEntry(
                description=spec.get("description", ""),
                value_range=tuple(rng) if rng else None,
            )
        return cls(entries=entries)

    @classmethod
    def load(cls, path) -> "CommandCatalog":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict:
        out = {}
        for name, entry in self.entries.items():
            spec: dict = {"description": entry.description}
            if entry.value_range is not None:
                spec["range"] = list(entry.value_range)
            out[name] = spec
        return out


def load_default_catalog() -> CommandCatalog:
    text = resources.files("saflite").joinpath("data/commands.json").read_text("utf-8")
    return CommandCatalog.from_json(json.loads(text))


def _gauss_clamped(rng: random.Random, value: float, sigma: float,
                   lo: float, hi: float) -> float:
    return min(max(value + rng.gauss(0.0, sigma), lo), hi)


def _apply_scenario_op(op: MutationOp, body: ScenarioBody, bounds: CaseLimits,
                       rng: random.Random) -> Optional[ScenarioBody]:
    obstacles = list(body.obstacles)
    if op.kind is OpKind.ADD_OBSTACLE:
        if len(obstacles) >= bounds.max_obstacles:
            return None
        l = rng.uniform(1.0, 4.0)
        w = rng.uniform(1.0, 4.0)
        h = rng.uniform(2.0, 8.0)
        x = rng.uniform(bounds.arena_min[0], bounds.arena_max[0])
        y = rng.uniform(bounds.arena_min[1], bounds.arena_max[1])
        yaw = rng.uniform(0.0, 360.0) % 360.0
        obstacles.append(Obstacle(center=(x, y, h / 2.0), size=(l, w, h), yaw_deg=yaw))
        return ScenarioBody(tuple(obstacles))
    if op.kind is OpKind.REMOVE_OBSTACLE:
        if len(obstacles) <= 1:
            return None
        del obstacles[rng.randrange(len(obstacles))]
        return ScenarioBody(tuple(obstacles))

    idx = rng.randrange(len(obstacles))
    ob = obstacles[idx]
    if op.kind is OpKind.MOVE_OBSTACLE:
        center = tuple(
            _gauss_clamped(rng, c, op.sigma, lo, hi)
            for c, lo, hi in zip(ob.center, bounds.arena_min, bounds.arena_max)
        )
        obstacles[idx] = Obstacle(center=center, size=ob.size, yaw_deg=ob.yaw_deg)
    elif op.kind is OpKind.RESIZE_OBSTACLE:
        lo, hi = bounds.size_range
        size = tuple(_gauss_clamped(rng, s, op.sigma, lo, hi) for s in ob.size)
        obstacles[idx] = Obstacle(center=ob.center, size=size, yaw_deg=ob.yaw_deg)
    elif op.kind is OpKind.ROTATE_OBSTACLE:
        yaw = (ob.yaw_deg + rng.gauss(0.0, op.sigma)) % 360.0
        obstacles[idx] = Obstacle(center=ob.center, size=ob.size, yaw_deg=yaw)
    else:
        return None
    return ScenarioBody(tuple(obstacles))


def _apply_command_op(op: MutationOp, body: CommandBody,
                      catalog: CommandCatalog,
                      rng: random.Random) -> Optional[CommandBody]:
    if op.kind is OpKind.PICK_COMMAND:
        name = rng.choice(catalog.names())
        entry = catalog.entries[name]
        value = None
        if entry.value_range is not None:
            value = rng.uniform(*entry.value_range)
        return CommandBody(name=name, value=value)
    if op.kind is OpKind.PERTURB_VALUE:
        entry = catalog.entries.get(body.name)
        if entry is None or entry.value_range is None:
            return None
        return CommandBody(name=body.name, value=rng.uniform(*entry.value_range))
    return None


def mutate(seed: Seed, ops: Sequence[MutationOp], n: int, bounds: CaseLimits,
           rng: random.Random, ids: Optional[IdAllocator] = None,
           catalog: Optional[CommandCatalog] = None) -> list[TestCase]:
    """Produce exactly n distinct valid mutants of the seed's case.

    Inapplicable draws (removing the last obstacle, adding past the cap,
    perturbing a command with no value range) are redrawn; the whole call
    gives up with MutationExhausted after 10*n attempts.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    body = seed.case.body
    if isinstance(body, ScenarioBody):
        usable = [op for op in ops if op.kind in SCENARIO_KINDS]
    else:
        usable = [op for op in ops if op.kind in COMMAND_KINDS]
        if usable and catalog is None:
            raise ValueError("command mutation needs a catalog")
    if not usable:
        raise ValueError("no mutation op is compatible with the seed body")

    ids = ids or IdAllocator(prefix=f"{seed.case.id}-m")
    seen = {seed.case.body_key()}
    mutants: list[TestCase] = []
    attempts = 0
    while len(mutants) < n:
        attempts += 1
        if attempts > ATTEMPT_FACTOR * n:
            raise MutationExhausted(
                f"only {len(mutants)} of {n} distinct mutants after {attempts - 1} attempts"
            )
        op = rng.choice(usable)
        if isinstance(body, ScenarioBody):
            new_body = _apply_scenario_op(op, body, bounds, rng)
        else:
            new_body = _apply_command_op(op, body, catalog, rng)
        if new_body is None:
            continue
        candidate = TestCase(
            id=ids.next_id(),
            body=new_body,
            lineage=Lineage(parent_id=seed.case.id, op=op.kind.value),
        )
        if validate(candidate, bounds):
            continue
        key = candidate.body_key()
        if key in seen:
            continue
        seen.add(key)
        mutants.append(candidate)
    return mutants
