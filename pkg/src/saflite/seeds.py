"""Seed pool: what the fuzzer mutates next and how feedback reshapes the pool."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .core import (
    CaseLimits,
    Category,
    SafliteError,
    TestCase,
    Verdict,
    VerdictKind,
    validate,
)
from .oracle import categorize


class InitError(SafliteError):
    """The initial pool could not be built."""


DEFAULT_CAPACITY = 16
DEFAULT_ENERGY = 1.0


class SelectionStrategy(str, Enum):
    ROUND_ROBIN = "roundrobin"
    UNIFORM = "uniform"
    ENERGY = "energy"


class UpdatePolicy(str, Enum):
    REPLACE_PARENT = "replace-parent"
    ADD_IF_INTERESTING = "add-if-interesting"


@dataclass
class Seed:
    case: TestCase
    energy: float = DEFAULT_ENERGY
    times_selected: int = 0
    best_child_score: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "case_id": self.case.id,
            "energy": self.energy,
            "times_selected": self.times_selected,
            "best_child_score": self.best_child_score,
        }


class SeedPool:
    """Bounded, never-empty collection of seeds with pluggable scheduling."""

    def __init__(self, seeds: list[Seed], capacity: int):
        self.seeds = seeds
        self.capacity = capacity
        self._rr_cursor = 0

    @classmethod
    def init(cls, initial_inputs: Sequence[TestCase],
             capacity: int = DEFAULT_CAPACITY,
             limits: Optional[CaseLimits] = None) -> "SeedPool":
        """Build the starting pool; every seed begins with unit energy."""
        if not initial_inputs:
            raise InitError("initial pool must not be empty")
        if len(initial_inputs) > capacity:
            raise InitError(
                f"{len(initial_inputs)} initial inputs exceed capacity {capacity}"
            )
        ids = [case.id for case in initial_inputs]
        if len(set(ids)) != len(ids):
            raise InitError("duplicate test case ids in initial inputs")
        if limits is not None:
            for case in initial_inputs:
                problems = validate(case, limits)
                if problems:
                    raise InitError(f"invalid initial case {case.id}: {problems}")
        return cls([Seed(case=case) for case in initial_inputs], capacity)

    def __len__(self) -> int:
        return len(self.seeds)

    def select(self, strategy: SelectionStrategy, rng: random.Random) -> Seed:
        """Pick the next seed to mutate. Deterministic given pool state and stream."""
        if strategy is SelectionStrategy.ROUND_ROBIN:
            seed = self.seeds[self._rr_cursor % len(self.seeds)]
            self._rr_cursor += 1
        elif strategy is SelectionStrategy.UNIFORM:
            seed = self.seeds[rng.randrange(len(self.seeds))]
        elif strategy is SelectionStrategy.ENERGY:
            weights = [max(s.energy, 0.0) for s in self.seeds]
            if sum(weights) <= 0.0:
                seed = self.seeds[rng.randrange(len(self.seeds))]
            else:
                seed = rng.choices(self.seeds, weights=weights, k=1)[0]
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        seed.times_selected += 1
        return seed

    def update(self, executed: TestCase, score: Optional[int],
               verdict: Optional[Verdict], policy: UpdatePolicy) -> "SeedPool":
        """Fold one executed case back into the pool.

        Violating and errored cases never enter the pool; they belong to the
        report. Unscored cases (oracle fell back that round) carry no ranking
        evidence, so they leave the pool untouched as well.
        """
        if verdict is not None and verdict.kind is not VerdictKind.PASS:
            return self
        if score is None:
            return self
        if policy is UpdatePolicy.REPLACE_PARENT:
            if executed.lineage is None:
                return self
            parent = self._find(executed.lineage.parent_id)
            if parent is None:
                return self
            if parent.best_child_score is None or score >= parent.best_child_score:
                parent.case = executed
                parent.best_child_score = score
        elif policy is UpdatePolicy.ADD_IF_INTERESTING:
            if categorize(score) is not Category.INTERESTING:
                return self
            if len(self.seeds) >= self.capacity:
                self._evict_weakest()
            self.seeds.append(Seed(case=executed))
        else:
            raise ValueError(f"unknown update policy {policy!r}")
        return self

    def _find(self, case_id: str) -> Optional[Seed]:
        for seed in self.seeds:
            if seed.case.id == case_id:
                return seed
        return None

    def _evict_weakest(self) -> None:
        weakest = min(range(len(self.seeds)), key=lambda i: self.seeds[i].energy)
        del self.seeds[weakest]

    def snapshot(self) -> dict:
        return {
            "size": len(self.seeds),
            "capacity": self.capacity,
            "seeds": [s.to_json() for s in self.seeds],
        }
