import random

import pytest

from saflite.core import (
    CaseLimits,
    CommandBody,
    Lineage,
    Obstacle,
    ScenarioBody,
    TestCase,
    Verdict,
)
from saflite.seeds import (
    InitError,
    Seed,
    SeedPool,
    SelectionStrategy,
    UpdatePolicy,
)


def command_case(i, value=1500.0):
    return TestCase(f"case-{i:06d}", CommandBody("RC3", value))


def child_of(parent_id, i, value):
    return TestCase(f"case-{i:06d}", CommandBody("RC3", value),
                    lineage=Lineage(parent_id=parent_id, op="perturb_value"))


def make_pool(n=3, capacity=8):
    return SeedPool.init([command_case(i) for i in range(1, n + 1)], capacity=capacity)


# --- construction ------------------------------------------------------------

def test_init_gives_every_seed_unit_energy():
    pool = make_pool(3)
    assert len(pool) == 3
    assert all(s.energy == 1.0 for s in pool.seeds)
    assert all(s.times_selected == 0 for s in pool.seeds)
    assert all(s.best_child_score is None for s in pool.seeds)


def test_init_rejects_bad_pools():
    with pytest.raises(InitError):
        SeedPool.init([], capacity=4)
    with pytest.raises(InitError):
        SeedPool.init([command_case(i) for i in range(5)], capacity=4)
    with pytest.raises(InitError):
        SeedPool.init([command_case(1), command_case(1)], capacity=4)


def test_init_validates_against_limits_when_given():
    out_of_bounds = TestCase("bad", ScenarioBody(
        (Obstacle((99.0, 0.0, 1.0), (1.0, 1.0, 2.0)),)))
    with pytest.raises(InitError, match="bad"):
        SeedPool.init([out_of_bounds], capacity=4, limits=CaseLimits())
    SeedPool.init([out_of_bounds], capacity=4)


# --- selection strategies -------------------------------------------------------

def test_round_robin_cycles_in_order():
    pool = make_pool(3)
    rng = random.Random(0)
    picked = [pool.select(SelectionStrategy.ROUND_ROBIN, rng).case.id
              for _ in range(7)]
    assert picked == ["case-000001", "case-000002", "case-000003",
                      "case-000001", "case-000002", "case-000003", "case-000001"]
    assert pool.seeds[0].times_selected == 3


def test_singleton_pool_always_returns_its_seed():
    pool = make_pool(1)
    for strategy in SelectionStrategy:
        assert pool.select(strategy, random.Random(1)).case.id == "case-000001"


def test_uniform_selection_is_seeded_and_covers_the_pool():
    pool = make_pool(4)
    seen = {pool.select(SelectionStrategy.UNIFORM, random.Random(3)).case.id
            for _ in range(1)}
    rng = random.Random(42)
    seen = {pool.select(SelectionStrategy.UNIFORM, rng).case.id for _ in range(60)}
    assert seen == {f"case-{i:06d}" for i in range(1, 5)}
    again = random.Random(42)
    pool2 = make_pool(4)
    first = pool2.select(SelectionStrategy.UNIFORM, again).case.id
    assert first == pool.select(SelectionStrategy.UNIFORM, random.Random(42)).case.id


def test_energy_weights_drive_selection_frequency():
    pool = make_pool(2)
    pool.seeds[0].energy = 3.0
    pool.seeds[1].energy = 1.0
    rng = random.Random(5)
    draws = 10000
    hits = sum(
        pool.select(SelectionStrategy.ENERGY, rng).case.id == "case-000001"
        for _ in range(draws))
    assert hits / draws == pytest.approx(0.75, abs=0.02)


def test_energy_selection_survives_a_drained_pool():
    pool = make_pool(2)
    for seed in pool.seeds:
        seed.energy = 0.0
    rng = random.Random(9)
    seen = {pool.select(SelectionStrategy.ENERGY, rng).case.id for _ in range(40)}
    assert seen == {"case-000001", "case-000002"}


# --- replace-parent updates -------------------------------------------------------

def test_replace_parent_ratchets_on_better_or_equal_scores():
    pool = make_pool(2)
    pool.update(child_of("case-000001", 10, 1600.0), score=6,
                verdict=Verdict.passed(), policy=UpdatePolicy.REPLACE_PARENT)
    assert pool.seeds[0].case.id == "case-000010"
    assert pool.seeds[0].best_child_score == 6

    # An equal score still moves the pool forward; the parent is now the
    # previous child, so lineage points at the current occupant.
    pool.update(child_of("case-000010", 11, 1700.0), score=6,
                verdict=Verdict.passed(), policy=UpdatePolicy.REPLACE_PARENT)
    assert pool.seeds[0].case.id == "case-000011"

    # A weaker child does not.
    pool.update(child_of("case-000011", 12, 1800.0), score=5,
                verdict=Verdict.passed(), policy=UpdatePolicy.REPLACE_PARENT)
    assert pool.seeds[0].case.id == "case-000011"
    assert len(pool) == 2


def test_replace_parent_finds_the_parent_by_lineage():
    pool = make_pool(2)
    pool.update(child_of("case-000002", 10, 1600.0), score=9,
                verdict=Verdict.passed(), policy=UpdatePolicy.REPLACE_PARENT)
    assert pool.seeds[0].case.id == "case-000001"
    assert pool.seeds[1].case.id == "case-000010"


def test_replace_parent_ignores_orphans_and_unknown_parents():
    pool = make_pool(1)
    pool.update(command_case(10), score=9, verdict=Verdict.passed(),
                policy=UpdatePolicy.REPLACE_PARENT)
    pool.update(child_of("case-999999", 11, 1600.0), score=9,
                verdict=Verdict.passed(), policy=UpdatePolicy.REPLACE_PARENT)
    assert pool.seeds[0].case.id == "case-000001"


def test_violations_and_unscored_cases_never_enter_the_pool():
    for policy in UpdatePolicy:
        pool = make_pool(1)
        snapshot = [s.case.id for s in pool.seeds]
        pool.update(child_of("case-000001", 10, 1600.0), score=10,
                    verdict=Verdict.collision(-0.1, 2.0), policy=policy)
        pool.update(child_of("case-000001", 11, 1700.0), score=10,
                    verdict=Verdict.min_separation(1.2, 2.0), policy=policy)
        pool.update(child_of("case-000001", 12, 1800.0), score=10,
                    verdict=Verdict.exec_error("boom"), policy=policy)
        pool.update(child_of("case-000001", 13, 1900.0), score=None,
                    verdict=Verdict.passed(), policy=policy)
        assert [s.case.id for s in pool.seeds] == snapshot


# --- add-if-interesting updates ------------------------------------------------------

def test_add_if_interesting_requires_the_top_band():
    pool = make_pool(1, capacity=4)
    pool.update(child_of("case-000001", 10, 1600.0), score=7,
                verdict=Verdict.passed(), policy=UpdatePolicy.ADD_IF_INTERESTING)
    assert len(pool) == 1
    pool.update(child_of("case-000001", 11, 1700.0), score=8,
                verdict=Verdict.passed(), policy=UpdatePolicy.ADD_IF_INTERESTING)
    assert len(pool) == 2
    assert pool.seeds[1].case.id == "case-000011"
    assert pool.seeds[1].energy == 1.0


def test_add_if_interesting_evicts_the_lowest_energy_seed():
    pool = make_pool(3, capacity=3)
    pool.seeds[0].energy = 0.5
    pool.seeds[1].energy = 0.2
    pool.seeds[2].energy = 0.9
    pool.update(child_of("case-000001", 10, 1600.0), score=10,
                verdict=Verdict.passed(), policy=UpdatePolicy.ADD_IF_INTERESTING)
    ids = [s.case.id for s in pool.seeds]
    assert ids == ["case-000001", "case-000003", "case-000010"]


def test_add_if_interesting_breaks_energy_ties_at_the_front():
    pool = make_pool(2, capacity=2)
    pool.update(child_of("case-000001", 10, 1600.0), score=9,
                verdict=Verdict.passed(), policy=UpdatePolicy.ADD_IF_INTERESTING)
    assert [s.case.id for s in pool.seeds] == ["case-000002", "case-000010"]


# --- snapshots --------------------------------------------------------------------

def test_snapshot_reports_the_pool_shape():
    pool = make_pool(2, capacity=5)
    pool.select(SelectionStrategy.ROUND_ROBIN, random.Random(0))
    snap = pool.snapshot()
    assert snap["size"] == 2
    assert snap["capacity"] == 5
    assert snap["seeds"][0] == {"case_id": "case-000001", "energy": 1.0,
                                "times_selected": 1, "best_child_score": None}


def test_seed_to_json_shape():
    seed = Seed(case=command_case(4), energy=0.25, times_selected=3, best_child_score=7)
    assert seed.to_json() == {"case_id": "case-000004", "energy": 0.25,
                              "times_selected": 3, "best_child_score": 7}
