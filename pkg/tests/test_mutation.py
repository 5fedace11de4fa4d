import random

import pytest

from saflite.core import (
    CaseLimits,
    CommandBody,
    IdAllocator,
    Obstacle,
    ScenarioBody,
    TestCase,
    validate,
)
from saflite.mutation import (
    CatalogEntry,
    CommandCatalog,
    MutationExhausted,
    MutationOp,
    OpKind,
    command_ops,
    load_default_catalog,
    mutate,
    scenario_ops,
)
from saflite.seeds import Seed

BOUNDS = CaseLimits()


def scenario_seed(n_obstacles=2):
    obstacles = tuple(
        Obstacle(center=(4.0 * i, -3.0, 1.5), size=(2.0, 2.0, 3.0), yaw_deg=10.0 * i)
        for i in range(n_obstacles))
    return Seed(case=TestCase("case-000001", ScenarioBody(obstacles)))


def command_seed(name="RC3", value=1500.0):
    return Seed(case=TestCase("case-000001", CommandBody(name, value)))


# --- the command catalog ------------------------------------------------------

def test_default_catalog_contents():
    catalog = load_default_catalog()
    names = set(catalog.names())
    assert names == {"MAV_CMD_DO_PARACHUTE", "RC3", "ATC_RAT_RLL_FF",
                     "COM_POS_FS_DELAY", "Flight_Mode"}
    for entry in catalog.entries.values():
        assert entry.description
        if entry.value_range is not None:
            lo, hi = entry.value_range
            assert lo <= hi


def test_catalog_json_round_trip():
    catalog = load_default_catalog()
    again = CommandCatalog.from_json(catalog.to_json())
    assert again == catalog
    assert len(again) == len(catalog)


def test_catalog_rejects_inverted_ranges():
    with pytest.raises(ValueError):
        CatalogEntry(description="x", value_range=(5.0, 1.0))


# --- scenario mutation -----------------------------------------------------------

def test_mutants_are_distinct_valid_and_trace_their_parent():
    seed = scenario_seed()
    mutants = mutate(seed, scenario_ops(), 5, BOUNDS, random.Random(42))
    assert len(mutants) == 5
    keys = {m.body_key() for m in mutants}
    assert len(keys) == 5
    assert seed.case.body_key() not in keys
    for m in mutants:
        assert validate(m, BOUNDS) == []
        assert m.lineage.parent_id == "case-000001"
        assert m.lineage.op in {k.value for k in OpKind}
    assert [m.id for m in mutants] == [
        f"case-000001-m-{i:06d}" for i in range(1, 6)]


def test_mutation_is_reproducible():
    a = mutate(scenario_seed(), scenario_ops(), 5, BOUNDS, random.Random(7))
    b = mutate(scenario_seed(), scenario_ops(), 5, BOUNDS, random.Random(7))
    assert a == b
    c = mutate(scenario_seed(), scenario_ops(), 5, BOUNDS, random.Random(8))
    assert a != c


def test_geometry_stays_inside_the_configured_bounds():
    seed = scenario_seed()
    rng = random.Random(0)
    produced = 0
    for _ in range(200):
        for m in mutate(seed, scenario_ops(), 5, BOUNDS, rng):
            for ob in m.body.obstacles:
                produced += 1
                for c, lo, hi in zip(ob.center, BOUNDS.arena_min, BOUNDS.arena_max):
                    assert lo <= c <= hi
                assert all(BOUNDS.size_range[0] <= s <= BOUNDS.size_range[1]
                           for s in ob.size)
                assert 0.0 <= ob.yaw_deg < 360.0
    assert produced >= 1000


def test_obstacle_count_respects_the_cap():
    tight = CaseLimits(max_obstacles=2)
    seed = scenario_seed(2)
    rng = random.Random(3)
    for _ in range(50):
        for m in mutate(seed, scenario_ops(), 5, tight, rng):
            count = len(m.body.obstacles)
            assert 1 <= count <= 2


def test_add_only_ops_exhaust_at_the_obstacle_cap():
    tight = CaseLimits(max_obstacles=1)
    with pytest.raises(MutationExhausted):
        mutate(scenario_seed(1), [MutationOp(OpKind.ADD_OBSTACLE)], 2, tight,
               random.Random(0))


def test_remove_only_ops_exhaust_on_a_single_obstacle():
    with pytest.raises(MutationExhausted):
        mutate(scenario_seed(1), [MutationOp(OpKind.REMOVE_OBSTACLE)], 2, BOUNDS,
               random.Random(0))


def test_incompatible_ops_are_rejected_up_front():
    with pytest.raises(ValueError):
        mutate(scenario_seed(), command_ops(), 3, BOUNDS, random.Random(0))
    with pytest.raises(ValueError):
        mutate(command_seed(), scenario_ops(), 3, BOUNDS, random.Random(0))


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        mutate(scenario_seed(), scenario_ops(), 0, BOUNDS, random.Random(0))


def test_explicit_id_allocator_wins():
    ids = IdAllocator(prefix="fuzz", start=90)
    mutants = mutate(scenario_seed(), scenario_ops(), 2, BOUNDS, random.Random(1),
                     ids=ids)
    assert [m.id for m in mutants] == ["fuzz-000090", "fuzz-000091"]


# --- command mutation ---------------------------------------------------------------

def test_command_mutants_stay_inside_catalog_ranges():
    catalog = load_default_catalog()
    bounds = CaseLimits(command_names=frozenset(catalog.names()))
    mutants = mutate(command_seed(), command_ops(), 4, bounds, random.Random(11),
                     catalog=catalog)
    assert len(mutants) == 4
    assert len({m.body_key() for m in mutants}) == 4
    for m in mutants:
        assert m.body.name in catalog.entries
        entry = catalog.entries[m.body.name]
        if entry.value_range is not None:
            lo, hi = entry.value_range
            assert lo <= m.body.value <= hi
        assert m.lineage.op in ("pick_command", "perturb_value")


def test_command_mutation_requires_a_catalog():
    with pytest.raises(ValueError, match="catalog"):
        mutate(command_seed(), command_ops(), 2, BOUNDS, random.Random(0))


def test_perturb_without_a_range_exhausts():
    catalog = CommandCatalog.from_json({"TOGGLE": {"description": "a bare switch"}})
    seed = command_seed("TOGGLE", None)
    with pytest.raises(MutationExhausted):
        mutate(seed, [MutationOp(OpKind.PERTURB_VALUE)], 1,
               CaseLimits(command_names=frozenset({"TOGGLE"})),
               random.Random(0), catalog=catalog)


def test_sigma_must_be_positive():
    with pytest.raises(ValueError):
        MutationOp(OpKind.MOVE_OBSTACLE, sigma=0.0)
