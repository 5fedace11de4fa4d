import csv

import pytest
from hypothesis import given, settings, strategies as st

from saflite.metrics import (
    ConfusionMatrix,
    classification_metrics,
    compare_campaigns,
    comparison_to_csv,
    format_comparison_table,
    format_metrics_table,
    uplift,
)


# --- classification quality -----------------------------------------------------

def test_from_pairs_counts_each_cell():
    pairs = [
        (True, True), (True, True),      # hits
        (True, False),                   # false alarm
        (False, True),                   # miss
        (False, False), (False, False),  # correct rejections
    ]
    cm = ConfusionMatrix.from_pairs(pairs)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (2, 1, 1, 2)
    assert cm.total == 6


def test_counts_must_be_non_negative():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


def test_hand_computed_metrics():
    m = classification_metrics(ConfusionMatrix(tp=2, fp=1, fn=1, tn=2))
    third = 2.0 / 3.0
    assert m.accuracy == pytest.approx(third, abs=1e-9)
    assert m.precision == pytest.approx(third, abs=1e-9)
    assert m.recall == pytest.approx(third, abs=1e-9)
    assert m.f1 == pytest.approx(third, abs=1e-9)


def test_degenerate_denominators_stay_undefined():
    no_positives = classification_metrics(ConfusionMatrix(tn=5))
    assert no_positives.accuracy == 1.0
    assert no_positives.precision is None
    assert no_positives.recall is None
    assert no_positives.f1 is None

    all_false_alarms = classification_metrics(ConfusionMatrix(fp=5))
    assert all_false_alarms.precision == 0.0
    assert all_false_alarms.recall is None
    assert all_false_alarms.f1 is None

    nothing_found = classification_metrics(ConfusionMatrix(fp=2, fn=3))
    assert nothing_found.precision == 0.0
    assert nothing_found.recall == 0.0
    assert nothing_found.f1 is None


def test_empty_matrix_is_an_error():
    with pytest.raises(ValueError):
        classification_metrics(ConfusionMatrix())


def test_metrics_table_renders_undefined_rates():
    cm = ConfusionMatrix(tp=2, fp=1, fn=1, tn=2)
    table = format_metrics_table(cm, classification_metrics(cm))
    assert "0.667" in table
    assert "tp" in table and "tn" in table

    sparse = ConfusionMatrix(tn=4)
    table = format_metrics_table(sparse, classification_metrics(sparse))
    assert "undefined" in table


matrices = st.builds(
    ConfusionMatrix,
    tp=st.integers(0, 50), fp=st.integers(0, 50),
    fn=st.integers(0, 50), tn=st.integers(0, 50),
).filter(lambda cm: cm.total > 0)


@settings(max_examples=100, deadline=None)
@given(cm=matrices)
def test_f1_is_the_harmonic_mean_when_defined(cm):
    m = classification_metrics(cm)
    assert 0.0 <= m.accuracy <= 1.0
    if m.f1 is not None:
        assert m.f1 == pytest.approx(
            2 * m.precision * m.recall / (m.precision + m.recall))
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


# --- selection uplift --------------------------------------------------------------

def test_uplift_for_a_large_pool():
    result = uplift(1000, 49)
    assert result.selection_ratio == pytest.approx(20.41, abs=0.01)
    assert result.pool_reduction == pytest.approx(0.951, abs=1e-3)
    assert result.pool_fraction == pytest.approx(0.049)
    assert result.model == "uniform"


def test_uplift_not_applicable_when_the_bug_is_filtered_out():
    assert uplift(100, 10, bug_case_in_pool=False) is None


def test_uplift_rejects_impossible_pools():
    with pytest.raises(ValueError):
        uplift(10, 11)
    with pytest.raises(ValueError):
        uplift(0, 0)


@settings(max_examples=100, deadline=None)
@given(total=st.integers(1, 10000), data=st.data())
def test_uplift_identities(total, data):
    selected = data.draw(st.integers(1, total))
    result = uplift(total, selected)
    assert result.selection_ratio * result.pool_fraction == pytest.approx(1.0)
    assert result.pool_reduction == pytest.approx(1.0 - result.pool_fraction)
    assert result.selection_ratio >= 1.0


# --- campaign comparison -------------------------------------------------------------

REPORT_A = [
    {"mission": "alpha", "unique_valid_cases": 5, "iterations_to_first_violation": 3},
    {"mission": "beta", "unique_valid_cases": 2, "iterations_to_first_violation": None},
    {"mission": "delta", "unique_valid_cases": 4, "iterations_to_first_violation": 9},
]
REPORT_B = [
    {"mission": "alpha", "unique_valid_cases": 3, "iterations_to_first_violation": 17},
    {"mission": "delta", "unique_valid_cases": 4, "iterations_to_first_violation": 2},
    {"mission": "gamma", "unique_valid_cases": 1, "iterations_to_first_violation": 1},
]


def test_compare_campaigns_by_mission():
    cmp = compare_campaigns(REPORT_A, REPORT_B)
    by_mission = {row.mission: row for row in cmp.rows}
    assert by_mission["alpha"].delta == 2
    assert by_mission["delta"].delta == 0
    assert not by_mission["beta"].comparable
    assert not by_mission["gamma"].comparable
    assert (cmp.wins, cmp.losses, cmp.ties) == (1, 0, 1)
    assert by_mission["alpha"].a_first_violation == 3
    assert by_mission["alpha"].b_first_violation == 17


def test_compare_accepts_single_reports_and_missing_names():
    cmp = compare_campaigns({"unique_valid_cases": 7},
                            {"unique_valid_cases": 9})
    assert len(cmp.rows) == 1
    assert cmp.rows[0].mission == "-"
    assert cmp.rows[0].delta == -2
    assert cmp.losses == 1


def test_comparison_table_and_csv(tmp_path):
    cmp = compare_campaigns(REPORT_A, REPORT_B)
    table = format_comparison_table(cmp)
    assert "incomparable" in table
    assert "+2" in table
    assert "wins 1  losses 0  ties 1" in table

    out = tmp_path / "cmp.csv"
    comparison_to_csv(cmp, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["mission", "a_valid", "b_valid", "delta",
                       "a_first_violation", "b_first_violation"]
    assert len(rows) == 1 + len(cmp.rows)
