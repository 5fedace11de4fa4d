"""Evaluation metrics: classification quality, guidance uplift, campaign deltas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[bool, bool]]) -> "ConfusionMatrix":
        """Build from (predicted, actual) boolean pairs; True is the positive class."""
        tp = fp = fn = tn = 0
        for predicted, actual in pairs:
            if predicted and actual:
                tp += 1
            elif predicted and not actual:
                fp += 1
            elif not predicted and actual:
                fn += 1
            else:
                tn += 1
        return cls(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class ClassificationMetrics:
    """Rates derived from a confusion matrix; None marks an undefined rate."""

    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]


def classification_metrics(cm: ConfusionMatrix) -> ClassificationMetrics:
    """Accuracy, precision, recall and F1. Degenerate denominators stay undefined
    rather than being silently zeroed."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) > 0 else None
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else None
    f1 = None
    if precision is not None and recall is not None and (precision + recall) > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassificationMetrics(accuracy=accuracy, precision=precision,
                                 recall=recall, f1=f1)


def _fmt(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value:.3f}"


def format_metrics_table(cm: ConfusionMatrix, m: ClassificationMetrics) -> str:
    rows = [
        ("tp", str(cm.tp)), ("fp", str(cm.fp)),
        ("fn", str(cm.fn)), ("tn", str(cm.tn)),
        ("accuracy", _fmt(m.accuracy)),
        ("precision", _fmt(m.precision)),
        ("recall", _fmt(m.recall)),
        ("f1", _fmt(m.f1)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


@dataclass(frozen=True)
class UpliftResult:
    """How much a guided selection narrows the execution pool, assuming the
    bug-triggering case is selected uniformly from the kept pool."""

    pool_fraction: float
    selection_ratio: float
    pool_reduction: float
    model: str = "uniform"


def uplift(total_mutants: int, selected_pool_size: int,
           bug_case_in_pool: bool = True) -> Optional[UpliftResult]:
    """Uplift of guidance over exhaustive execution under the uniform model.

    Returns None (not applicable) when guidance excluded the bug-triggering
    case from the kept pool; a ratio would be meaningless there.
    """
    if total_mutants < 1 or selected_pool_size < 1:
        raise ValueError("pool sizes must be positive")
    if selected_pool_size > total_mutants:
        raise ValueError("selected pool cannot exceed the total pool")
    if not bug_case_in_pool:
        return None
    fraction = selected_pool_size / total_mutants
    return UpliftResult(
        pool_fraction=fraction,
        selection_ratio=total_mutants / selected_pool_size,
        pool_reduction=1.0 - fraction,
    )


# ---------------------------------------------------------------------------
# Campaign-to-campaign comparison.

Report = Mapping


def _as_reports(value: Union[Report, Sequence[Report]]) -> list[Report]:
    if isinstance(value, Mapping):
        return [value]
    return list(value)


@dataclass(frozen=True)
class ComparisonRow:
    mission: str
    a_valid: Optional[int]
    b_valid: Optional[int]
    delta: Optional[int]
    a_first_violation: Optional[int]
    b_first_violation: Optional[int]

    @property
    def comparable(self) -> bool:
        return self.delta is not None


@dataclass(frozen=True)
class CampaignComparison:
    rows: tuple[ComparisonRow, ...]
    wins: int
    losses: int
    ties: int


def compare_campaigns(a: Union[Report, Sequence[Report]],
                      b: Union[Report, Sequence[Report]]) -> CampaignComparison:
    """Per-mission unique-valid-case deltas (a minus b) and first-violation times.

    Missions present on only one side become incomparable rows and are left
    out of the win/loss/tie tally.
    """
    a_by_mission = {r.get("mission") or "-": r for r in _as_reports(a)}
    b_by_mission = {r.get("mission") or "-": r for r in _as_reports(b)}
    rows = []
    wins = losses = ties = 0
    for mission in list(a_by_mission) + [m for m in b_by_mission if m not in a_by_mission]:
        ra = a_by_mission.get(mission)
        rb = b_by_mission.get(mission)
        a_valid = ra.get("unique_valid_cases") if ra else None
        b_valid = rb.get("unique_valid_cases") if rb else None
        delta = a_valid - b_valid if ra and rb else None
        if delta is not None:
            if delta > 0:
                wins += 1
            elif delta < 0:
                losses += 1
            else:
                ties += 1
        rows.append(ComparisonRow(
            mission=mission,
            a_valid=a_valid,
            b_valid=b_valid,
            delta=delta,
            a_first_violation=ra.get("iterations_to_first_violation") if ra else None,
            b_first_violation=rb.get("iterations_to_first_violation") if rb else None,
        ))
    return CampaignComparison(rows=tuple(rows), wins=wins, losses=losses, ties=ties)


def format_comparison_table(cmp: CampaignComparison) -> str:
    header = ("mission", "a_valid", "b_valid", "delta", "a_first", "b_first")
    body = []
    for row in cmp.rows:
        body.append((
            row.mission,
            "-" if row.a_valid is None else str(row.a_valid),
            "-" if row.b_valid is None else str(row.b_valid),
            "incomparable" if row.delta is None else f"{row.delta:+d}",
            "-" if row.a_first_violation is None else str(row.a_first_violation),
            "-" if row.b_first_violation is None else str(row.b_first_violation),
        ))
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    lines.append(f"wins {cmp.wins}  losses {cmp.losses}  ties {cmp.ties}")
    return "\n".join(lines)


def comparison_to_csv(cmp: CampaignComparison, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mission", "a_valid", "b_valid", "delta",
                         "a_first_violation", "b_first_violation"])
        for row in cmp.rows:
            writer.writerow([row.mission, row.a_valid, row.b_valid, row.delta,
                             row.a_first_violation, row.b_first_violation])
