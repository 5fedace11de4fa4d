"""Campaign orchestration: the select-mutate-score-execute loop plus reporting.

One campaign runs a single mission (or scripted command context) under an
iteration or wall-clock budget. All randomness flows from one root seed
through labelled sub-streams, so mock-oracle campaigns replay bit for bit.
A paired experiment runs a guided arm and an unguided baseline arm from
identical seeds and budgets for an apples-to-apples comparison.
"""

from __future__ import annotations

import dataclasses
import json
import re
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import sut
from .core import (
    CaseLimits,
    Category,
    CommandBody,
    ConfigError,
    IdAllocator,
    InterestingnessDefinition,
    Mission,
    Obstacle,
    ScenarioBody,
    TestCase,
    case_from_json,
    case_to_json,
    definition_from_json,
    definition_to_json,
    derive_rng,
    mission_from_json,
    mission_to_json,
    validate,
    verdict_to_json,
)
from .llm import LlmConfig, MockLlmClient, MockOracleConfig, MockMode, WireLlmClient
from .mutation import (
    CommandCatalog,
    MutationExhausted,
    command_ops,
    load_default_catalog,
    mutate,
    scenario_ops,
)
from .oracle import (
    AuditLog,
    OracleUnavailable,
    ParseFailed,
    ParseStatus,
    ScoredMutant,
    SelectPolicy,
    categorize,
    score_batch,
    select,
)
from .seeds import SeedPool, SelectionStrategy, UpdatePolicy

TOOL_VERSION = "0.1.0"

DEFAULT_BUDGET_ITERATIONS = 150
AUDIT_FILENAME = "oracle_audit.jsonl"

_HISTOGRAM_KEYS = {
    Category.NON_INTERESTING: "non_interesting",
    Category.MID_INTERESTING: "mid_interesting",
    Category.INTERESTING: "interesting",
}


@dataclass
class CampaignConfig:
    """Everything needed to reproduce one fuzzing campaign."""

    definition: InterestingnessDefinition
    mission: Optional[Mission] = None
    command_script: Optional[sut.ScriptedOutcome] = None
    catalog: Optional[CommandCatalog] = None
    budget_iterations: Optional[int] = DEFAULT_BUDGET_ITERATIONS
    budget_seconds: Optional[float] = None
    n_mutants: int = 5
    seed_strategy: SelectionStrategy = SelectionStrategy.UNIFORM
    select_policy: SelectPolicy = field(default_factory=SelectPolicy)
    update_policy: UpdatePolicy = UpdatePolicy.REPLACE_PARENT
    llm_kind: str = "mock"
    mock: MockOracleConfig = field(default_factory=MockOracleConfig)
    llm: Optional[LlmConfig] = None
    stop_on_first_violation: bool = False
    rng_seed: int = 1
    limits: CaseLimits = field(default_factory=CaseLimits)
    sim: sut.SimParams = field(default_factory=sut.SimParams)
    safety: sut.SafetyPolicy = field(default_factory=sut.SafetyPolicy)
    pool_capacity: int = 16
    initial_seed_count: int = 1
    seeds: Optional[list[TestCase]] = None
    sigma_pos: float = 2.0
    sigma_size: float = 1.0
    sigma_rot: float = 30.0
    cache_scores: bool = False
    oracle_enabled: bool = True
    baseline_take: Optional[int] = None
    matched_selection_sizes: Optional[list[int]] = None

    @property
    def mode(self) -> str:
        return "scenario" if self.mission is not None else "command"

    def check(self) -> None:
        budgets = [b for b in (self.budget_iterations, self.budget_seconds) if b is not None]
        if len(budgets) != 1:
            raise ConfigError("set exactly one of budget_iterations / budget_seconds")
        if budgets[0] <= 0:
            raise ConfigError("budget must be positive")
        if (self.mission is None) == (self.command_script is None):
            raise ConfigError("set exactly one of mission / command_script")
        if self.command_script is not None and self.catalog is None:
            raise ConfigError("command campaigns need a command catalog")
        if self.n_mutants < 1:
            raise ConfigError("n_mutants must be at least 1")
        if self.pool_capacity < 1 or self.initial_seed_count < 1:
            raise ConfigError("pool capacity and initial seed count must be positive")
        if self.llm_kind not in ("mock", "endpoint"):
            raise ConfigError(f"unknown llm kind {self.llm_kind!r}")
        if self.llm_kind == "endpoint" and self.oracle_enabled and self.llm is None:
            raise ConfigError("endpoint campaigns need endpoint settings")
        if (self.mode == "command" and self.llm_kind == "mock"
                and self.mock.mode is MockMode.PROXIMITY):
            raise ConfigError("the proximity mock needs a mission; use the keyword mock "
                              "for command campaigns")

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        obj: dict = {
            "definition": definition_to_json(self.definition),
            "mission": mission_to_json(self.mission) if self.mission else None,
            "command_script": self.command_script.to_json() if self.command_script else None,
            "catalog": self.catalog.to_json() if self.catalog else None,
            "budget_iterations": self.budget_iterations,
            "budget_seconds": self.budget_seconds,
            "n_mutants": self.n_mutants,
            "seed_strategy": self.seed_strategy.value,
            "select_policy": self.select_policy.to_str(),
            "update_policy": self.update_policy.value,
            "llm_kind": self.llm_kind,
            "mock": {
                "mode": self.mock.mode.value,
                "fixed_scores": list(self.mock.fixed_scores) if self.mock.fixed_scores else None,
                "noise_sigma": self.mock.noise_sigma,
                "rng_seed": self.mock.rng_seed,
            },
            "llm": None if self.llm is None else {
                "endpoint_url": self.llm.endpoint_url,
                "model_name": self.llm.model_name,
                "temperature": self.llm.temperature,
                "timeout_secs": self.llm.timeout_secs,
                "max_retries": self.llm.max_retries,
                "api_key_env_var": self.llm.api_key_env_var,
            },
            "stop_on_first_violation": self.stop_on_first_violation,
            "rng_seed": self.rng_seed,
            "limits": {
                "max_obstacles": self.limits.max_obstacles,
                "arena_min": list(self.limits.arena_min),
                "arena_max": list(self.limits.arena_max),
                "size_range": list(self.limits.size_range),
            },
            "sim": dataclasses.asdict(self.sim),
            "safety": dataclasses.asdict(self.safety),
            "pool_capacity": self.pool_capacity,
            "initial_seed_count": self.initial_seed_count,
            "seeds": None if self.seeds is None else [case_to_json(c) for c in self.seeds],
            "sigma_pos": self.sigma_pos,
            "sigma_size": self.sigma_size,
            "sigma_rot": self.sigma_rot,
            "cache_scores": self.cache_scores,
            "oracle_enabled": self.oracle_enabled,
            "baseline_take": self.baseline_take,
            "matched_selection_sizes": self.matched_selection_sizes,
        }
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "CampaignConfig":
        catalog = CommandCatalog.from_json(obj["catalog"]) if obj.get("catalog") else None
        limits_obj = obj.get("limits", {})
        limits = CaseLimits(
            max_obstacles=limits_obj.get("max_obstacles", 4),
            arena_min=tuple(limits_obj.get("arena_min", (-20.0, -20.0, 0.0))),
            arena_max=tuple(limits_obj.get("arena_max", (20.0, 20.0, 20.0))),
            size_range=tuple(limits_obj.get("size_range", (0.2, 20.0))),
            command_names=frozenset(catalog.names()) if catalog else None,
        )
        mock_obj = obj.get("mock", {})
        llm_obj = obj.get("llm")
        return cls(
            definition=definition_from_json(obj["definition"]),
            mission=mission_from_json(obj["mission"]) if obj.get("mission") else None,
            command_script=(sut.ScriptedOutcome.from_json(obj["command_script"])
                            if obj.get("command_script") else None),
            catalog=catalog,
            budget_iterations=obj.get("budget_iterations"),
            budget_seconds=obj.get("budget_seconds"),
            n_mutants=obj.get("n_mutants", 5),
            seed_strategy=SelectionStrategy(obj.get("seed_strategy", "uniform")),
            select_policy=SelectPolicy.parse(obj.get("select_policy", "floor:mid")),
            update_policy=UpdatePolicy(obj.get("update_policy", "replace-parent")),
            llm_kind=obj.get("llm_kind", "mock"),
            mock=MockOracleConfig(
                mode=mock_obj.get("mode", "proximity"),
                fixed_scores=(tuple(mock_obj["fixed_scores"])
                              if mock_obj.get("fixed_scores") else None),
                noise_sigma=mock_obj.get("noise_sigma", 0.0),
                rng_seed=mock_obj.get("rng_seed", 0),
            ),
            llm=None if llm_obj is None else LlmConfig(**llm_obj),
            stop_on_first_violation=obj.get("stop_on_first_violation", False),
            rng_seed=obj.get("rng_seed", 1),
            limits=limits,
            sim=sut.SimParams(**obj.get("sim", {})),
            safety=sut.SafetyPolicy(**obj.get("safety", {})),
            pool_capacity=obj.get("pool_capacity", 16),
            initial_seed_count=obj.get("initial_seed_count", 1),
            seeds=(None if obj.get("seeds") is None
                   else [case_from_json(c) for c in obj["seeds"]]),
            sigma_pos=obj.get("sigma_pos", 2.0),
            sigma_size=obj.get("sigma_size", 1.0),
            sigma_rot=obj.get("sigma_rot", 30.0),
            cache_scores=obj.get("cache_scores", False),
            oracle_enabled=obj.get("oracle_enabled", True),
            baseline_take=obj.get("baseline_take"),
            matched_selection_sizes=obj.get("matched_selection_sizes"),
        )

    @classmethod
    def load(cls, path) -> "CampaignConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class ViolationRecord:
    iteration: int
    case: TestCase
    verdict: "sut.Verdict"
    score: Optional[int]

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "case": case_to_json(self.case),
            "verdict": verdict_to_json(self.verdict),
            "score": self.score,
        }


@dataclass
class CampaignReport:
    """Summary of one campaign; serialized form is fully deterministic."""

    mission: Optional[str]
    mode: str
    rng_seed: int
    iterations_run: int
    executed_cases: int
    violations: list[ViolationRecord]
    unique_valid_cases: int
    category_histogram: dict[str, int]
    iterations_to_first_violation: Optional[int]
    oracle_rounds: int
    fallback_rounds: int
    selection_sizes: list[int]
    aborted: bool = False
    abort_message: Optional[str] = None
    audit_log: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "mission": self.mission,
            "mode": self.mode,
            "rng_seed": self.rng_seed,
            "iterations_run": self.iterations_run,
            "executed_cases": self.executed_cases,
            "violations": [v.to_json() for v in self.violations],
            "unique_valid_cases": self.unique_valid_cases,
            "category_histogram": dict(self.category_histogram),
            "iterations_to_first_violation": self.iterations_to_first_violation,
            "oracle_rounds": self.oracle_rounds,
            "fallback_rounds": self.fallback_rounds,
            "selection_sizes": list(self.selection_sizes),
            "aborted": self.aborted,
            "abort_message": self.abort_message,
            "audit_log": self.audit_log,
        }


def _default_seeds(config: CampaignConfig, ids: IdAllocator,
                   rng_seed: int) -> list[TestCase]:
    """Starting cases when none are supplied: benign draws from the arena."""
    rng = derive_rng(rng_seed, "init-seeds")
    cases = []
    for _ in range(config.initial_seed_count):
        if config.mode == "scenario":
            l = rng.uniform(1.0, 4.0)
            w = rng.uniform(1.0, 4.0)
            h = rng.uniform(2.0, 8.0)
            x = rng.uniform(config.limits.arena_min[0], config.limits.arena_max[0])
            y = rng.uniform(config.limits.arena_min[1], config.limits.arena_max[1])
            body = ScenarioBody((Obstacle(center=(x, y, h / 2.0), size=(l, w, h),
                                          yaw_deg=rng.uniform(0.0, 360.0) % 360.0),))
            cases.append(TestCase(id=ids.next_id(), body=body))
        else:
            name = rng.choice(config.catalog.names())
            entry = config.catalog.entries[name]
            value = rng.uniform(*entry.value_range) if entry.value_range else None
            cases.append(TestCase(id=ids.next_id(), body=CommandBody(name, value)))
    return cases


def _build_client(config: CampaignConfig, sim_oracle):
    if config.llm_kind == "endpoint":
        return WireLlmClient(config.llm)
    ground = sim_oracle if config.mock.mode is MockMode.PROXIMITY else None
    return MockLlmClient(config.mock, ground_truth=ground,
                         rng=derive_rng(config.rng_seed, "mock-noise"))


def _seed_id_floor(cases: Sequence[TestCase]) -> int:
    floor = 0
    for case in cases:
        m = re.fullmatch(r"case-(\d+)", case.id)
        if m:
            floor = max(floor, int(m.group(1)))
    return floor


def run_campaign(config: CampaignConfig, out_dir=None, client=None) -> CampaignReport:
    """Run the fuzzing loop to budget exhaustion (or the first violation when
    configured) and return the report. With an out_dir, every executed case,
    verdict, trajectory, pool snapshot and oracle exchange is persisted."""
    config.check()
    out = Path(out_dir) if out_dir is not None else None
    cases_dir = traj_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cases_dir = out / "cases"
        cases_dir.mkdir(exist_ok=True)
        if config.mode == "scenario":
            traj_dir = out / "trajectories"
            traj_dir.mkdir(exist_ok=True)
        (out / "config.json").write_text(
            json.dumps(config.to_json(), indent=2) + "\n", encoding="utf-8")

    rng_select = derive_rng(config.rng_seed, "seed-select")
    rng_mut = derive_rng(config.rng_seed, "mutation")
    rng_baseline = derive_rng(config.rng_seed, "baseline-select")

    ids = IdAllocator()
    if config.seeds is not None:
        seed_cases = list(config.seeds)
        ids = IdAllocator(start=_seed_id_floor(seed_cases) + 1)
    else:
        seed_cases = _default_seeds(config, ids, config.rng_seed)
    pool = SeedPool.init(seed_cases, capacity=config.pool_capacity, limits=config.limits)

    sim_oracle = sut.SimOracle(config.mission) if config.mode == "scenario" else None
    if client is None and config.oracle_enabled:
        client = _build_client(config, sim_oracle)
    audit = AuditLog(out / AUDIT_FILENAME if out is not None else None)

    if config.mode == "scenario":
        ops = scenario_ops(config.sigma_pos, config.sigma_size, config.sigma_rot)
    else:
        ops = command_ops()

    verdict_fh = (out / "verdicts.jsonl").open("w", encoding="utf-8") if out else None
    pool_fh = (out / "pool.jsonl").open("w", encoding="utf-8") if out else None

    histogram = {key: 0 for key in _HISTOGRAM_KEYS.values()}
    violations: list[ViolationRecord] = []
    unique_bodies: set[str] = set()
    first_violation_iter: Optional[int] = None
    executed_count = 0
    selection_sizes: list[int] = []
    oracle_rounds = 0
    fallback_rounds = 0
    aborted = False
    abort_message = None
    score_cache: dict[str, int] = {}

    started = time.monotonic()
    iteration = 0
    stop = False
    try:
        while not stop:
            if config.budget_iterations is not None and iteration >= config.budget_iterations:
                break
            if config.budget_seconds is not None and time.monotonic() - started >= config.budget_seconds:
                break
            iteration += 1

            seed = pool.select(config.seed_strategy, rng_select)
            try:
                mutants = mutate(seed, ops, config.n_mutants, config.limits,
                                 rng_mut, ids, catalog=config.catalog)
            except MutationExhausted:
                selection_sizes.append(0)
                continue

            if config.mode == "scenario":
                state = sut.snapshot_state(config.mission, seed.case)
            else:
                state = sut.scripted_snapshot(config.command_script.context)

            scored_by_id: dict[str, ScoredMutant] = {}
            if config.oracle_enabled:
                try:
                    cached = [score_cache.get(m.body_key()) for m in mutants]
                    if config.cache_scores and all(s is not None for s in cached):
                        scored = [
                            ScoredMutant(case=m, score=s, rationale="(cached)",
                                         category=categorize(s),
                                         parse_status=ParseStatus.PARSED)
                            for m, s in zip(mutants, cached)
                        ]
                    else:
                        scored = score_batch(config.definition, state, mutants,
                                             client, audit=audit, iteration=iteration)
                        oracle_rounds += 1
                        if config.cache_scores:
                            for sm in scored:
                                score_cache[sm.case.body_key()] = sm.score
                    for sm in scored:
                        histogram[_HISTOGRAM_KEYS[sm.category]] += 1
                        scored_by_id[sm.case.id] = sm
                    selected = select(scored, config.select_policy)
                except (OracleUnavailable, ParseFailed):
                    # Degrade to plain fuzzing for this round rather than halt.
                    fallback_rounds += 1
                    selected = list(mutants)
            else:
                if config.matched_selection_sizes is not None:
                    i = iteration - 1
                    k = (config.matched_selection_sizes[i]
                         if i < len(config.matched_selection_sizes) else len(mutants))
                elif config.baseline_take is not None:
                    k = config.baseline_take
                else:
                    k = len(mutants)
                k = max(0, min(k, len(mutants)))
                selected = list(mutants) if k == len(mutants) else rng_baseline.sample(mutants, k)
            selection_sizes.append(len(selected))

            for case in selected:
                try:
                    if config.mode == "scenario":
                        verdict, result = sut.execute_scenario(
                            config.mission, case, config.sim, config.safety)
                        if traj_dir is not None:
                            result.trajectory.to_csv(traj_dir / f"{case.id}.csv")
                    else:
                        verdict = sut.stub_execute(case, config.command_script)
                except sut.UnsupportedCase as exc:
                    aborted = True
                    abort_message = str(exc)
                    stop = True
                    break
                executed_count += 1
                sm = scored_by_id.get(case.id)
                score = sm.score if sm is not None else None
                if cases_dir is not None:
                    (cases_dir / f"{case.id}.json").write_text(
                        json.dumps(case_to_json(case)) + "\n", encoding="utf-8")
                if verdict_fh is not None:
                    verdict_fh.write(json.dumps({
                        "iteration": iteration,
                        "case_id": case.id,
                        "verdict": verdict_to_json(verdict),
                        "score": score,
                    }) + "\n")
                if verdict.is_violation:
                    violations.append(ViolationRecord(iteration, case, verdict, score))
                    unique_bodies.add(case.body_key())
                    if first_violation_iter is None:
                        first_violation_iter = iteration
                    if config.stop_on_first_violation:
                        stop = True
                        break
                else:
                    pool.update(case, score, verdict, config.update_policy)
            if pool_fh is not None:
                pool_fh.write(json.dumps({"iteration": iteration, **pool.snapshot()}) + "\n")
    finally:
        if verdict_fh is not None:
            verdict_fh.close()
        if pool_fh is not None:
            pool_fh.close()

    report = CampaignReport(
        mission=config.mission.name if config.mission else None,
        mode=config.mode,
        rng_seed=config.rng_seed,
        iterations_run=iteration,
        executed_cases=executed_count,
        violations=violations,
        unique_valid_cases=len(unique_bodies),
        category_histogram=histogram,
        iterations_to_first_violation=first_violation_iter,
        oracle_rounds=oracle_rounds,
        fallback_rounds=fallback_rounds,
        selection_sizes=selection_sizes,
        aborted=aborted,
        abort_message=abort_message,
        audit_log=AUDIT_FILENAME if out is not None else None,
    )
    if out is not None:
        (out / "report.json").write_text(
            json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# Paired guided-versus-baseline experiments.

@dataclass
class PairedResult:
    guided: CampaignReport
    baseline: CampaignReport

    @property
    def valid_delta(self) -> int:
        return self.guided.unique_valid_cases - self.baseline.unique_valid_cases

    def to_json(self) -> dict:
        return {
            "guided": self.guided.to_json(),
            "baseline": self.baseline.to_json(),
            "valid_delta": self.valid_delta,
        }


def run_paired_experiment(config: CampaignConfig, out_dir=None,
                          baseline_config: Optional[CampaignConfig] = None,
                          baseline_mode: str = "matched",
                          client=None) -> PairedResult:
    """Run a guided arm, then an unguided arm with the same seeds and budgets.

    The default baseline executes, per iteration, a uniform random subset of
    the fresh mutants equal in size to what the guided arm selected, keeping
    execution counts comparable. baseline_mode="all" executes every mutant.
    """
    guided_cfg = dataclasses.replace(config, oracle_enabled=True,
                                     matched_selection_sizes=None)
    out = Path(out_dir) if out_dir is not None else None
    guided = run_campaign(guided_cfg, out / "guided" if out else None, client=client)

    if baseline_config is not None:
        if baseline_config.budget_iterations != config.budget_iterations or \
                baseline_config.budget_seconds != config.budget_seconds:
            raise ConfigError("paired arms must share the same budget")
        if baseline_config.rng_seed != config.rng_seed:
            raise ConfigError("paired arms must share the same rng seed")
        base_cfg = dataclasses.replace(baseline_config, oracle_enabled=False)
    else:
        base_cfg = dataclasses.replace(config, oracle_enabled=False)
    if baseline_mode == "matched":
        base_cfg = dataclasses.replace(
            base_cfg, matched_selection_sizes=list(guided.selection_sizes))
    elif baseline_mode == "all":
        base_cfg = dataclasses.replace(base_cfg, matched_selection_sizes=None)
    else:
        raise ConfigError(f"unknown baseline mode {baseline_mode!r}")
    baseline = run_campaign(base_cfg, out / "baseline" if out else None)

    result = PairedResult(guided=guided, baseline=baseline)
    if out is not None:
        (out / "paired_report.json").write_text(
            json.dumps(result.to_json(), indent=2) + "\n", encoding="utf-8")
    return result


@dataclass
class PairedSeries:
    """One paired experiment per rng seed, with aggregate win statistics."""

    rows: list[dict]
    summary: dict

    def to_json(self) -> dict:
        return {"rows": self.rows, "summary": self.summary}


def _censored_median(values: Sequence[Optional[int]], censor: int) -> float:
    return statistics.median(censor if v is None else v for v in values)


def run_paired_series(config: CampaignConfig, rng_seeds: Sequence[int],
                      out_dir=None, baseline_mode: str = "matched") -> PairedSeries:
    if not rng_seeds:
        raise ConfigError("paired series needs at least one rng seed")
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    for seed in rng_seeds:
        cfg = dataclasses.replace(config, rng_seed=seed)
        pair_out = out / f"seed-{seed}" if out else None
        pair = run_paired_experiment(cfg, pair_out, baseline_mode=baseline_mode)
        rows.append({
            "rng_seed": seed,
            "guided_valid": pair.guided.unique_valid_cases,
            "baseline_valid": pair.baseline.unique_valid_cases,
            "guided_first_violation": pair.guided.iterations_to_first_violation,
            "baseline_first_violation": pair.baseline.iterations_to_first_violation,
            "guided_executed": pair.guided.executed_cases,
            "baseline_executed": pair.baseline.executed_cases,
        })
    budget = config.budget_iterations or 0
    censor = budget + 1
    summary = {
        "pairs": len(rows),
        "guided_ge_baseline": sum(1 for r in rows if r["guided_valid"] >= r["baseline_valid"]),
        "guided_gt_baseline": sum(1 for r in rows if r["guided_valid"] > r["baseline_valid"]),
        "median_guided_first_violation": _censored_median(
            [r["guided_first_violation"] for r in rows], censor),
        "median_baseline_first_violation": _censored_median(
            [r["baseline_first_violation"] for r in rows], censor),
        "first_violation_censor": censor,
    }
    series = PairedSeries(rows=rows, summary=summary)
    if out is not None:
        (out / "paired_series.json").write_text(
            json.dumps(series.to_json(), indent=2) + "\n", encoding="utf-8")
    return series


def replay_violation(report_violation: dict, config: CampaignConfig):
    """Re-execute a reported violating case; used to confirm reproducibility."""
    case = case_from_json(report_violation["case"])
    if config.mode == "scenario":
        verdict, _result = sut.execute_scenario(config.mission, case,
                                                config.sim, config.safety)
    else:
        verdict = sut.stub_execute(case, config.command_script)
    return verdict
