"""Command-line interface: fuzz, eval-logs, score, compare, paired."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from .campaign import (
    TOOL_VERSION,
    CampaignConfig,
    run_campaign,
    run_paired_series,
)
from .core import (
    ConfigError,
    InterestingnessDefinition,
    SafliteError,
    TestCase,
    case_from_json,
    definition_from_json,
    mission_from_json,
    state_from_json,
)
from .llm import LlmConfig, MockLlmClient, MockMode, MockOracleConfig, WireLlmClient
from .metrics import (
    ConfusionMatrix,
    classification_metrics,
    compare_campaigns,
    comparison_to_csv,
    format_comparison_table,
    format_metrics_table,
)
from .mutation import CommandCatalog, load_default_catalog
from .oracle import SelectPolicy, classify_log, llm_agent, parse_response, set_prompt
from .seeds import SelectionStrategy, UpdatePolicy
from .sut import ScriptedOutcome, SimOracle, default_definition


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1; status 2 is reserved for found violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc


def load_mission(path):
    obj = _load_json(path)
    try:
        return mission_from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad mission: {exc}") from exc


def load_definition(path) -> InterestingnessDefinition:
    """Definition files may be JSON ({tag, policy_text}) or plain policy text."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict) and "policy_text" in obj:
        return definition_from_json(obj)
    if not text.strip():
        raise ConfigError(f"{path}: definition is empty")
    return InterestingnessDefinition(policy_text=text.strip(), tag=Path(path).stem)


def load_case_batch(path) -> list[TestCase]:
    """Case batches are a JSON array or JSONL; errors name the offending spot."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    cases = []
    if text.lstrip().startswith("["):
        try:
            objs = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for i, obj in enumerate(objs):
            try:
                cases.append(case_from_json(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: case at index {i}: {exc}") from exc
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                cases.append(case_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
    if not cases:
        raise ConfigError(f"{path}: no test cases found")
    return cases


def _parse_mock_mode(text: str) -> MockOracleConfig:
    if text.startswith("fixed:"):
        scores = tuple(int(v) for v in text[len("fixed:"):].split(",") if v)
        if not scores:
            raise ConfigError("fixed mock needs scores, e.g. fixed:8,3,5")
        return MockOracleConfig(mode=MockMode.FIXED, fixed_scores=scores)
    try:
        return MockOracleConfig(mode=MockMode(text))
    except ValueError as exc:
        raise ConfigError(f"unknown mock mode {text!r}") from exc


def _select_policy(text: str) -> SelectPolicy:
    try:
        return SelectPolicy.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_fuzz_config(args) -> CampaignConfig:
    if bool(args.mission) == bool(args.command_script):
        raise ConfigError("pass exactly one of --mission / --command-script")
    if args.budget_iters is None and args.budget_secs is None:
        raise ConfigError("pass one of --budget-iters / --budget-secs")
    if args.budget_iters is not None and args.budget_secs is not None:
        raise ConfigError("pass only one of --budget-iters / --budget-secs")

    mission = load_mission(args.mission) if args.mission else None
    script = None
    catalog = None
    if args.command_script:
        script = ScriptedOutcome.load(args.command_script)
        catalog = (CommandCatalog.load(args.catalog) if args.catalog
                   else load_default_catalog())

    if args.definition:
        definition = load_definition(args.definition)
    else:
        definition = default_definition()

    mock = _parse_mock_mode(args.mock_mode) if args.mock_mode else MockOracleConfig(
        mode=MockMode.PROXIMITY if mission is not None else MockMode.KEYWORD)
    if args.mock_noise:
        mock.noise_sigma = args.mock_noise

    llm_cfg = None
    if args.llm == "endpoint":
        llm_cfg = LlmConfig.from_env(temperature=args.temperature)

    seeds = None
    if args.seeds:
        seeds = load_case_batch(args.seeds)

    config = CampaignConfig(
        definition=definition,
        mission=mission,
        command_script=script,
        catalog=catalog,
        budget_iterations=args.budget_iters,
        budget_seconds=args.budget_secs,
        n_mutants=args.n_mutants,
        seed_strategy=SelectionStrategy(args.seed_strategy),
        select_policy=_select_policy(args.select),
        update_policy=UpdatePolicy(args.update_policy),
        llm_kind=args.llm,
        mock=mock,
        llm=llm_cfg,
        stop_on_first_violation=args.stop_on_first_violation,
        rng_seed=args.rng_seed,
        pool_capacity=args.pool_capacity,
        initial_seed_count=args.initial_seeds,
        seeds=seeds,
    )
    if catalog is not None:
        config.limits = dataclasses.replace(
            config.limits, command_names=frozenset(catalog.names()))
    return config


def _write_manifest(out: Path, config: CampaignConfig, started: str, finished: str):
    config_bytes = (out / "config.json").read_bytes()
    if config.llm_kind == "mock":
        identity = f"mock:{config.mock.mode.value}"
    else:
        identity = config.llm.model_name if config.llm else "endpoint"
    manifest = {
        "tool_version": TOOL_VERSION,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "started_at": started,
        "finished_at": finished,
        "rng_seed": config.rng_seed,
        "llm": identity,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                       encoding="utf-8")


def cmd_fuzz(args) -> int:
    if args.config:
        config = CampaignConfig.load(args.config)
    else:
        config = _build_fuzz_config(args)
    out = Path(args.out)
    started = datetime.now(timezone.utc).isoformat()
    report = run_campaign(config, out_dir=out)
    finished = datetime.now(timezone.utc).isoformat()
    _write_manifest(out, config, started, finished)
    if not args.no_plots:
        from .plots import render_run_figures

        render_run_figures(report.to_json(), out, config.mission)
    print(f"iterations: {report.iterations_run}")
    print(f"executed cases: {report.executed_cases}")
    print(f"violations: {len(report.violations)} "
          f"({report.unique_valid_cases} unique valid cases)")
    if report.iterations_to_first_violation is not None:
        print(f"first violation at iteration {report.iterations_to_first_violation}")
    print(f"report: {out / 'report.json'}")
    if report.aborted:
        print(f"aborted: {report.abort_message}", file=sys.stderr)
        return 1
    return 2 if report.violations else 0


def _client_for(args, mission=None):
    if args.llm == "endpoint":
        return WireLlmClient(LlmConfig.from_env(temperature=args.temperature))
    mock = _parse_mock_mode(args.mock_mode) if args.mock_mode else MockOracleConfig(
        mode=MockMode.PROXIMITY if mission is not None else MockMode.KEYWORD)
    ground = None
    if mock.mode is MockMode.PROXIMITY:
        if mission is None:
            raise ConfigError("the proximity mock needs --mission for ground truth")
        ground = SimOracle(mission)
    return MockLlmClient(mock, ground_truth=ground)


def cmd_eval_logs(args) -> int:
    try:
        text = Path(args.dataset).read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"error: {args.dataset}: file not found", file=sys.stderr)
        return 1
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"error: {args.dataset}: line {lineno}: {exc}", file=sys.stderr)
            return 1
        label = obj.get("label")
        if label not in ("interesting", "non-interesting"):
            print(f"error: {args.dataset}: line {lineno}: unknown label {label!r}",
                  file=sys.stderr)
            return 1
        entries.append((lineno, obj))
    if not entries:
        print(f"error: {args.dataset}: dataset is empty", file=sys.stderr)
        return 1

    definition = load_definition(args.definition)
    client = _client_for(args)
    pairs = []
    for lineno, obj in entries:
        result = classify_log(definition, obj.get("summary", ""), client)
        pairs.append((result.interesting, obj["label"] == "interesting"))
    cm = ConfusionMatrix.from_pairs(pairs)
    print(format_metrics_table(cm, classification_metrics(cm)))
    return 0


def cmd_score(args) -> int:
    cases = load_case_batch(args.case_batch)
    state = state_from_json(_load_json(args.state))
    definition = load_definition(args.definition)
    mission = load_mission(args.mission) if args.mission else None
    client = _client_for(args, mission)

    prompt = set_prompt(definition, state, cases)
    if args.show_prompt:
        print(prompt.rendered_text)
        print()
    exchange = llm_agent(prompt, client)
    scored = parse_response(exchange.text, cases)
    ranked = sorted(scored, key=lambda s: -s.score)
    print(f"{'rank':<5}{'case':<16}{'score':<7}{'category':<17}{'status':<11}rationale")
    for rank, sm in enumerate(ranked, start=1):
        rationale = " ".join(sm.rationale.split())
        if len(rationale) > 60:
            rationale = rationale[:57] + "..."
        print(f"{rank:<5}{sm.case.id:<16}{sm.score:<7}"
              f"{sm.category.name.lower():<17}{sm.parse_status.value:<11}{rationale}")
    return 0


def cmd_compare(args) -> int:
    a = _load_json(args.a)
    b = _load_json(args.b)
    cmp = compare_campaigns(a, b)
    print(format_comparison_table(cmp))
    if args.csv:
        comparison_to_csv(cmp, args.csv)
        print(f"csv written to {args.csv}")
    return 0


def cmd_paired(args) -> int:
    obj = _load_json(args.config)
    if "campaign" not in obj:
        raise ConfigError(f"{args.config}: needs a 'campaign' section")
    config = CampaignConfig.from_json(obj["campaign"])
    rng_seeds = obj.get("rng_seeds", [config.rng_seed])
    baseline_mode = obj.get("baseline", "matched")
    series = run_paired_series(config, rng_seeds, out_dir=args.out,
                               baseline_mode=baseline_mode)
    header = f"{'seed':<8}{'guided':<9}{'baseline':<10}{'g_first':<9}b_first"
    print(header)
    for row in series.rows:
        g_first = row["guided_first_violation"]
        b_first = row["baseline_first_violation"]
        print(f"{row['rng_seed']:<8}{row['guided_valid']:<9}{row['baseline_valid']:<10}"
              f"{'-' if g_first is None else g_first:<9}"
              f"{'-' if b_first is None else b_first}")
    s = series.summary
    print(f"guided >= baseline in {s['guided_ge_baseline']}/{s['pairs']} pairs, "
          f"strictly greater in {s['guided_gt_baseline']}/{s['pairs']}")
    print(f"median first violation: guided {s['median_guided_first_violation']}, "
          f"baseline {s['median_baseline_first_violation']} "
          f"(not-found counted as {s['first_violation_censor']})")
    if args.out and not args.no_plots:
        from .plots import render_paired_figures

        render_paired_figures(series.to_json(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saflite",
                     description="LLM-guided fuzzing for autonomous-system controllers")
    parser.add_argument("--version", action="version", version=f"saflite {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    fuzz = sub.add_parser("fuzz", help="run a fuzzing campaign")
    fuzz.add_argument("--mission", help="mission JSON file (waypoint route)")
    fuzz.add_argument("--command-script", help="scripted-outcome JSON for command fuzzing")
    fuzz.add_argument("--config", help="re-run from a persisted config.json")
    fuzz.add_argument("--definition", help="interestingness definition file")
    fuzz.add_argument("--catalog", help="command catalog JSON")
    fuzz.add_argument("--budget-iters", type=int)
    fuzz.add_argument("--budget-secs", type=float)
    fuzz.add_argument("--n-mutants", type=int, default=5)
    fuzz.add_argument("--llm", choices=["mock", "endpoint"], default="mock")
    fuzz.add_argument("--mock-mode", help="proximity | keyword | fixed:8,3,...")
    fuzz.add_argument("--mock-noise", type=float, default=0.0)
    fuzz.add_argument("--temperature", type=float, default=0.0)
    fuzz.add_argument("--select", default="floor:mid", help="topk:K | floor:mid | floor:interesting")
    fuzz.add_argument("--seed-strategy", choices=[s.value for s in SelectionStrategy],
                      default="uniform")
    fuzz.add_argument("--update-policy", choices=[p.value for p in UpdatePolicy],
                      default="replace-parent")
    fuzz.add_argument("--pool-capacity", type=int, default=16)
    fuzz.add_argument("--initial-seeds", type=int, default=1)
    fuzz.add_argument("--seeds", help="JSON/JSONL file of starting cases")
    fuzz.add_argument("--stop-on-first-violation", action="store_true")
    fuzz.add_argument("--rng-seed", type=int, default=1)
    fuzz.add_argument("--out", required=True, help="run directory")
    fuzz.add_argument("--no-plots", action="store_true")
    fuzz.set_defaults(func=cmd_fuzz)

    ev = sub.add_parser("eval-logs", help="triage a labelled log dataset")
    ev.add_argument("--dataset", required=True, help="JSONL of {id, summary, label}")
    ev.add_argument("--definition", required=True)
    ev.add_argument("--llm", choices=["mock", "endpoint"], default="mock")
    ev.add_argument("--mock-mode", default="keyword")
    ev.add_argument("--temperature", type=float, default=0.0)
    ev.set_defaults(func=cmd_eval_logs)

    score = sub.add_parser("score", help="score a mutant batch once")
    score.add_argument("--case-batch", required=True)
    score.add_argument("--state", required=True, help="system state JSON")
    score.add_argument("--definition", required=True)
    score.add_argument("--mission", help="mission JSON (needed by the proximity mock)")
    score.add_argument("--llm", choices=["mock", "endpoint"], default="mock")
    score.add_argument("--mock-mode")
    score.add_argument("--temperature", type=float, default=0.0)
    score.add_argument("--show-prompt", action="store_true")
    score.set_defaults(func=cmd_score)

    comp = sub.add_parser("compare", help="compare two campaign reports")
    comp.add_argument("--a", required=True)
    comp.add_argument("--b", required=True)
    comp.add_argument("--csv", help="also write the table as CSV")
    comp.set_defaults(func=cmd_compare)

    paired = sub.add_parser("paired", help="guided vs baseline experiment series")
    paired.add_argument("--config", required=True, help="JSON with campaign + rng_seeds")
    paired.add_argument("--out", help="output directory")
    paired.add_argument("--no-plots", action="store_true")
    paired.set_defaults(func=cmd_paired)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0
    except SafliteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
