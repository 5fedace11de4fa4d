"""LLM-guided fuzzing for autonomous-system controllers.

The pipeline: a seed pool feeds a mutation engine, an interestingness
oracle (a live chat model or a deterministic mock) ranks the mutants,
and only the promising ones are executed against a UAV waypoint
simulator whose safety monitor flags collisions and minimum-separation
breaches.
"""

from .campaign import (
    CampaignConfig,
    CampaignReport,
    PairedResult,
    run_campaign,
    run_paired_experiment,
    run_paired_series,
)
from .core import (
    CaseLimits,
    Category,
    CommandBody,
    InterestingnessDefinition,
    Mission,
    Obstacle,
    ScenarioBody,
    SystemState,
    TestCase,
    Verdict,
    VerdictKind,
    validate,
)
from .llm import LlmConfig, MockLlmClient, MockOracleConfig, MockMode, WireLlmClient
from .metrics import (
    ConfusionMatrix,
    classification_metrics,
    compare_campaigns,
    uplift,
)
from .mutation import CommandCatalog, MutationOp, OpKind, load_default_catalog, mutate
from .oracle import (
    Prompt,
    ScoredMutant,
    SelectPolicy,
    categorize,
    classify_log,
    parse_response,
    select,
    set_prompt,
)
from .seeds import SeedPool, SelectionStrategy, UpdatePolicy
from .sut import (
    SafetyPolicy,
    SimOracle,
    SimParams,
    Trajectory,
    check,
    default_definition,
    run,
    stub_execute,
)

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig", "CampaignReport", "PairedResult", "run_campaign",
    "run_paired_experiment", "run_paired_series",
    "CaseLimits", "Category", "CommandBody", "InterestingnessDefinition",
    "Mission", "Obstacle", "ScenarioBody", "SystemState", "TestCase",
    "Verdict", "VerdictKind", "validate",
    "LlmConfig", "MockLlmClient", "MockOracleConfig", "MockMode", "WireLlmClient",
    "ConfusionMatrix", "classification_metrics", "compare_campaigns", "uplift",
    "CommandCatalog", "MutationOp", "OpKind", "load_default_catalog", "mutate",
    "Prompt", "ScoredMutant", "SelectPolicy", "categorize", "classify_log",
    "parse_response", "select", "set_prompt",
    "SeedPool", "SelectionStrategy", "UpdatePolicy",
    "SafetyPolicy", "SimOracle", "SimParams", "Trajectory", "check",
    "default_definition", "run", "stub_execute",
]
