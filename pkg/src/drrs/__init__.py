"""additive distributionally robust ranking and selection"""

# flake8: noqa

import importlib.metadata

from .analysis import (
    GUARD_TOLERANCE,
    AllocationPattern,
    BoundEstimate,
    LastExitResult,
    NonNecessity,
    SBound,
    aa_round_count,
    allocation_pattern,
    guard_horizon,
    last_exit_lower,
    last_exit_upper,
    nonnecessity_bound_thm3,
    nonnecessity_bound_total,
    oracle_horizon,
    pcs_lower_bound_mc,
    pics_bound_prop1,
    s_bound,
    simulate_last_exits,
    tail_bound_lemma3,
    worst_case_missed,
    zero_exit_bound_ec6,
)
from .common import (
    BATCHES_PER_WORKER,
    DEFAULT_SEED,
    DEFAULT_THETA,
    DEFAULT_VARIANCE,
    AbstractAsyncLister,
    with_timeout,
)
from .config import (
    SCHEMA_VERSION,
    BudgetGrid,
    ExperimentConfig,
    InstanceSpec,
    OutputSpec,
    ProcedureSpec,
    RuleSpec,
    Thresholds,
    load_config,
    parse_config,
)
from .errors import (
    AllocationError,
    AmbiguitySetError,
    BatchTimeout,
    BudgetError,
    ConfigError,
    DRRSException,
    FitError,
    HorizonExceeded,
    InstanceError,
    InsufficientSamples,
    VerificationFailure,
)
from .harness import (
    SUITES,
    CheckRow,
    EstimateRow,
    ExperimentResult,
    ReplicationLister,
    run_experiment,
    run_replications,
    run_testbed,
    suite_allocation_pattern,
    suite_compare,
    suite_gaa_consistency,
    suite_pics_decay,
    verify_bounds,
    verify_lemma1,
    wilson_interval,
)
from .model import (
    GAUSSIAN,
    AllocationState,
    ProblemInstance,
    ScenarioId,
    ScenarioSimulator,
    ScenarioStats,
    mm_config,
    sc_config,
    update_stats,
)
from .plotting import PlotKind, emit_svg, pics_floor
from .posterior import (
    ConjugateBelief,
    belief_from_stats,
    draw_mean,
    draw_means,
    kg_score,
    normal_kg_factor,
    student_kg_factor,
)
from .procedures import (
    GaaConfig,
    RunRecord,
    TieBreak,
    aa_round,
    gaa_kg_config,
    gaa_round,
    gaa_ttts_config,
    identify_round_leaders,
    run_aa,
    run_gaa,
)
from .rules import (
    BaseRule,
    EpsilonWrap,
    EqualRule,
    ExplorationMode,
    KGRule,
    TTTSRule,
    epsilon_wrap,
    equal_rule,
    kg_rule,
    ttts_rule,
)
from .streams import (
    BLOCK_SIZE,
    MAX_HORIZON,
    ScenarioStream,
    StreamSet,
    StreamSpec,
    open_stream,
    open_streams,
    prefix_means,
    substream,
)
from .testbeds import (
    FAMILIES,
    TRUE_SERVICE,
    AmbiguitySet,
    FittedMember,
    InventoryParameters,
    InventoryPolicy,
    InventorySimulator,
    ParametricDistribution,
    QueueCosts,
    QueueOutcome,
    QueueScenario,
    QueueSimulator,
    build_ambiguity_set,
    estimate_means,
    fit_family,
    inventory_cost,
    inventory_costs,
    inventory_instance,
    policy_grid,
    queue_cost,
    queue_instance,
    service_sample,
    simulate_queue,
)
from .types import (
    Allocation,
    Direction,
    Provenance,
    SamplingRule,
    check_allocation,
    check_direction,
    check_probability,
)

__version__ = importlib.metadata.version(__package__)  # pyright: ignore[reportArgumentType]
version = tuple(map(int, __version__.split(".")))


__all__ = (
    # model
    "GAUSSIAN",
    "ScenarioId",
    "ScenarioSimulator",
    "ProblemInstance",
    "ScenarioStats",
    "AllocationState",
    "sc_config",
    "mm_config",
    "update_stats",
    # streams
    "BLOCK_SIZE",
    "MAX_HORIZON",
    "StreamSpec",
    "ScenarioStream",
    "StreamSet",
    "open_stream",
    "open_streams",
    "prefix_means",
    "substream",
    # posterior
    "ConjugateBelief",
    "belief_from_stats",
    "draw_mean",
    "draw_means",
    "kg_score",
    "normal_kg_factor",
    "student_kg_factor",
    # rules
    "ExplorationMode",
    "BaseRule",
    "EqualRule",
    "KGRule",
    "TTTSRule",
    "EpsilonWrap",
    "equal_rule",
    "kg_rule",
    "ttts_rule",
    "epsilon_wrap",
    # procedures
    "TieBreak",
    "GaaConfig",
    "RunRecord",
    "identify_round_leaders",
    "aa_round",
    "gaa_round",
    "run_aa",
    "run_gaa",
    "gaa_kg_config",
    "gaa_ttts_config",
    # analysis
    "GUARD_TOLERANCE",
    "LastExitResult",
    "SBound",
    "BoundEstimate",
    "NonNecessity",
    "AllocationPattern",
    "guard_horizon",
    "oracle_horizon",
    "aa_round_count",
    "last_exit_upper",
    "last_exit_lower",
    "s_bound",
    "pcs_lower_bound_mc",
    "pics_bound_prop1",
    "tail_bound_lemma3",
    "zero_exit_bound_ec6",
    "simulate_last_exits",
    "nonnecessity_bound_thm3",
    "nonnecessity_bound_total",
    "allocation_pattern",
    "worst_case_missed",
    # testbeds
    "FAMILIES",
    "TRUE_SERVICE",
    "InventoryPolicy",
    "InventoryParameters",
    "inventory_cost",
    "inventory_costs",
    "ParametricDistribution",
    "QueueCosts",
    "QueueScenario",
    "QueueOutcome",
    "simulate_queue",
    "queue_cost",
    "FittedMember",
    "AmbiguitySet",
    "fit_family",
    "build_ambiguity_set",
    "InventorySimulator",
    "QueueSimulator",
    "estimate_means",
    "inventory_instance",
    "queue_instance",
    "policy_grid",
    "service_sample",
    # config
    "SCHEMA_VERSION",
    "RuleSpec",
    "ProcedureSpec",
    "InstanceSpec",
    "BudgetGrid",
    "OutputSpec",
    "Thresholds",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    # harness
    "EstimateRow",
    "CheckRow",
    "ExperimentResult",
    "ReplicationLister",
    "wilson_interval",
    "run_replications",
    "run_experiment",
    "suite_pics_decay",
    "suite_allocation_pattern",
    "suite_gaa_consistency",
    "suite_compare",
    "SUITES",
    "verify_lemma1",
    "verify_bounds",
    "run_testbed",
    # plotting
    "PlotKind",
    "emit_svg",
    "pics_floor",
    # errors
    "DRRSException",
    "InstanceError",
    "ConfigError",
    "HorizonExceeded",
    "BudgetError",
    "AllocationError",
    "InsufficientSamples",
    "FitError",
    "AmbiguitySetError",
    "VerificationFailure",
    "BatchTimeout",
    # common
    "with_timeout",
    "AbstractAsyncLister",
    "DEFAULT_SEED",
    "DEFAULT_THETA",
    "DEFAULT_VARIANCE",
    "BATCHES_PER_WORKER",
    #
    # types
    "Direction",
    "Provenance",
    "Allocation",
    "SamplingRule",
    "check_allocation",
    "check_direction",
    "check_probability",
    #
    "version",
    "__version__",
)
