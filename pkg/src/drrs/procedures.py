"""
The additive allocation engines.

Each round identifies the worst-case scenario of every alternative and the
current best alternative, then spends an m-step on the scenarios of the
current best and a k-step on the worst-case scenarios of the others. AA
spends one observation per scenario in both steps; GAA lets sampling rules
decide.
"""

import dataclasses
import functools
import logging
from typing import Any, Callable, Final, List, Optional, Sequence, Tuple, TypeVar

from typing_extensions import Literal, ParamSpec, TypeAlias

from .errors import AllocationError, BudgetError
from .model import AllocationState, ProblemInstance, ScenarioId, ScenarioStats, update_stats
from .rules import EpsilonWrap, EqualRule, KGRule, TTTSRule
from .streams import StreamSet, StreamSpec, open_streams
from .types import Allocation, Provenance, SamplingRule, check_allocation
from .utils import first_argmax, first_argmin, get_param

__all__ = (
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
)

logger = logging.getLogger(__name__)

TieBreak: TypeAlias = Literal["worst_case_mean", "index"]
DEFAULT_EPSILON: Final[float] = 0.1

_T = TypeVar("_T")
_PS = ParamSpec("_PS")
RoundHook = Callable[[AllocationState], None]


@dataclasses.dataclass(frozen=True)
class GaaConfig:
    """
    :param n0: initial observations per scenario
    :param delta_m: m-step budget, the joint budget in joint mode
    :param delta_k: k-step budget
    :param m_rule: rule over the m scenarios of the current best
    :param k_rule: rule over the worst-case scenarios of the others,
        unused in joint mode
    :param joint_mode: mirror the k-step candidates' means about the
        current best's worst-case mean and let `m_rule` allocate over all
        k + m - 1 candidates at once
    :param tie_break: final selection tie rule after the m-step round
        counts
    """

    n0: int
    delta_m: int
    delta_k: int
    m_rule: SamplingRule
    k_rule: SamplingRule
    joint_mode: bool = False
    tie_break: TieBreak = "worst_case_mean"

    def __post_init__(self) -> None:
        if self.n0 < 1:
            raise ValueError(f"n0 should be at least 1, got {self.n0}")
        if self.delta_m < 1 or self.delta_k < 1:
            raise ValueError(f"step budgets should be at least 1, got {self.delta_m} and {self.delta_k}")
        rules = [self.m_rule] if self.joint_mode else [self.m_rule, self.k_rule]
        if self.n0 < 2 and any(rule.needs_variance for rule in rules):
            raise ValueError("variance-based rules need n0 >= 2")
        if self.joint_mode and self.m_rule.direction != "max":
            raise ValueError("joint mode runs a single max-seeking rule")
        if self.tie_break not in ("worst_case_mean", "index"):
            raise ValueError(f"unknown tie break {self.tie_break!r}")

    @classmethod
    def additive(cls, k: int, m: int) -> "GaaConfig":
        """
        The GAA instance that reproduces AA exactly.
        """
        return cls(
            n0=1,
            delta_m=m,
            delta_k=k - 1,
            m_rule=EqualRule("max"),
            k_rule=EqualRule("min"),
            tie_break="index",
        )


def gaa_kg_config(n0: int = 20, epsilon: float = DEFAULT_EPSILON) -> GaaConfig:
    """
    Two independent knowledge-gradient rules, one observation per step.
    """
    return GaaConfig(
        n0=n0,
        delta_m=1,
        delta_k=1,
        m_rule=EpsilonWrap(KGRule("max"), epsilon),
        k_rule=EpsilonWrap(KGRule("min"), epsilon),
    )


def gaa_ttts_config(n0: int = 20, beta: float = 0.5, epsilon: float = DEFAULT_EPSILON) -> GaaConfig:
    """
    Top-two Thompson sampling over the concatenated candidate set, one
    observation per round.
    """
    return GaaConfig(
        n0=n0,
        delta_m=1,
        delta_k=1,
        m_rule=EpsilonWrap(TTTSRule("max", beta=beta), epsilon),
        k_rule=EpsilonWrap(TTTSRule("min", beta=beta), epsilon),
        joint_mode=True,
    )


@dataclasses.dataclass(frozen=True)
class RunRecord:
    """
    Outcome of one macro-replication. Alternatives and scenarios are
    1-based; `sizes` and `means` are k x m nests.
    """

    procedure: str
    replication: int
    budget: int
    selection: int
    correct: Optional[bool]
    consumed: int
    rounds: int
    sizes: Tuple[Tuple[int, ...], ...]
    means: Tuple[Tuple[float, ...], ...]
    m_rounds: Tuple[int, ...]
    k_rounds: Tuple[int, ...]
    per_round_best: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def m(self) -> int:
        return len(self.sizes[0])

    def row(self) -> List[Any]:
        """
        CSV row: replication, procedure, N, selection, correct, consumed,
        then the k x m sample sizes in row-major order.
        """
        correct = "" if self.correct is None else int(self.correct)
        flat = [n for row in self.sizes for n in row]
        return [self.replication, self.procedure, self.budget, self.selection, correct, self.consumed, *flat]

    @staticmethod
    def header(k: int, m: int) -> List[str]:
        names = [f"n_{i}_{j}" for i in range(1, k + 1) for j in range(1, m + 1)]
        return ["replication", "procedure", "N", "selection", "correct", "consumed", *names]


def _leaders(state: AllocationState) -> Tuple[List[int], int]:
    worst = []
    worst_means = []
    for row in state.stats:
        means = [s.mean for s in row]
        j = first_argmax(means)
        worst.append(j)
        worst_means.append(means[j])
    return worst, first_argmin(worst_means)


def identify_round_leaders(state: AllocationState) -> Tuple[Tuple[int, ...], int]:
    """
    Worst-case scenario of every alternative (largest sample mean in its
    row) and the current best alternative (smallest worst-case sample
    mean). Ties go to the lowest index; everything is 1-based.

    ::

        >>> identify_round_leaders(state)  # means [[1, 3], [5, 2]]
        ((2, 1), 1)
    """
    worst, best = _leaders(state)
    return tuple(j + 1 for j in worst), best + 1


def _observe(state: AllocationState, streams: StreamSet, i: int, j: int, provenance: Provenance) -> None:
    update_stats(state.stats[i][j], streams.draw(i + 1, j + 1), provenance)
    state.consumed += 1


def _initialize(state: AllocationState, streams: StreamSet, n0: int) -> None:
    for i in range(state.k):
        for j in range(state.m):
            for _ in range(n0):
                _observe(state, streams, i, j, "init")


def _close_round(state: AllocationState, best: int) -> None:
    state.r_m[best] += 1
    for i in range(state.k):
        if i != best:
            state.r_k[i] += 1
    state.rounds += 1
    state.per_round_best.append(best + 1)


def aa_round(state: AllocationState, streams: StreamSet) -> AllocationState:
    """
    One AA round: one observation to every scenario of the current best,
    one observation to the round-start worst-case scenario of every other
    alternative.

    :raises drrs.HorizonExceeded: when a stream runs out
    """
    worst, best = _leaders(state)
    for j in range(state.m):
        _observe(state, streams, best, j, "m")
    for i in range(state.k):
        if i != best:
            _observe(state, streams, i, worst[i], "k")
    _close_round(state, best)
    return state


def _record(
    state: AllocationState,
    instance: ProblemInstance,
    procedure: str,
    replication: int,
    selection: int,
) -> RunRecord:
    return RunRecord(
        procedure=procedure,
        replication=replication,
        budget=state.budget,
        selection=selection + 1,
        correct=selection + 1 == instance.best,
        consumed=state.consumed,
        rounds=state.rounds,
        sizes=tuple(tuple(row) for row in state.sizes()),
        means=tuple(tuple(row) for row in state.means()),
        m_rounds=tuple(state.r_m),
        k_rounds=tuple(state.r_k),
        per_round_best=tuple(state.per_round_best),
    )


def _prepare(
    instance: ProblemInstance,
    budget: int,
    spec: StreamSpec,
    streams: Optional[StreamSet],
    required: int,
) -> Tuple[AllocationState, StreamSet]:
    if budget < required:
        raise BudgetError(budget, required)
    if streams is None:
        if spec.horizon is None:
            spec = spec.with_horizon(budget)
        streams = open_streams(instance, spec)
    return AllocationState(k=instance.k, m=instance.m, budget=budget), streams


def run_aa(
    instance: ProblemInstance,
    budget: int,
    spec: StreamSpec,
    *,
    streams: Optional[StreamSet] = None,
    procedure: str = "AA",
    on_round: Optional[RoundHook] = None,
) -> RunRecord:
    """
    Run AA with total budget `budget` and select the alternative with the
    largest total sample size.

    :param streams: already opened streams, for oracle replays
    :type streams: :py:class:`drrs.StreamSet`

    :param on_round: called with the state after every round
    :type on_round: :py:class:`callable`

    :raises drrs.BudgetError: when `budget` is below ``k * m``
    """
    k, m = instance.k, instance.m
    state, streams = _prepare(instance, budget, spec, streams, k * m)
    _initialize(state, streams, 1)
    cost = k + m - 1
    debug = logger.isEnabledFor(logging.DEBUG)
    while state.consumed + cost < budget:
        aa_round(state, streams)
        if debug:
            logger.debug("AA round %d: best %d", state.rounds, state.per_round_best[-1])
        if on_round is not None:
            on_round(state)
    totals = [sum(row) for row in state.sizes()]
    return _record(state, instance, procedure, spec.replication, first_argmax(totals))


def with_round_context(f: Callable[_PS, _T]) -> Callable[_PS, _T]:
    """
    Decorator. Re-raises allocation failures as
    :py:class:`drrs.AllocationError` tagged with the round in progress
    and the step.
    """

    @functools.wraps(f)
    def wrapper(*args: _PS.args, **kwargs: _PS.kwargs) -> _T:
        state: AllocationState = get_param((0, "state"), args, kwargs)
        step: str = get_param((1, "step"), args, kwargs)
        try:
            return f(*args, **kwargs)
        except (AllocationError, ValueError) as exc:
            if isinstance(exc, AllocationError) and exc.round_index is not None:
                raise
            raise AllocationError(str(exc), round_index=state.rounds + 1, step=step) from exc

    return wrapper


@with_round_context
def _allocate(
    state: AllocationState,
    step: str,
    rule: SamplingRule,
    candidates: Sequence[ScenarioStats],
    budget: int,
    streams: StreamSet,
    binary: bool,
) -> Allocation:
    values = rule.allocate(candidates, budget, streams.rule_rng)
    return check_allocation(values, budget, binary=binary)


def _spend(
    state: AllocationState,
    streams: StreamSet,
    targets: Sequence[ScenarioId],
    allocation: Allocation,
    provenance: Provenance,
) -> None:
    for (i, j), count in zip(targets, allocation):
        for _ in range(count):
            _observe(state, streams, i - 1, j - 1, provenance)


def gaa_round(
    state: AllocationState,
    streams: StreamSet,
    config: GaaConfig,
    m_rule: SamplingRule,
    k_rule: SamplingRule,
) -> AllocationState:
    """
    One GAA round. Leaders are identified once, at round start, and the
    round counters move before any observation is spent.

    :raises drrs.AllocationError: when a rule breaks its contract
    """
    worst, best = _leaders(state)
    m_targets = [ScenarioId(best + 1, j + 1) for j in range(state.m)]
    k_targets = [ScenarioId(i + 1, worst[i] + 1) for i in range(state.k) if i != best]
    m_candidates = state.stats_at(m_targets)
    k_candidates = state.stats_at(k_targets)
    if config.joint_mode:
        # mirrored about the best's worst case, which then tops the joint set
        pivot = m_candidates[worst[best]].mean
        candidates = m_candidates + [stats.reflected(pivot) for stats in k_candidates]
        allocation = _allocate(state, "joint", m_rule, candidates, config.delta_m, streams, True)
        _close_round(state, best)
        _spend(state, streams, m_targets, Allocation(allocation[: state.m]), "m")
        _spend(state, streams, k_targets, Allocation(allocation[state.m :]), "k")
        return state
    m_allocation = _allocate(state, "m", m_rule, m_candidates, config.delta_m, streams, m_rule.binary)
    k_allocation = _allocate(state, "k", k_rule, k_candidates, config.delta_k, streams, True)
    _close_round(state, best)
    _spend(state, streams, m_targets, m_allocation, "m")
    _spend(state, streams, k_targets, k_allocation, "k")
    return state


def _gaa_selection(state: AllocationState, tie_break: TieBreak) -> int:
    top = max(state.r_m)
    tied = [i for i in range(state.k) if state.r_m[i] == top]
    if tie_break == "index" or len(tied) == 1:
        return tied[0]
    worst_case = [max(s.mean for s in state.stats[i]) for i in tied]
    return tied[first_argmin(worst_case)]


def run_gaa(
    instance: ProblemInstance,
    budget: int,
    config: GaaConfig,
    spec: StreamSpec,
    *,
    streams: Optional[StreamSet] = None,
    procedure: str = "GAA",
    on_round: Optional[RoundHook] = None,
) -> RunRecord:
    """
    Run GAA and select the alternative that was the current best in the
    most rounds.

    :raises drrs.BudgetError: when `budget` is below ``n0 * k * m``
    :raises drrs.AllocationError: with round context, when a rule fails
    """
    k, m = instance.k, instance.m
    state, streams = _prepare(instance, budget, spec, streams, config.n0 * k * m)
    m_rule, k_rule = config.m_rule.spawn(), config.k_rule.spawn()
    _initialize(state, streams, config.n0)
    cost = config.delta_m + config.delta_k
    debug = logger.isEnabledFor(logging.DEBUG)
    while state.consumed + cost < budget:
        gaa_round(state, streams, config, m_rule, k_rule)
        if debug:
            logger.debug("GAA round %d: best %d, consumed %d", state.rounds, state.per_round_best[-1], state.consumed)
        if on_round is not None:
            on_round(state)
    selection = _gaa_selection(state, config.tie_break)
    return _record(state, instance, procedure, spec.replication, selection)
