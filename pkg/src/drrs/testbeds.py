"""
Discrete-event testbeds: an (s, S) inventory system with random lead
times and a multiserver queue with abandonment, plus the ambiguity-set
builder fitting input distributions to a small data sample.

Inventory conventions: demand is fully backlogged, inventory position is
on-hand plus on-order minus backorders, ordering cost is charged when an
order is placed and holding cost on end-of-period positive on-hand. An
order placed in period `t` with lead time `L` is received in period
``t + L`` (immediately when ``L == 0``).

Queue conventions: FIFO, a customer abandons when the wait for a server
would exceed their patience, the cost adds the abandonment count, the
mean wait of served customers and the staffing level, weighted. No
warm-up period.
"""

import dataclasses
import functools
import heapq
import logging
import math
import sys
from typing import Any, Callable, Dict, Final, List, NamedTuple, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy import stats
from typing_extensions import ParamSpec, override

from .errors import AmbiguitySetError, FitError
from .model import ProblemInstance, ScenarioId
from .streams import StreamSpec, substream

__all__ = (
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
)

logger = logging.getLogger(__name__)

FAMILIES: Final[Tuple[str, ...]] = ("lognormal", "gamma", "weibull", "exponential")
# reserved replication indices, far above any experiment replication
GROUND_TRUTH_REPLICATION: Final[int] = 2**40
INPUT_DATA_REPLICATION: Final[int] = 2**40 + 1
MIN_VARIANCE: Final[float] = 1e-12

_T = TypeVar("_T")
_PS = ParamSpec("_PS")


@dataclasses.dataclass(frozen=True)
class InventoryPolicy:
    """
    Reorder up to `S` whenever the inventory position drops below `s`.
    """

    s: float
    S: float

    def __post_init__(self) -> None:
        if not self.s < self.S:
            raise ValueError(f"reorder point {self.s} should be below order-up-to level {self.S}")

    @override
    def __str__(self) -> str:
        return f"({self.s:g},{self.S:g})"


@dataclasses.dataclass(frozen=True)
class InventoryParameters:
    initial_inventory: float = 1000.0
    lead_time_mean: float = 6.0
    holding_cost: float = 0.5
    fixed_cost: float = 36.0
    unit_cost: float = 1.0


def policy_grid(reorder_points: Sequence[float], order_up_to: Sequence[float]) -> List[InventoryPolicy]:
    """
    Every ``(s, S)`` pair with ``s < S``, in row-major order.
    """
    return [InventoryPolicy(s, big_s) for s in reorder_points for big_s in order_up_to if s < big_s]


def _check_demand(demand_mean: float, horizon: int) -> None:
    if demand_mean < 0:
        raise ValueError(f"demand mean should be nonnegative, got {demand_mean!r}")
    if horizon < 1:
        raise ValueError(f"horizon should be at least 1, got {horizon!r}")


def _inventory_path(
    policy: InventoryPolicy,
    demands: Sequence[float],
    leads: Sequence[int],
    parameters: InventoryParameters,
) -> float:
    horizon = len(demands)
    due = [0.0] * horizon
    level = parameters.initial_inventory
    on_order = 0.0
    total = 0.0
    for t in range(horizon):
        level -= demands[t]
        if due[t]:
            level += due[t]
            on_order -= due[t]
        position = level + on_order
        if position < policy.s:
            quantity = policy.S - position
            total += parameters.fixed_cost + parameters.unit_cost * quantity
            lead = int(leads[t])
            if lead == 0:
                level += quantity
            elif t + lead < horizon:
                due[t + lead] += quantity
                on_order += quantity
            else:
                on_order += quantity
        if level > 0:
            total += parameters.holding_cost * level
    return total / horizon


def inventory_cost(
    policy: InventoryPolicy,
    demand_mean: float,
    horizon: int,
    rng: np.random.Generator,
    parameters: InventoryParameters = InventoryParameters(),
) -> float:
    """
    Average per-period cost of one replication over `horizon` periods with
    exponential demand of mean `demand_mean` and Poisson lead times.
    A zero `demand_mean` gives zero demand.

    ::

        >>> inventory_cost(InventoryPolicy(240, 350), 0.0, 1000, rng)
        500.0
    """
    _check_demand(demand_mean, horizon)
    demands = rng.exponential(demand_mean, size=horizon).tolist()
    leads = rng.poisson(parameters.lead_time_mean, size=horizon).tolist()
    return _inventory_path(policy, demands, leads, parameters)


def _inventory_batch(
    policy: InventoryPolicy,
    demands: np.ndarray,
    leads: np.ndarray,
    parameters: InventoryParameters,
) -> np.ndarray:
    replications, horizon = demands.shape
    rows = np.arange(replications)
    due = np.zeros((replications, horizon))
    level = np.full(replications, float(parameters.initial_inventory))
    on_order = np.zeros(replications)
    total = np.zeros(replications)
    for t in range(horizon):
        level -= demands[:, t]
        level += due[:, t]
        on_order -= due[:, t]
        position = level + on_order
        ordering = position < policy.s
        if ordering.any():
            quantity = np.where(ordering, policy.S - position, 0.0)
            total += np.where(ordering, parameters.fixed_cost + parameters.unit_cost * quantity, 0.0)
            lead = leads[:, t]
            now = ordering & (lead == 0)
            later = ordering & (lead > 0)
            level += np.where(now, quantity, 0.0)
            on_order += np.where(later, quantity, 0.0)
            inside = later & (t + lead < horizon)
            np.add.at(due, (rows[inside], (t + lead)[inside]), quantity[inside])
        total += parameters.holding_cost * np.maximum(level, 0.0)
    return total / horizon  # type: ignore[no-any-return]


def inventory_costs(
    policy: InventoryPolicy,
    demand_mean: float,
    horizon: int,
    replications: int,
    rng: np.random.Generator,
    parameters: InventoryParameters = InventoryParameters(),
) -> np.ndarray:
    """
    Vectorized :py:func:`inventory_cost` over `replications` independent
    replications.
    """
    _check_demand(demand_mean, horizon)
    demands = rng.exponential(demand_mean, size=(replications, horizon))
    leads = rng.poisson(parameters.lead_time_mean, size=(replications, horizon))
    return _inventory_batch(policy, demands, leads, parameters)


@dataclasses.dataclass(frozen=True)
class ParametricDistribution:
    """
    :param family: one of :py:data:`FAMILIES` or ``"constant"``
    :param params: ``(mu, sigma)`` of the log for lognormal,
        ``(shape, scale)`` for gamma and weibull, ``(scale,)`` for
        exponential, ``(value,)`` for constant
    """

    family: str
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        expected = {"lognormal": 2, "gamma": 2, "weibull": 2, "exponential": 1, "constant": 1}
        if self.family not in expected:
            raise ValueError(f"unknown distribution family {self.family!r}")
        if len(self.params) != expected[self.family]:
            raise ValueError(f"{self.family} takes {expected[self.family]} parameters, got {self.params!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def frozen(self) -> Any:
        p = self.params
        if self.family == "lognormal":
            return stats.lognorm(s=p[1], scale=math.exp(p[0]))
        if self.family == "gamma":
            return stats.gamma(a=p[0], scale=p[1])
        if self.family == "weibull":
            return stats.weibull_min(c=p[0], scale=p[1])
        if self.family == "exponential":
            return stats.expon(scale=p[0])
        raise ValueError("constant distributions have no scipy counterpart")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.family == "constant":
            return np.full(size, self.params[0])
        return np.asarray(self.frozen().rvs(size=size, random_state=rng), dtype=float)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.frozen().cdf(x), dtype=float)

    @property
    def mean(self) -> float:
        if self.family == "constant":
            return self.params[0]
        return float(self.frozen().mean())

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "params": list(self.params)}

    @override
    def __str__(self) -> str:
        return f"{self.family}({', '.join(f'{p:.6g}' for p in self.params)})"


TRUE_SERVICE: Final[ParametricDistribution] = ParametricDistribution("gamma", (2.0, 0.5))


class QueueCosts(NamedTuple):
    abandonment: float = 0.1
    waiting: float = 15.0
    staffing: float = 0.5


@dataclasses.dataclass(frozen=True)
class QueueScenario:
    servers: int
    service: ParametricDistribution
    arrival_mean: float = 0.1
    patience_mean: float = 3.0
    costs: QueueCosts = QueueCosts()

    def __post_init__(self) -> None:
        if self.servers < 1:
            raise ValueError(f"need at least one server, got {self.servers}")
        if self.arrival_mean <= 0 or self.patience_mean <= 0:
            raise ValueError("interarrival and patience means should be positive")


class QueueOutcome(NamedTuple):
    abandoned: int
    served: int
    mean_wait: float
    cost: float


def simulate_queue(scenario: QueueScenario, horizon_arrivals: int, rng: np.random.Generator) -> QueueOutcome:
    """
    Run the queue for `horizon_arrivals` arrivals. A customer starts
    service on the first server to free up after everyone ahead of them
    who stayed; they abandon if that start is later than their patience
    allows.
    """
    if horizon_arrivals < 1:
        raise ValueError(f"horizon should be at least 1 arrival, got {horizon_arrivals!r}")
    interarrivals = rng.exponential(scenario.arrival_mean, size=horizon_arrivals).tolist()
    services = scenario.service.sample(horizon_arrivals, rng).tolist()
    patience = rng.exponential(scenario.patience_mean, size=horizon_arrivals).tolist()
    free_at = [0.0] * scenario.servers
    now = 0.0
    abandoned = served = 0
    waiting = 0.0
    for arrival, service, limit in zip(interarrivals, services, patience):
        now += arrival
        start = max(now, free_at[0])
        wait = start - now
        if wait > limit:
            abandoned += 1
            continue
        heapq.heapreplace(free_at, start + service)
        served += 1
        waiting += wait
    mean_wait = waiting / served if served else 0.0
    costs = scenario.costs
    cost = costs.abandonment * abandoned + costs.waiting * mean_wait + costs.staffing * scenario.servers
    return QueueOutcome(abandoned, served, mean_wait, cost)


def queue_cost(scenario: QueueScenario, horizon_arrivals: int, rng: np.random.Generator) -> float:
    return simulate_queue(scenario, horizon_arrivals, rng).cost


def fit_guard(f: Callable[_PS, _T]) -> Callable[_PS, _T]:
    """
    Decorator. Any failure of a fitting routine becomes
    :py:class:`drrs.FitError` carrying ``sys.exc_info()``.
    """

    @functools.wraps(f)
    def wrapper(*args: _PS.args, **kwargs: _PS.kwargs) -> _T:
        family = args[0] if args else kwargs.get("family")
        try:
            return f(*args, **kwargs)
        except FitError:
            raise
        except Exception as exc:
            raise FitError(f"{family} fit failed: {exc}", family=str(family), reason=sys.exc_info()) from exc

    return wrapper


@fit_guard
def fit_family(family: str, observations: Sequence[float]) -> ParametricDistribution:
    """
    Maximum-likelihood fit with the location fixed at zero. Closed form
    for exponential and lognormal, iterative for gamma and weibull.

    :raises drrs.FitError: for degenerate data or a failed optimizer
    """
    x = np.asarray(observations, dtype=float)
    if family == "exponential":
        return ParametricDistribution(family, (float(x.mean()),))
    if np.ptp(x) == 0.0:
        raise FitError(f"{family} fit is degenerate for constant data", family=family)
    if family == "lognormal":
        logs = np.log(x)
        params: Tuple[float, ...] = (float(logs.mean()), float(logs.std()))
    elif family == "gamma":
        shape, _, scale = stats.gamma.fit(x, floc=0)
        params = (float(shape), float(scale))
    elif family == "weibull":
        shape, _, scale = stats.weibull_min.fit(x, floc=0)
        params = (float(shape), float(scale))
    else:
        raise ValueError(f"unknown family {family!r}")
    if not all(math.isfinite(p) for p in params) or params[-1] <= 0:
        raise FitError(f"{family} fit did not converge: {params}", family=family)
    return ParametricDistribution(family, params)


@dataclasses.dataclass(frozen=True)
class FittedMember:
    family: str
    distribution: Optional[ParametricDistribution]
    ks_statistic: float
    critical_value: float
    retained: bool
    note: str = ""

    @property
    def flagged(self) -> bool:
        return self.distribution is None

    def row(self) -> List[Any]:
        params = "" if self.distribution is None else " ".join(f"{p!r}" for p in self.distribution.params)
        return [self.family, params, self.ks_statistic, self.critical_value, int(self.retained), self.note]


@dataclasses.dataclass(frozen=True)
class AmbiguitySet:
    """
    Retained input distributions, with the fit report of every candidate
    family.
    """

    members: Tuple[FittedMember, ...]
    report: Tuple[FittedMember, ...] = ()

    def __post_init__(self) -> None:
        if not self.members:
            raise AmbiguitySetError("ambiguity set is empty")
        if len({m.distribution for m in self.members}) != len(self.members):
            raise AmbiguitySetError("ambiguity set members should be distinct")

    @property
    def distributions(self) -> Tuple[ParametricDistribution, ...]:
        return tuple(m.distribution for m in self.members if m.distribution is not None)

    @classmethod
    def from_distributions(cls, distributions: Sequence[ParametricDistribution]) -> "AmbiguitySet":
        """
        Ambiguity set given directly, bypassing the fit.
        """
        members = tuple(FittedMember(d.family, d, math.nan, math.nan, True, "given") for d in distributions)
        return cls(members, members)


def build_ambiguity_set(
    observations: Sequence[float],
    families: Sequence[str] = FAMILIES,
    alpha: float = 0.05,
) -> AmbiguitySet:
    """
    Fit every family to `observations` and retain those whose KS
    statistic against the fitted distribution is below the asymptotic
    critical value at level `alpha`. Fitted parameters are used as is.

    :raises drrs.AmbiguitySetError: for fewer than two or nonpositive
        observations, or when nothing is retained
    """
    x = np.asarray(observations, dtype=float)
    if x.size < 2:
        raise AmbiguitySetError(f"need at least 2 observations, got {x.size}")
    if not np.all(x > 0):
        raise AmbiguitySetError("observations should be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha should lie in (0, 1), got {alpha!r}")
    critical = float(stats.kstwobign.ppf(1.0 - alpha) / math.sqrt(x.size))
    report = []
    for family in families:
        try:
            distribution = fit_family(family, x)
        except FitError as exc:
            logger.warning("dropping %s: %s", family, exc)
            report.append(FittedMember(family, None, math.nan, critical, False, str(exc)))
            continue
        statistic = float(stats.kstest(x, distribution.cdf).statistic)
        report.append(FittedMember(family, distribution, statistic, critical, statistic < critical))
    members = tuple(m for m in report if m.retained)
    if not members:
        raise AmbiguitySetError(f"no family passed the KS test at level {alpha}")
    logger.info("ambiguity set: %s", ", ".join(str(m.distribution) for m in members))
    return AmbiguitySet(members, tuple(report))


@dataclasses.dataclass(frozen=True)
class InventorySimulator:
    """
    Alternatives are policies, input distributions are demand means.
    """

    policies: Tuple[InventoryPolicy, ...]
    demand_means: Tuple[float, ...]
    horizon: int = 1000
    parameters: InventoryParameters = InventoryParameters()
    tag: str = "inventory"

    def observe(self, scenario: ScenarioId, rng: np.random.Generator) -> float:
        i, j = scenario
        return inventory_cost(self.policies[i - 1], self.demand_means[j - 1], self.horizon, rng, self.parameters)

    def observe_many(self, scenario: ScenarioId, replications: int, rng: np.random.Generator) -> np.ndarray:
        i, j = scenario
        policy, demand = self.policies[i - 1], self.demand_means[j - 1]
        return inventory_costs(policy, demand, self.horizon, replications, rng, self.parameters)


@dataclasses.dataclass(frozen=True)
class QueueSimulator:
    """
    Alternatives are staffing levels, input distributions are service
    time distributions.
    """

    staffing: Tuple[int, ...]
    services: Tuple[ParametricDistribution, ...]
    horizon_arrivals: int = 1000
    arrival_mean: float = 0.1
    patience_mean: float = 3.0
    costs: QueueCosts = QueueCosts()
    tag: str = "queue"

    def scenario(self, scenario: ScenarioId) -> QueueScenario:
        i, j = scenario
        return QueueScenario(
            self.staffing[i - 1],
            self.services[j - 1],
            self.arrival_mean,
            self.patience_mean,
            self.costs,
        )

    def observe(self, scenario: ScenarioId, rng: np.random.Generator) -> float:
        return queue_cost(self.scenario(scenario), self.horizon_arrivals, rng)

    def observe_many(self, scenario: ScenarioId, replications: int, rng: np.random.Generator) -> np.ndarray:
        queue = self.scenario(scenario)
        return np.array([queue_cost(queue, self.horizon_arrivals, rng) for _ in range(replications)])


def estimate_means(
    simulator: Any,
    k: int,
    m: int,
    replications: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ground-truth means and variances of every scenario from `replications`
    independent replications each, on streams disjoint from any experiment
    replication.
    """
    if replications < 2:
        raise ValueError(f"need at least 2 replications, got {replications}")
    spec = StreamSpec(seed, replication=GROUND_TRUTH_REPLICATION)
    means = np.empty((k, m))
    variances = np.empty((k, m))
    for i in range(1, k + 1):
        for j in range(1, m + 1):
            costs = simulator.observe_many(ScenarioId(i, j), replications, substream(spec, i, j))
            means[i - 1, j - 1] = costs.mean()
            variances[i - 1, j - 1] = costs.var(ddof=1)
        logger.info("%s ground truth: alternative %d of %d done", simulator.tag, i, k)
    return means, np.maximum(variances, MIN_VARIANCE)


def inventory_instance(
    policies: Sequence[InventoryPolicy],
    demand_means: Sequence[float],
    *,
    horizon: int = 1000,
    replications: int = 10_000,
    seed: int = 0,
    parameters: InventoryParameters = InventoryParameters(),
) -> ProblemInstance:
    simulator = InventorySimulator(tuple(policies), tuple(float(d) for d in demand_means), horizon, parameters)
    means, variances = estimate_means(simulator, len(policies), len(demand_means), replications, seed)
    return ProblemInstance(means=means, variances=variances, backend=simulator.tag, simulator=simulator)


def queue_instance(
    staffing: Sequence[int],
    services: Sequence[ParametricDistribution],
    *,
    horizon_arrivals: int = 1000,
    replications: int = 5000,
    seed: int = 0,
) -> ProblemInstance:
    simulator = QueueSimulator(tuple(staffing), tuple(services), horizon_arrivals)
    means, variances = estimate_means(simulator, len(staffing), len(services), replications, seed)
    return ProblemInstance(means=means, variances=variances, backend=simulator.tag, simulator=simulator)


def service_sample(size: int, seed: int, truth: ParametricDistribution = TRUE_SERVICE) -> np.ndarray:
    """
    The input data sample the queue ambiguity set is fitted to.
    """
    return truth.sample(size, substream(StreamSpec(seed, replication=INPUT_DATA_REPLICATION)))
