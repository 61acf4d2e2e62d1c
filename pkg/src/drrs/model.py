"""
Problem instances, per-scenario running statistics and procedure state.

Indices are 1-based everywhere they cross a public boundary (scenario ids,
selections, logs). Arrays are stored 0-based.
"""

import copy
import dataclasses
import logging
import math
from typing import Any, Dict, Final, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Protocol, Self, override

from .errors import InstanceError, InsufficientSamples
from .types import Provenance

__all__ = (
    "GAUSSIAN",
    "ScenarioId",
    "ScenarioSimulator",
    "ProblemInstance",
    "ScenarioStats",
    "AllocationState",
    "sc_config",
    "mm_config",
    "update_stats",
)

logger = logging.getLogger(__name__)

GAUSSIAN: Final[str] = "gaussian"


class ScenarioId(NamedTuple):
    """
    Scenario `(i, j)`: alternative `i` simulated under input distribution `j`.
    Both indices are 1-based.
    """

    alternative: int
    distribution: int

    @override
    def __str__(self) -> str:
        return f"({self.alternative},{self.distribution})"


class ScenarioSimulator(Protocol):
    """
    Backend producing one observation of a scenario per call. Testbeds
    implement it; the analytic Gaussian backend does not need it.
    """

    @property
    def tag(self) -> str:
        raise NotImplementedError

    def observe(self, scenario: ScenarioId, rng: np.random.Generator) -> float:
        raise NotImplementedError


@dataclasses.dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    The k x m matrix of scenario means and variances plus a sampling backend.

    :param means: k x m array of true (or ground-truth estimated) means
    :type means: :py:class:`numpy.ndarray`

    :param variances: k x m array of positive variances
    :type variances: :py:class:`numpy.ndarray`

    :param backend: ``"gaussian"`` or a testbed tag
    :type backend: :py:class:`str`

    :param canonical: rows nonincreasing in `j`, worst-case column
        nondecreasing in `i` with a strict gap between the first two
    :type canonical: :py:class:`bool`

    :param simulator: observation source for testbed backends
    """

    means: np.ndarray
    variances: np.ndarray
    backend: str = GAUSSIAN
    canonical: bool = False
    simulator: Optional[ScenarioSimulator] = dataclasses.field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        means = np.array(self.means, dtype=float)
        variances = np.array(self.variances, dtype=float)
        if means.ndim != 2 or means.shape != variances.shape:
            raise InstanceError(f"means {means.shape} and variances {variances.shape} should be equal k x m matrices")
        k, m = means.shape
        if k < 2 or m < 1:
            raise InstanceError(f"need k >= 2 and m >= 1, got k={k}, m={m}")
        if not np.all(np.isfinite(means)):
            raise InstanceError("means should be finite")
        if not np.all(variances > 0) or not np.all(np.isfinite(variances)):
            raise InstanceError("variances should be positive and finite")
        if self.backend != GAUSSIAN and self.simulator is None:
            raise InstanceError(f"backend {self.backend!r} needs a simulator")
        means.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        if self.canonical and not self.is_canonical():
            raise InstanceError("instance flagged canonical does not satisfy the canonical ordering")

    @property
    def k(self) -> int:
        return int(self.means.shape[0])

    @property
    def m(self) -> int:
        return int(self.means.shape[1])

    @property
    def worst_case_means(self) -> np.ndarray:
        return self.means.max(axis=1)

    @property
    def worst_case_scenarios(self) -> Tuple[int, ...]:
        """
        1-based index of the largest-mean scenario per alternative.
        """
        return tuple(int(j) + 1 for j in self.means.argmax(axis=1))

    @property
    def best(self) -> int:
        """
        1-based index of the alternative with the smallest worst-case mean.
        """
        return int(np.argmin(self.worst_case_means)) + 1

    @property
    def delta(self) -> float:
        """
        Gap between the two smallest worst-case means.
        """
        ordered = np.sort(self.worst_case_means)
        return float(ordered[1] - ordered[0])

    def is_canonical(self) -> bool:
        rows_ok = bool(np.all(np.diff(self.means, axis=1) <= 0))
        worst = self.means[:, 0]
        column_ok = bool(np.all(np.diff(worst[1:]) >= 0)) and worst[1] > worst[0]
        return rows_ok and column_ok

    def default_b_delta(self) -> float:
        """
        Midpoint between the smallest and the second smallest worst-case means.
        """
        ordered = np.sort(self.worst_case_means)
        return float((ordered[0] + ordered[1]) / 2)

    def check_scenario(self, scenario: ScenarioId) -> ScenarioId:
        i, j = scenario
        if not (1 <= i <= self.k and 1 <= j <= self.m):
            raise InstanceError(f"scenario {scenario} outside 1..{self.k} x 1..{self.m}")
        return ScenarioId(i, j)

    def scenarios(self) -> List[ScenarioId]:
        return [ScenarioId(i, j) for i in range(1, self.k + 1) for j in range(1, self.m + 1)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "m": self.m,
            "means": [float(x) for x in self.means.ravel()],
            "variances": [float(x) for x in self.variances.ravel()],
            "backend": self.backend,
            "canonical": self.canonical,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], *, simulator: Optional[ScenarioSimulator] = None) -> Self:
        try:
            k, m = int(data["k"]), int(data["m"])
            means = np.asarray(data["means"], dtype=float)
            variances = np.asarray(data["variances"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed instance data: {exc}") from exc
        if means.size != k * m or variances.size != k * m:
            raise InstanceError(f"expected {k * m} row-major entries for means and variances")
        return cls(
            means=means.reshape(k, m),
            variances=variances.reshape(k, m),
            backend=data.get("backend", GAUSSIAN),
            canonical=bool(data.get("canonical", False)),
            simulator=simulator,
        )

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(k={self.k}, m={self.m}, backend={self.backend!r})"


def sc_config(k: int, m: int, gap: float, variance: float) -> ProblemInstance:
    """
    Slippage configuration: alternative 1 has mean 0 under every input
    distribution, all others have mean `gap`.

    ::

        >>> sc_config(2, 2, 0.5, 25.0).means
        array([[0. , 0. ],
               [0.5, 0.5]])
    """
    if gap <= 0:
        raise InstanceError(f"gap should be positive, got {gap!r}")
    if variance <= 0:
        raise InstanceError(f"variance should be positive, got {variance!r}")
    means = np.full((k, m), float(gap))
    means[0, :] = 0.0
    return ProblemInstance(means=means, variances=np.full((k, m), float(variance)), canonical=True)


def mm_config(k: int, m: int, variance: float) -> ProblemInstance:
    """
    Monotone means configuration: mean of scenario (i, j) is
    ``0.3 (i - 1) - 0.1 (j - 1)``.
    """
    if variance <= 0:
        raise InstanceError(f"variance should be positive, got {variance!r}")
    i = np.arange(k, dtype=float)[:, None]
    j = np.arange(m, dtype=float)[None, :]
    means = 0.3 * i - 0.1 * j
    return ProblemInstance(means=means, variances=np.full((k, m), float(variance)), canonical=True)


class ScenarioStats:
    """
    Running statistics of one scenario, split by provenance.

    The mean is kept as ``total / n`` with ``total`` accumulated in
    observation order, so it matches ``cumsum(x) / arange(1, n + 1)``
    bit for bit. ``m2`` is the running sum of squared deviations.
    """

    __slots__ = ("n", "n_init", "n_m", "n_k", "total", "mean", "m2")

    def __init__(self) -> None:
        self.n = 0
        self.n_init = 0
        self.n_m = 0
        self.n_k = 0
        self.total = 0.0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, x: float, provenance: Provenance) -> Self:
        old_mean = self.mean
        self.n += 1
        self.total += x
        self.mean = self.total / self.n
        self.m2 += (x - old_mean) * (x - self.mean)
        if self.m2 < 0.0:
            self.m2 = 0.0
        if provenance == "m":
            self.n_m += 1
        elif provenance == "k":
            self.n_k += 1
        else:
            self.n_init += 1
        return self

    @property
    def variance(self) -> float:
        """
        Unbiased sample variance.

        :raises drrs.InsufficientSamples: when fewer than two observations
        """
        if self.n < 2:
            raise InsufficientSamples(self.n)
        return self.m2 / (self.n - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def copy(self) -> "ScenarioStats":
        return copy.copy(self)

    def reflected(self, pivot: float) -> "ScenarioStats":
        """
        Snapshot of the statistics of the observations mirrored about
        `pivot`, i.e. of ``2 * pivot - x``. Spread is unchanged.
        """
        other = self.copy()
        other.mean = 2.0 * pivot - self.mean
        other.total = other.mean * self.n
        return other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioStats):
            return NotImplemented
        return all(getattr(self, name) == getattr(other, name) for name in self.__slots__)

    __hash__ = None  # type: ignore[assignment]

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(n={self.n}, mean={self.mean!r}, m2={self.m2!r})"


def update_stats(stats: ScenarioStats, x: float, provenance: Provenance) -> ScenarioStats:
    """
    Fold one observation into `stats`.

    :raises ValueError: for non-finite observations
    """
    if not math.isfinite(x):
        raise ValueError(f"observation should be finite, got {x!r}")
    return stats.update(float(x), provenance)


@dataclasses.dataclass
class AllocationState:
    """
    Full procedure state of one replication. Counters follow the round
    ledger: every round adds one m-step round to the current best and one
    k-step round to every other alternative.
    """

    k: int
    m: int
    budget: int
    stats: List[List[ScenarioStats]] = dataclasses.field(default_factory=list)
    r_m: List[int] = dataclasses.field(default_factory=list)
    r_k: List[int] = dataclasses.field(default_factory=list)
    rounds: int = 0
    consumed: int = 0
    per_round_best: List[int] = dataclasses.field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.stats:
            self.stats = [[ScenarioStats() for _ in range(self.m)] for _ in range(self.k)]
        if not self.r_m:
            self.r_m = [0] * self.k
        if not self.r_k:
            self.r_k = [0] * self.k

    def means(self) -> List[List[float]]:
        return [[s.mean for s in row] for row in self.stats]

    def sizes(self) -> List[List[int]]:
        return [[s.n for s in row] for row in self.stats]

    def check_ledger(self) -> None:
        assert sum(self.r_m) == self.rounds
        assert sum(self.r_k) == self.rounds * (self.k - 1)
        assert self.consumed == sum(map(sum, self.sizes())) <= self.budget

    def stats_at(self, scenarios: Sequence[ScenarioId]) -> List[ScenarioStats]:
        return [self.stats[i - 1][j - 1] for i, j in scenarios]
