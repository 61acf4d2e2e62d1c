"""
Reproducible per-scenario observation streams.

Every stream is keyed by ``(master_seed, replication, alternative,
distribution)`` through :py:class:`numpy.random.SeedSequence` spawn keys
and backed by a counter-based :py:class:`numpy.random.Philox` generator,
so a procedure run and the last-exit oracle read the very same
observations no matter in which order or process they are opened.
"""

import dataclasses
import logging
from typing import Callable, Dict, Final, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Self, override

from .errors import HorizonExceeded, InstanceError
from .model import GAUSSIAN, ProblemInstance, ScenarioId

__all__ = (
    "BLOCK_SIZE",
    "MAX_HORIZON",
    "StreamSpec",
    "ScenarioStream",
    "StreamSet",
    "open_stream",
    "open_streams",
    "prefix_means",
    "substream",
)

logger = logging.getLogger(__name__)

BLOCK_SIZE: Final[int] = 4096
MAX_HORIZON: Final[int] = 2**48
# scenario indices are 1-based, so (0, 0) never collides with a scenario key
RULE_STREAM: Final[Tuple[int, int]] = (0, 0)


@dataclasses.dataclass(frozen=True)
class StreamSpec:
    """
    :param master_seed: experiment seed
    :type master_seed: :py:class:`int`

    :param replication: macro-replication index
    :type replication: :py:class:`int`

    :param horizon: maximum observations per scenario, :py:class:`None`
        means "derive from the budget"
    :type horizon: :py:class:`int` or :py:class:`None`
    """

    master_seed: int
    replication: int = 0
    horizon: Optional[int] = None

    def __post_init__(self) -> None:
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ValueError(f"master_seed should be a 64-bit unsigned integer, got {self.master_seed!r}")
        if self.replication < 0:
            raise ValueError(f"replication should be nonnegative, got {self.replication!r}")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError(f"horizon should be at least 1, got {self.horizon!r}")

    def with_horizon(self, horizon: int) -> "StreamSpec":
        return dataclasses.replace(self, horizon=horizon)

    def for_replication(self, replication: int) -> "StreamSpec":
        return dataclasses.replace(self, replication=replication)


def substream(spec: StreamSpec, *key: int) -> np.random.Generator:
    """
    Independent generator for ``(master_seed, replication, *key)``.
    """
    seed = np.random.SeedSequence(spec.master_seed, spawn_key=(spec.replication, *key))
    return np.random.Generator(np.random.Philox(seed))


class ScenarioStream:
    """
    Lazily generated observation sequence of one scenario.

    ::

        >>> stream = ScenarioStream.from_values(ScenarioId(1, 1), [1.0, 2.0])
        >>> next(stream), next(stream)
        (1.0, 2.0)
    """

    def __init__(
        self,
        scenario: ScenarioId,
        horizon: int,
        produce: Callable[[int, int], List[float]],
        *,
        block: int = BLOCK_SIZE,
    ) -> None:
        if horizon > MAX_HORIZON:
            raise HorizonExceeded(scenario, horizon)
        self.scenario = scenario
        self.horizon = horizon
        self.cursor = 0
        self._produce = produce
        self._block = max(1, block)
        self._values: List[float] = []

    @classmethod
    def from_values(cls, scenario: ScenarioId, values: Sequence[float]) -> Self:
        fixed = [float(v) for v in values]
        return cls(scenario, len(fixed), lambda start, count: fixed[start : start + count], block=len(fixed))

    def _ensure(self, n: int) -> None:
        if n > self.horizon:
            raise HorizonExceeded(self.scenario, self.horizon)
        while len(self._values) < n:
            # whole blocks only, so values never depend on the horizon
            self._values.extend(self._produce(len(self._values), self._block))

    def next(self) -> float:
        """
        Observation at the cursor, advancing the cursor.

        :raises drrs.HorizonExceeded: when the horizon is used up
        """
        self._ensure(self.cursor + 1)
        value = self._values[self.cursor]
        self.cursor += 1
        return value

    def __next__(self) -> float:
        return self.next()

    def __iter__(self) -> Iterator[float]:
        return self

    def values(self, n: int) -> List[float]:
        self._ensure(n)
        return self._values[:n]

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(scenario={self.scenario}, cursor={self.cursor}, horizon={self.horizon})"


def _gaussian_producer(mean: float, std: float, rng: np.random.Generator) -> Callable[[int, int], List[float]]:
    def produce(start: int, count: int) -> List[float]:
        return rng.normal(mean, std, size=count).tolist()  # type: ignore[no-any-return]

    return produce


def _simulator_producer(
    instance: ProblemInstance,
    scenario: ScenarioId,
    spec: StreamSpec,
) -> Callable[[int, int], List[float]]:
    simulator = instance.simulator
    assert simulator is not None

    def produce(start: int, count: int) -> List[float]:
        # one full simulation replication per observation, keyed by its index
        return [
            float(simulator.observe(scenario, substream(spec, scenario.alternative, scenario.distribution, n)))
            for n in range(start, start + count)
        ]

    return produce


def open_stream(instance: ProblemInstance, scenario: ScenarioId, spec: StreamSpec) -> ScenarioStream:
    """
    Open the stream of `scenario` for the replication described by `spec`.

    :raises drrs.InstanceError: for scenarios outside the instance
    :raises drrs.HorizonExceeded: for horizons beyond :py:data:`MAX_HORIZON`
    """
    scenario = instance.check_scenario(scenario)
    if spec.horizon is None:
        raise ValueError("stream horizon is not set")
    i, j = scenario
    if instance.backend == GAUSSIAN:
        rng = substream(spec, i, j)
        std = float(np.sqrt(instance.variances[i - 1, j - 1]))
        produce = _gaussian_producer(float(instance.means[i - 1, j - 1]), std, rng)
        block = BLOCK_SIZE
    else:
        produce = _simulator_producer(instance, scenario, spec)
        block = 1
    return ScenarioStream(scenario, spec.horizon, produce, block=block)


class StreamSet:
    """
    The k x m streams of one replication plus the replication's rule
    substream (posterior draws and exploration coins).
    """

    def __init__(
        self,
        streams: Dict[ScenarioId, ScenarioStream],
        k: int,
        m: int,
        rule_rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.streams = streams
        self.k = k
        self.m = m
        self.rule_rng = rule_rng if rule_rng is not None else np.random.Generator(np.random.Philox(0))

    @classmethod
    def from_values(
        cls,
        values: Sequence[Sequence[Sequence[float]]],
        rule_rng: Optional[np.random.Generator] = None,
    ) -> Self:
        """
        Stub streams from a k x m nest of observation lists.
        """
        k, m = len(values), len(values[0])
        if any(len(row) != m for row in values):
            raise InstanceError("stub values should form a k x m nest")
        streams = {
            ScenarioId(i + 1, j + 1): ScenarioStream.from_values(ScenarioId(i + 1, j + 1), values[i][j])
            for i in range(k)
            for j in range(m)
        }
        return cls(streams, k, m, rule_rng)

    def __getitem__(self, scenario: Tuple[int, int]) -> ScenarioStream:
        return self.streams[ScenarioId(*scenario)]

    def draw(self, alternative: int, distribution: int) -> float:
        return self.streams[ScenarioId(alternative, distribution)].next()


def open_streams(instance: ProblemInstance, spec: StreamSpec) -> StreamSet:
    streams = {scenario: open_stream(instance, scenario, spec) for scenario in instance.scenarios()}
    return StreamSet(streams, instance.k, instance.m, substream(spec, *RULE_STREAM))


def prefix_means(stream: ScenarioStream, n: int) -> np.ndarray:
    """
    Sample means of the first ``1..n`` observations of `stream`, computed
    in the same summation order as :py:class:`drrs.ScenarioStats`.
    Element ``t - 1`` is the mean of the first `t` observations.

    :raises drrs.HorizonExceeded: when `n` exceeds the horizon
    """
    values = np.asarray(stream.values(n), dtype=float)
    return np.cumsum(values) / np.arange(1, n + 1)
