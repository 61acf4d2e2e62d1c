"""
Sampling rules: given candidate scenarios and a step budget, return how
many observations each candidate gets.

Max-seeking rules look for the largest mean (the m-step hunts the
worst-case scenario of the current best), min-seeking rules for the
smallest (the k-step hunts the best worst-case).
"""

import abc
import logging
from typing import Final, List, Optional, Sequence

import numpy as np
from typing_extensions import Literal, TypeAlias, override

from .errors import AllocationError
from .model import ScenarioStats
from .posterior import belief_from_stats, draw_means, kg_score
from .types import Allocation, Direction, check_direction, check_probability
from .utils import first_argmax

__all__ = (
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
)

logger = logging.getLogger(__name__)

ExplorationMode: TypeAlias = Literal["uniform", "round_robin"]
DEFAULT_BETA: Final[float] = 0.5


def _one_hot(size: int, index: int) -> Allocation:
    values = [0] * size
    values[index] = 1
    return Allocation(values)


class BaseRule(abc.ABC):
    """
    Common part of the concrete rules.

    :param direction: ``"max"`` or ``"min"``
    :type direction: :py:class:`str`
    """

    tag: str = "base"
    needs_variance: bool = False
    binary: bool = False

    def __init__(self, direction: Direction = "max") -> None:
        self.direction: Direction = check_direction(direction)

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "max" else -1.0

    def spawn(self) -> "BaseRule":
        """
        Instance to use for one run. Stateless rules return themselves.
        """
        return self

    @abc.abstractmethod
    def allocate(
        self,
        candidates: Sequence[ScenarioStats],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        """
        :raises drrs.AllocationError: when the rule cannot serve the budget
        """

    def _require_single(self, candidates: Sequence[ScenarioStats], budget: int) -> None:
        if budget != 1:
            raise AllocationError(f"{self.tag} rule allocates exactly one observation, got budget {budget}")
        if not candidates:
            raise AllocationError(f"{self.tag} rule got no candidates")
        if self.needs_variance:
            short = [c.n for c in candidates if c.n < 2]
            if short:
                raise AllocationError(f"{self.tag} rule needs n >= 2 for every candidate, got sizes {short}")

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(direction={self.direction!r})"


class EqualRule(BaseRule):
    """
    Even split. A budget that is a multiple of the candidate count gives
    every candidate the same share; a budget not larger than the candidate
    count gives one observation to each of the first `budget` candidates
    in index order.
    """

    tag = "equal"

    @override
    def allocate(
        self,
        candidates: Sequence[ScenarioStats],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        size = len(candidates)
        if size == 0 or budget < 1:
            raise AllocationError(f"equal rule got {size} candidates and budget {budget}")
        if budget % size == 0:
            return Allocation([budget // size] * size)
        if budget < size:
            return Allocation([1] * budget + [0] * (size - budget))
        raise AllocationError(f"equal rule cannot split budget {budget} over {size} candidates")


class KGRule(BaseRule):
    """
    Knowledge gradient under unknown variance: the single observation goes
    to the candidate whose one-step value of information is largest.
    """

    tag = "kg"
    needs_variance = True
    binary = True

    def __init__(self, direction: Direction = "max", *, known_variance: bool = False) -> None:
        super().__init__(direction)
        self.known_variance = known_variance

    def scores(self, candidates: Sequence[ScenarioStats]) -> List[float]:
        beliefs = [belief_from_stats(c) for c in candidates]
        locs = [b.loc for b in beliefs]
        pick = max if self.direction == "max" else min
        scores = []
        for index, belief in enumerate(beliefs):
            others = locs[:index] + locs[index + 1 :]
            best_other = pick(others) if others else belief.loc
            scores.append(kg_score(belief, best_other, self.direction, known_variance=self.known_variance))
        return scores

    @override
    def allocate(
        self,
        candidates: Sequence[ScenarioStats],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        self._require_single(candidates, budget)
        return _one_hot(len(candidates), first_argmax(self.scores(candidates)))


class TTTSRule(BaseRule):
    """
    Top-two Thompson sampling. Posterior draws pick a leader; with
    probability `beta` it gets the observation, otherwise the draws are
    redone with the leader deactivated and the new arg-best gets it.
    """

    tag = "ttts"
    needs_variance = True
    binary = True

    def __init__(self, direction: Direction = "max", *, beta: float = DEFAULT_BETA) -> None:
        super().__init__(direction)
        self.beta = check_probability(beta, "beta")

    @override
    def allocate(
        self,
        candidates: Sequence[ScenarioStats],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        self._require_single(candidates, budget)
        if rng is None:
            raise AllocationError("ttts rule needs a random generator")
        size = len(candidates)
        beliefs = [belief_from_stats(c) for c in candidates]
        draws = self.sign * draw_means(beliefs, rng)
        leader = int(np.argmax(draws))
        if size == 1 or rng.random() < self.beta:
            return _one_hot(size, leader)
        rest = [index for index in range(size) if index != leader]
        redraws = self.sign * draw_means([beliefs[index] for index in rest], rng)
        return _one_hot(size, rest[int(np.argmax(redraws))])

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(direction={self.direction!r}, beta={self.beta!r})"


class EpsilonWrap(BaseRule):
    """
    With probability `epsilon` the step explores (uniformly at random or
    round-robin over the candidates), otherwise the wrapped rule decides.
    ``epsilon == 0`` never touches the generator.
    """

    tag = "epsilon"

    def __init__(self, rule: BaseRule, epsilon: float, *, mode: ExplorationMode = "uniform") -> None:
        super().__init__(rule.direction)
        self.rule = rule
        self.epsilon = check_probability(epsilon, "epsilon")
        if mode not in ("uniform", "round_robin"):
            raise ValueError(f"unknown exploration mode {mode!r}")
        self.mode: ExplorationMode = mode
        self.needs_variance = rule.needs_variance
        self.binary = rule.binary
        self.tag = f"{rule.tag}+eps"
        self._turn = 0

    @override
    def spawn(self) -> "EpsilonWrap":
        return EpsilonWrap(self.rule.spawn(), self.epsilon, mode=self.mode)

    def _explore(self, size: int, budget: int, rng: np.random.Generator) -> Allocation:
        if self.mode == "round_robin":
            values = [0] * size
            for _ in range(budget):
                values[self._turn % size] += 1
                self._turn += 1
            return Allocation(values)
        if budget <= size:
            values = [0] * size
            for index in rng.choice(size, size=budget, replace=False):
                values[int(index)] = 1
            return Allocation(values)
        return Allocation([int(v) for v in rng.multinomial(budget, [1.0 / size] * size)])

    @override
    def allocate(
        self,
        candidates: Sequence[ScenarioStats],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        if self.epsilon > 0.0:
            if rng is None:
                raise AllocationError("exploration needs a random generator")
            if rng.random() < self.epsilon:
                return self._explore(len(candidates), budget, rng)
        return self.rule.allocate(candidates, budget, rng)

    @override
    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.rule!r}, epsilon={self.epsilon!r}, mode={self.mode!r})"


def equal_rule(candidates: Sequence[ScenarioStats], budget: int) -> Allocation:
    return EqualRule().allocate(candidates, budget)


def kg_rule(
    candidates: Sequence[ScenarioStats],
    budget: int = 1,
    direction: Direction = "max",
    *,
    known_variance: bool = False,
) -> Allocation:
    return KGRule(direction, known_variance=known_variance).allocate(candidates, budget)


def ttts_rule(
    candidates: Sequence[ScenarioStats],
    budget: int = 1,
    direction: Direction = "max",
    beta: float = DEFAULT_BETA,
    *,
    rng: np.random.Generator,
) -> Allocation:
    return TTTSRule(direction, beta=beta).allocate(candidates, budget, rng)


def epsilon_wrap(rule: BaseRule, epsilon: float, *, mode: ExplorationMode = "uniform") -> EpsilonWrap:
    """
    Wrap `rule` with epsilon exploration, which guarantees every candidate
    keeps being sampled.

    :raises ValueError: for `epsilon` outside ``[0, 1]``
    """
    return EpsilonWrap(rule, epsilon, mode=mode)

