from typing import TYPE_CHECKING, List, NewType, Optional, Protocol, Sequence

import numpy as np
from typing_extensions import Literal, TypeAlias

if TYPE_CHECKING:
    from .model import ScenarioStats

__all__ = (
    "Direction",
    "Provenance",
    "Allocation",
    "SamplingRule",
    "check_allocation",
    "check_direction",
    "check_probability",
)

Direction: TypeAlias = Literal["max", "min"]
Provenance: TypeAlias = Literal["init", "m", "k"]

Allocation = NewType("Allocation", List[int])


class SamplingRule(Protocol):
    """
    Maps a candidate scenario set and a step budget to a nonnegative integer
    allocation vector summing to the budget.
    """

    @property
    def tag(self) -> str:
        raise NotImplementedError

    @property
    def direction(self) -> Direction:
        raise NotImplementedError

    @property
    def needs_variance(self) -> bool:
        raise NotImplementedError

    @property
    def binary(self) -> bool:
        raise NotImplementedError

    def spawn(self) -> "SamplingRule":
        raise NotImplementedError

    def allocate(
        self,
        candidates: Sequence["ScenarioStats"],
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Allocation:
        raise NotImplementedError


def check_allocation(values: Sequence[int], budget: int, *, binary: bool = False) -> Allocation:
    if any(v < 0 for v in values):
        raise ValueError(f"Allocation has negative entries: {list(values)}")
    if sum(values) != budget:
        raise ValueError(f"Allocation {list(values)} does not sum to budget {budget}")
    if binary and any(v > 1 for v in values):
        raise ValueError(f"Allocation {list(values)} is not in {{0, 1}} per scenario")
    return Allocation(list(values))


def check_direction(direction: str) -> Direction:
    if direction not in ("max", "min"):
        raise ValueError(f"Direction should be 'max' or 'min', got {direction!r}")
    return direction  # type: ignore[return-value]


def check_probability(value: float, name: str = "probability") -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} should be in [0, 1], got {value!r}")
    return value
