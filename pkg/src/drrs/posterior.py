"""
Normal-gamma beliefs about a scenario's unknown mean and variance.

Beliefs start from the noninformative limit and are only built once a
scenario has two or more observations. After `n` observations with
sample mean ``x`` and sum of squared deviations ``m2`` the belief is::

    loc = x, strength = n, shape = (n - 1) / 2, rate = m2 / 2

so the marginal of the mean is Student-t with ``2 * shape = n - 1``
degrees of freedom, centered at ``x`` with scale ``s / sqrt(n)``.
"""

import dataclasses
import math
from typing import Final, Sequence, Union

import numpy as np
from scipy import special

from .errors import InsufficientSamples
from .model import ScenarioStats
from .types import Direction, check_direction

__all__ = (
    "ConjugateBelief",
    "belief_from_stats",
    "draw_mean",
    "draw_means",
    "kg_score",
    "normal_kg_factor",
    "student_kg_factor",
)

_SQRT_2PI: Final[float] = math.sqrt(2 * math.pi)

ArrayLike = Union[float, np.ndarray]


@dataclasses.dataclass(frozen=True)
class ConjugateBelief:
    loc: float
    strength: float
    shape: float
    rate: float

    @property
    def degenerate(self) -> bool:
        """
        Zero observed spread, nothing left to learn.
        """
        return self.rate <= 0.0

    @property
    def dof(self) -> float:
        return 2.0 * self.shape

    @property
    def scale(self) -> float:
        """
        Scale of the Student-t marginal of the mean.
        """
        if self.degenerate:
            return 0.0
        return math.sqrt(self.rate / (self.shape * self.strength))

    @property
    def change_scale(self) -> float:
        """
        Scale of the predictive change of `loc` after one more observation.
        """
        if self.degenerate:
            return 0.0
        return math.sqrt(self.rate / (self.shape * self.strength * (self.strength + 1.0)))

    def negated(self) -> "ConjugateBelief":
        return dataclasses.replace(self, loc=-self.loc)


def belief_from_stats(stats: ScenarioStats) -> ConjugateBelief:
    """
    :raises drrs.InsufficientSamples: for fewer than two observations
    """
    if stats.n < 2:
        raise InsufficientSamples(stats.n)
    return ConjugateBelief(
        loc=stats.mean,
        strength=float(stats.n),
        shape=(stats.n - 1) / 2.0,
        rate=stats.m2 / 2.0,
    )


def draw_mean(belief: ConjugateBelief, rng: np.random.Generator) -> float:
    """
    One draw from the marginal posterior of the mean: a standard normal
    draw, then an independent chi-square draw with ``dof`` degrees of
    freedom, combined as ``loc + scale * z / sqrt(chi2 / dof)``.
    Degenerate beliefs return `loc` without touching `rng`.
    """
    if belief.degenerate:
        return belief.loc
    z = rng.standard_normal()
    chi2 = rng.chisquare(belief.dof)
    return belief.loc + belief.scale * z / math.sqrt(chi2 / belief.dof)


def draw_means(beliefs: Sequence[ConjugateBelief], rng: np.random.Generator) -> np.ndarray:
    """
    Vectorized :py:func:`draw_mean`: all normal draws first, then all
    chi-square draws, in candidate order. Every candidate consumes its
    draws, degenerate or not, so later candidates see the same randomness.
    """
    locs = np.array([b.loc for b in beliefs])
    scales = np.array([b.scale for b in beliefs])
    dofs = np.array([max(b.dof, 1.0) for b in beliefs])
    z = rng.standard_normal(len(beliefs))
    chi2 = rng.chisquare(dofs)
    return locs + scales * z / np.sqrt(chi2 / dofs)  # type: ignore[no-any-return]


def normal_kg_factor(z: ArrayLike) -> ArrayLike:
    """
    Known-variance knowledge-gradient factor ``z * Phi(z) + phi(z)``.

    ::

        >>> round(normal_kg_factor(0.0), 4)
        0.3989
    """
    z = np.asarray(z, dtype=float)
    value = z * special.ndtr(z) + np.exp(-0.5 * z * z) / _SQRT_2PI
    return float(value) if value.ndim == 0 else value


def student_kg_factor(z: ArrayLike, dof: ArrayLike) -> ArrayLike:
    """
    Expected positive part of ``z + T`` with `T` Student-t on `dof`
    degrees of freedom: ``z * F(z) + (dof + z^2) / (dof - 1) * f(z)``.
    Infinite for ``dof <= 1``.
    """
    z = np.asarray(z, dtype=float)
    dof = np.asarray(dof, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_norm = special.gammaln((dof + 1) / 2) - special.gammaln(dof / 2) - 0.5 * np.log(dof * math.pi)
        pdf = np.exp(log_norm - (dof + 1) / 2 * np.log1p(z * z / dof))
        value = z * special.stdtr(dof, z) + (dof + z * z) / (dof - 1) * pdf
    value = np.where(dof > 1, value, np.inf)
    return float(value) if value.ndim == 0 else value


def kg_score(
    belief: ConjugateBelief,
    best_other_value: float,
    direction: Direction = "max",
    *,
    known_variance: bool = False,
) -> float:
    """
    Value of information of one more observation of the candidate behind
    `belief` when the best competing posterior location is
    `best_other_value`. Min-seeking scores are computed on negated means.

    :param known_variance: use the normal factor with the sample variance
        plugged in instead of the Student-t predictive
    :type known_variance: :py:class:`bool`
    """
    if check_direction(direction) == "min":
        belief = belief.negated()
        best_other_value = -best_other_value
    if belief.degenerate:
        return 0.0
    sigma = belief.change_scale
    z = -abs(belief.loc - best_other_value) / sigma
    if known_variance:
        return sigma * float(normal_kg_factor(z))
    return sigma * float(student_kg_factor(z, belief.dof))
