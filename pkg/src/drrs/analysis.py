"""
Last-exit-time oracles, the computable probability bounds of the additive
procedures and the allocation-pattern metrics.

The last exit time of a prefix-mean path from a boundary is the last
sample size at which the path is beyond the boundary, 0 if it never is.
Suprema over an infinite path are approximated on a finite horizon `H`
chosen so that the exponential tail of a later crossing stays below a
tolerance; results that cannot be certified are marked unresolved.
"""

import dataclasses
import logging
import math
from typing import Callable, Final, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from typing_extensions import Literal, TypeAlias

from .errors import InstanceError
from .model import ProblemInstance, ScenarioId
from .procedures import RunRecord
from .streams import StreamSet, StreamSpec, open_streams, prefix_means

__all__ = (
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
)

logger = logging.getLogger(__name__)

GUARD_TOLERANCE: Final[float] = 1e-6
DEFAULT_MAX_HORIZON: Final[int] = 10_000_000
BoundForm: TypeAlias = Literal["ec", "main"]


class LastExitResult(NamedTuple):
    value: int
    resolved: bool
    horizon: int


def guard_horizon(gap: float, tolerance: float = GUARD_TOLERANCE) -> int:
    """
    Smallest horizon `H` with ``2 * exp(-H * gap**2 / 2) < tolerance`` for
    a standardized boundary gap `gap`.

    :raises ValueError: for a nonpositive gap or tolerance
    """
    if gap <= 0 or tolerance <= 0:
        raise ValueError(f"gap and tolerance should be positive, got {gap!r} and {tolerance!r}")
    return max(1, math.floor(2.0 * math.log(2.0 / tolerance) / (gap * gap)) + 1)


def _resolved(value: int, horizon: int, gap: Optional[float], tolerance: float) -> bool:
    if gap is None:
        return value < horizon
    return gap > 0 and 2.0 * math.exp(-horizon * gap * gap / 2.0) < tolerance


def _last_exit(hits: np.ndarray) -> int:
    indices = np.flatnonzero(hits)
    return int(indices[-1]) + 1 if indices.size else 0


def last_exit_upper(
    means: Sequence[float],
    b: float,
    horizon: Optional[int] = None,
    *,
    gap: Optional[float] = None,
    tolerance: float = GUARD_TOLERANCE,
) -> LastExitResult:
    """
    Largest ``n <= H`` whose prefix mean is at or above `b`, 0 if none.

    :param gap: standardized distance between `b` and the true mean; with
        it the result is resolved when the tail past `H` is below
        `tolerance`, without it when the last crossing is before `H`
    """
    path = np.asarray(means, dtype=float)
    horizon = path.size if horizon is None else min(horizon, path.size)
    value = _last_exit(path[:horizon] >= b)
    return LastExitResult(value, _resolved(value, horizon, gap, tolerance), horizon)


def last_exit_lower(
    means: Sequence[float],
    b: float,
    horizon: Optional[int] = None,
    *,
    gap: Optional[float] = None,
    tolerance: float = GUARD_TOLERANCE,
) -> LastExitResult:
    """
    Largest ``n <= H`` whose prefix mean is at or below `b`, 0 if none.
    """
    path = np.asarray(means, dtype=float)
    horizon = path.size if horizon is None else min(horizon, path.size)
    value = _last_exit(path[:horizon] <= b)
    return LastExitResult(value, _resolved(value, horizon, gap, tolerance), horizon)


class SBound(NamedTuple):
    value: int
    unresolved: Tuple[ScenarioId, ...]

    @property
    def resolved(self) -> bool:
        return not self.unresolved


def _check_b_delta(instance: ProblemInstance, b_delta: Optional[float]) -> float:
    if not instance.canonical:
        raise InstanceError("bounds need an instance in canonical ordering")
    if b_delta is None:
        return instance.default_b_delta()
    low, high = instance.means[0, 0], instance.means[1, 0]
    if not low < b_delta < high:
        raise InstanceError(f"b_delta should lie in ({low}, {high}), got {b_delta!r}")
    return b_delta


def _gaps(instance: ProblemInstance, b_delta: float) -> np.ndarray:
    return np.abs(b_delta - instance.means) / np.sqrt(instance.variances)  # type: ignore[no-any-return]


def oracle_horizon(
    instance: ProblemInstance,
    b_delta: Optional[float] = None,
    *,
    tolerance: float = GUARD_TOLERANCE,
    max_horizon: int = DEFAULT_MAX_HORIZON,
) -> int:
    """
    Horizon certifying every last exit time entering S(b_delta): the
    upper exits of alternative 1 and, per other alternative, the lower
    exits of its scenarios above the boundary.
    """
    b_delta = _check_b_delta(instance, b_delta)
    gaps = _gaps(instance, b_delta)
    relevant = [gaps[0, j] for j in range(instance.m)]
    relevant += [gaps[i, j] for i in range(1, instance.k) for j in range(instance.m) if instance.means[i, j] > b_delta]
    return min(max_horizon, max(guard_horizon(float(g), tolerance) for g in relevant))


def s_bound(
    instance: ProblemInstance,
    streams: StreamSet,
    b_delta: Optional[float] = None,
    horizon: Optional[int] = None,
    *,
    tolerance: float = GUARD_TOLERANCE,
) -> SBound:
    """
    Sum over the non-best alternatives of the smallest lower last exit time
    of their scenarios, plus the upper last exit times of every scenario of
    the best alternative. On shared streams it bounds the number of k-steps
    AA ever spends on the best alternative.

    An alternative's term is resolved when its minimum is attained by a
    scenario above the boundary whose own guard passes; truncation can
    only shorten exit times, so that minimum is exact.
    """
    b_delta = _check_b_delta(instance, b_delta)
    if horizon is None:
        horizon = oracle_horizon(instance, b_delta, tolerance=tolerance)
    gaps = _gaps(instance, b_delta)
    total = 0
    unresolved: List[ScenarioId] = []
    for j in range(instance.m):
        scenario = ScenarioId(1, j + 1)
        path = prefix_means(streams[scenario], horizon)
        result = last_exit_upper(path, b_delta, gap=float(gaps[0, j]), tolerance=tolerance)
        total += result.value
        if not result.resolved:
            unresolved.append(scenario)
    for i in range(1, instance.k):
        results = []
        for j in range(instance.m):
            above = bool(instance.means[i, j] > b_delta)
            path = prefix_means(streams[(i + 1, j + 1)], horizon)
            gap = float(gaps[i, j]) if above else None
            result = last_exit_lower(path, b_delta, gap=gap, tolerance=tolerance)
            results.append((result.value, above and result.resolved))
        smallest = min(value for value, _ in results)
        total += smallest
        if not any(ok for value, ok in results if value == smallest):
            first = min(j for j, (value, _) in enumerate(results) if value == smallest)
            unresolved.append(ScenarioId(i + 1, first + 1))
    if unresolved:
        logger.warning("unresolved last exit times at %s (horizon %d)", ", ".join(map(str, unresolved)), horizon)
    return SBound(total, tuple(unresolved))


class BoundEstimate(NamedTuple):
    value: float
    se: float
    replications: int
    unresolved: int


def _proportion(successes: int, trials: int) -> Tuple[float, float]:
    if trials == 0:
        return 0.0, 0.0
    p = successes / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def aa_round_count(instance: ProblemInstance, budget: int) -> int:
    k, m = instance.k, instance.m
    return (budget - m * k) // (m + k - 1)


def pcs_lower_bound_mc(
    instance: ProblemInstance,
    budget: int,
    b_delta: Optional[float],
    replications: int,
    spec: StreamSpec,
    *,
    tolerance: float = GUARD_TOLERANCE,
    horizon: Optional[int] = None,
    stream_factory: Optional[Callable[[int], StreamSet]] = None,
) -> BoundEstimate:
    """
    Monte Carlo estimate of the probability that the AA round count
    ``floor((N - mk) / (m + k - 1))`` exceeds ``2 S(b_delta)``, a lower
    bound on the PCS of AA. Replications with unresolved components are
    left out and counted; leaving them out biases the estimate upwards
    when they are the ones with large exit times.

    :param stream_factory: replication index to streams, replaces the
        streams opened from `spec`
    """
    if budget < instance.k * instance.m:
        raise ValueError(f"budget {budget} is below k * m = {instance.k * instance.m}")
    b_delta = _check_b_delta(instance, b_delta)
    if horizon is None:
        horizon = oracle_horizon(instance, b_delta, tolerance=tolerance)
    rounds = aa_round_count(instance, budget)
    hits = used = skipped = 0
    for replication in range(replications):
        if stream_factory is None:
            streams = open_streams(instance, dataclasses.replace(spec, replication=replication, horizon=horizon))
        else:
            streams = stream_factory(replication)
        bound = s_bound(instance, streams, b_delta, horizon, tolerance=tolerance)
        if not bound.resolved:
            skipped += 1
            continue
        used += 1
        hits += rounds > 2 * bound.value
    if skipped:
        logger.warning("%d of %d replications left out of the bound estimate (unresolved)", skipped, replications)
    value, se = _proportion(hits, used)
    return BoundEstimate(value, se, used, skipped)


def pics_bound_prop1(
    instance: ProblemInstance,
    budget: int,
    b_delta: Optional[float] = None,
    *,
    form: BoundForm = "ec",
) -> float:
    """
    Additive exponential bound on the PICS of AA with
    ``r = floor((N - mk) / (2 (m + k - 1)**2))``, clamped to ``[0, 1]``.

    :param form: ``"ec"`` divides every squared gap by ``2 sigma**2``,
        ``"main"`` by ``sigma**2``
    """
    if budget < instance.k * instance.m:
        raise ValueError(f"budget {budget} is below k * m = {instance.k * instance.m}")
    if form not in ("ec", "main"):
        raise ValueError(f"unknown bound form {form!r}")
    b_delta = _check_b_delta(instance, b_delta)
    k, m = instance.k, instance.m
    r = (budget - m * k) // (2 * (m + k - 1) ** 2)
    scale = 2.0 if form == "ec" else 1.0
    means, variances = instance.means, instance.variances
    total = 0.0
    for i in range(1, k):
        above = means[i] > b_delta
        exponent = float(np.sum((means[i][above] - b_delta) ** 2 / (scale * variances[i][above])))
        total += 2.0 ** int(np.count_nonzero(above)) * math.exp(-r * exponent)
    for j in range(m):
        total += 2.0 * math.exp(-r * (b_delta - means[0, j]) ** 2 / (scale * variances[0, j]))
    return min(1.0, max(0.0, total))


def _check_boundary(b: float) -> None:
    if b <= 0:
        raise ValueError(f"boundary should be positive, got {b!r}")


def tail_bound_lemma3(n: int, b: float) -> float:
    """
    ``2 exp(-n b**2 / 2)``, bounding the chance that a standard-normal
    prefix-mean path is at or above `b` after sample size `n`. Clamped to 1.
    """
    _check_boundary(b)
    if n < 1:
        raise ValueError(f"n should be at least 1, got {n!r}")
    return min(1.0, 2.0 * math.exp(-n * b * b / 2.0))


def zero_exit_bound_ec6(b: float) -> float:
    """
    ``1 - exp(-b**2 / 2)``, a lower bound on the chance that a
    standard-normal prefix-mean path never reaches `b`.
    """
    _check_boundary(b)
    return 1.0 - math.exp(-b * b / 2.0)


def simulate_last_exits(
    b: float,
    replications: int,
    horizon: int,
    seed: int,
    *,
    chunk: int = 2048,
) -> np.ndarray:
    """
    Upper last exit times from `b` of `replications` independent
    standard-normal prefix-mean paths truncated at `horizon`.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    counts = np.arange(1, horizon + 1)
    exits = np.empty(replications, dtype=np.int64)
    for start in range(0, replications, chunk):
        size = min(chunk, replications - start)
        paths = np.cumsum(rng.standard_normal((size, horizon)), axis=1) / counts
        hits = paths >= b
        last = horizon - np.argmax(hits[:, ::-1], axis=1)
        exits[start : start + size] = np.where(hits.any(axis=1), last, 0)
    return exits


class NonNecessity(NamedTuple):
    value: Optional[float]
    applicable: bool
    reason: str = ""


def _nonnecessity_terms(instance: ProblemInstance, b_delta: float, n0: Optional[int]) -> Tuple[float, List[NonNecessity]]:
    means, stds = instance.means, np.sqrt(instance.variances)
    b = 1.0 - np.exp(-((b_delta - means) ** 2) / (2.0 * instance.variances))
    best_product = float(np.prod(b[0]))
    results = []
    for i in range(instance.k):
        if i == 0:
            results.append(NonNecessity(None, False, "alternative 1 is the best"))
            continue
        if not means[0, 0] < b_delta < means[i, 0]:
            results.append(NonNecessity(None, False, f"boundary outside ({means[0, 0]}, {means[i, 0]})"))
            continue
        above = [j for j in range(1, instance.m) if means[i, j] > b_delta]
        if not above:
            results.append(NonNecessity(None, False, "no non-worst scenario above the boundary"))
            continue
        z = (b_delta - means[i, 0]) / stds[i, 0]
        if n0 is not None:
            z *= math.sqrt(n0)
        a = float(special.ndtr(z))
        value = a * float(sum(b[i, j] for j in above)) * best_product
        results.append(NonNecessity(value, True))
    return best_product, results


def nonnecessity_bound_thm3(
    instance: ProblemInstance,
    b_delta: Optional[float],
    alternative: int,
    *,
    n0: Optional[int] = None,
) -> NonNecessity:
    """
    Limiting lower bound on the probability that AA ends up sampling a
    scenario of `alternative` other than its true worst case without end
    while still selecting correctly. With `n0` the initial-sample variant
    for GAA is used.

    Returns an explicit inapplicable result, not zero, when the boundary
    is not strictly between the worst-case means of alternative 1 and
    `alternative`, or no other scenario of `alternative` is above it.
    """
    if not instance.canonical:
        raise InstanceError("bounds need an instance in canonical ordering")
    if b_delta is None:
        b_delta = instance.default_b_delta()
    if not 1 <= alternative <= instance.k:
        raise InstanceError(f"alternative {alternative} outside 1..{instance.k}")
    _, results = _nonnecessity_terms(instance, b_delta, n0)
    return results[alternative - 1]


def nonnecessity_bound_total(
    instance: ProblemInstance,
    b_delta: Optional[float] = None,
    *,
    n0: Optional[int] = None,
) -> NonNecessity:
    """
    Sum of :py:func:`nonnecessity_bound_thm3` over the applicable non-best
    alternatives, clamped to 1.
    """
    if not instance.canonical:
        raise InstanceError("bounds need an instance in canonical ordering")
    if b_delta is None:
        b_delta = instance.default_b_delta()
    _, results = _nonnecessity_terms(instance, b_delta, n0)
    values = [r.value for r in results if r.applicable and r.value is not None]
    if not values:
        return NonNecessity(None, False, "no applicable alternative")
    return NonNecessity(min(1.0, sum(values)), True)


@dataclasses.dataclass(frozen=True)
class AllocationPattern:
    """
    Surrogate of the asymptotic allocation pattern: which scenarios hold a
    substantial share of the final sample.
    """

    shares: Tuple[Tuple[float, ...], ...]
    heavy_set: Tuple[ScenarioId, ...]
    most_sampled: Tuple[int, ...]
    worst_case_in_heavy: Tuple[bool, ...]

    @property
    def heavy_count(self) -> int:
        return len(self.heavy_set)


def allocation_pattern(
    record: RunRecord,
    theta: float,
    worst_case: Optional[Sequence[int]] = None,
) -> AllocationPattern:
    """
    :param theta: a scenario is heavy when its share exceeds
        ``theta / (k * m)``
    :param worst_case: 1-based worst-case scenario per alternative,
        column 1 by default
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta should lie in (0, 1), got {theta!r}")
    sizes = np.asarray(record.sizes, dtype=float)
    k, m = sizes.shape
    shares = sizes / sizes.sum()
    threshold = theta / (k * m)
    heavy = tuple(ScenarioId(i + 1, j + 1) for i in range(k) for j in range(m) if shares[i, j] > threshold)
    most = tuple(int(j) + 1 for j in np.argmax(sizes, axis=1))
    if worst_case is None:
        worst_case = [1] * k
    return AllocationPattern(
        shares=tuple(tuple(float(x) for x in row) for row in shares),
        heavy_set=heavy,
        most_sampled=most,
        worst_case_in_heavy=tuple(most[i] == worst_case[i] for i in range(k)),
    )


def worst_case_missed(pattern: AllocationPattern, best: int = 1) -> bool:
    """
    Whether some non-best alternative's most-sampled scenario is not its
    worst case.
    """
    return any(not ok for i, ok in enumerate(pattern.worst_case_in_heavy, start=1) if i != best)
