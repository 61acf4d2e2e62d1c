"""
Experiment orchestration: macro-replications fanned out over worker
processes, PCS/PICS estimates, the experiment suites, the verification
runners and the testbed reports.

Every replication draws from streams keyed by the master seed and its own
index, so results do not depend on how replications are split between
workers. Records are always reduced in replication order.

CSV files are written with ``\\n`` line endings; lines starting with ``#``
carry modelling notes of testbed instances. Wall times go to a separate
``timings.csv`` so every other file is reproducible byte for byte.
"""

import asyncio
import collections
import concurrent.futures
import contextlib
import csv
import dataclasses
import functools
import logging
import math
import pathlib
import time
from typing import (
    Any,
    Awaitable,
    Callable,
    ClassVar,
    Deque,
    Dict,
    Final,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np
from typing_extensions import override

from . import plotting
from .analysis import (
    allocation_pattern,
    guard_horizon,
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
from .common import BATCHES_PER_WORKER, AbstractAsyncLister, with_timeout
from .config import ExperimentConfig, ProcedureSpec
from .errors import ConfigError, DRRSException, VerificationFailure
from .model import ProblemInstance, ScenarioId
from .procedures import RunRecord, run_aa, run_gaa
from .streams import StreamSpec, open_streams
from .testbeds import TRUE_SERVICE, AmbiguitySet, InventorySimulator, QueueSimulator

__all__ = (
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
)

logger = logging.getLogger(__name__)

WILSON_Z: Final[float] = 1.959963984540054
TAIL_PATHS: Final[int] = 100_000
TAIL_BOUNDARIES: Final[Tuple[float, ...]] = (0.5, 1.0, 2.0)
TAIL_SIZES: Final[Tuple[int, ...]] = (1, 5, 20)
UNRESOLVED_LIMIT: Final[float] = 0.01
AA_PROCEDURE: Final[ProcedureSpec] = ProcedureSpec("AA", "aa")


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    ::

        >>> wilson_interval(0, 10)
        (0.0, 0.2775327998628...)
    """
    if trials < 1:
        raise ValueError(f"trials should be at least 1, got {trials!r}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes should lie in [0, {trials}], got {successes!r}")
    p = successes / trials
    z2 = z * z
    denominator = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denominator
    return max(0.0, center - half), min(1.0, center + half)


@dataclasses.dataclass(frozen=True)
class EstimateRow:
    procedure: str
    budget: int
    n1: int
    pcs_hat: float
    pics_hat: float
    se: float
    replications: int
    wall_time: float
    wilson_low: float
    wilson_high: float

    HEADER: ClassVar[Tuple[str, ...]] = (
        "procedure",
        "N",
        "n1",
        "pcs_hat",
        "pics_hat",
        "se",
        "replications",
        "wilson_low",
        "wilson_high",
    )

    @classmethod
    def from_records(
        cls,
        procedure: str,
        budget: int,
        n1: int,
        records: Sequence[RunRecord],
        wall_time: float = 0.0,
    ) -> "EstimateRow":
        """
        :raises ValueError: for no records
        """
        trials = len(records)
        if trials == 0:
            raise ValueError("no records to estimate from")
        correct = sum(1 for r in records if r.correct)
        pcs = correct / trials
        low, high = wilson_interval(correct, trials)
        return cls(
            procedure=procedure,
            budget=budget,
            n1=n1,
            pcs_hat=pcs,
            pics_hat=(trials - correct) / trials,
            se=math.sqrt(pcs * (1.0 - pcs) / trials),
            replications=trials,
            wall_time=wall_time,
            wilson_low=low,
            wilson_high=high,
        )

    def row(self) -> List[Any]:
        return [
            self.procedure,
            self.budget,
            self.n1,
            self.pcs_hat,
            self.pics_hat,
            self.se,
            self.replications,
            self.wilson_low,
            self.wilson_high,
        ]


class CheckRow(NamedTuple):
    """
    One verification check. `bound` already includes the Monte Carlo
    allowance, `margin` is nonnegative exactly when the check passes.
    """

    check: str
    statistic: float
    bound: float
    margin: float
    passed: bool

    def row(self) -> List[Any]:
        return [self.check, self.statistic, self.bound, self.margin, int(self.passed)]


def _at_most(check: str, statistic: float, bound: float) -> CheckRow:
    margin = bound - statistic
    return CheckRow(check, statistic, bound, margin, margin >= 0)


def _at_least(check: str, statistic: float, bound: float) -> CheckRow:
    margin = statistic - bound
    return CheckRow(check, statistic, bound, margin, margin >= 0)


@dataclasses.dataclass
class ExperimentResult:
    config: ExperimentConfig
    instance: ProblemInstance
    estimates: List[EstimateRow] = dataclasses.field(default_factory=list)
    records: List[RunRecord] = dataclasses.field(default_factory=list)
    paths: Dict[str, pathlib.Path] = dataclasses.field(default_factory=dict)
    summary: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def estimates_for(self, procedure: str) -> List[EstimateRow]:
        return [e for e in self.estimates if e.procedure == procedure]


def run_replications(
    instance: ProblemInstance,
    procedure: ProcedureSpec,
    budget: int,
    master_seed: int,
    replications: Iterable[int],
) -> List[RunRecord]:
    """
    Run one batch of macro-replications. Module level so worker processes
    can unpickle it.
    """
    config = procedure.gaa_config(instance.k, instance.m)
    records = []
    for replication in replications:
        spec = StreamSpec(master_seed, replication=replication)
        if config is None:
            records.append(run_aa(instance, budget, spec, procedure=procedure.name))
        else:
            records.append(run_gaa(instance, budget, config, spec, procedure=procedure.name))
    return records


def _batches(replications: int, workers: int) -> List[range]:
    count = max(1, workers) * BATCHES_PER_WORKER
    size = max(1, math.ceil(replications / count))
    return [range(start, min(start + size, replications)) for start in range(0, replications, size)]


class ReplicationLister(AbstractAsyncLister[RunRecord]):
    """
    Records of `replications` macro-replications of one procedure at one
    budget, in replication order.

    :param executor: process pool batches are shipped to,
        :py:class:`None` runs them in-process
    :type executor: :py:class:`concurrent.futures.Executor`

    :param workers: worker count the batches are sized for

    :param timeout: seconds to wait for the next batch from `executor`;
        in-process batches always run to completion

    ::

        >>> async for record in ReplicationLister(instance, spec, 60, 1, 100):
        ...     ...
        >>> records = await ReplicationLister(instance, spec, 60, 1, 100)
    """

    def __init__(
        self,
        instance: ProblemInstance,
        procedure: ProcedureSpec,
        budget: int,
        master_seed: int,
        replications: int,
        *,
        executor: Optional[concurrent.futures.Executor] = None,
        workers: int = 1,
        timeout: Optional[float] = None,
    ) -> None:
        super().__init__(timeout=timeout)
        if replications < 1:
            raise ValueError(f"replications should be at least 1, got {replications!r}")
        self.executor = executor
        self._job = functools.partial(run_replications, instance, procedure, budget, master_seed)
        self._batches: Deque[range] = collections.deque(_batches(replications, workers))
        self._futures: Optional[Deque["asyncio.Future[List[RunRecord]]"]] = None
        self._buffer: Deque[RunRecord] = collections.deque()

    def _submit(self) -> Deque["asyncio.Future[List[RunRecord]]"]:
        loop = asyncio.get_running_loop()
        futures = collections.deque(
            loop.run_in_executor(self.executor, self._job, batch) for batch in self._batches
        )
        self._batches.clear()
        return futures

    def _cancel(self) -> None:
        for future in self._futures or ():
            future.cancel()

    async def _next_batch(self) -> Optional[List[RunRecord]]:
        if self.executor is None:
            if not self._batches:
                return None
            return self._job(self._batches.popleft())
        if self._futures is None:
            self._futures = self._submit()
        if not self._futures:
            return None
        future = self._futures.popleft()
        try:
            return await future
        except asyncio.CancelledError:
            self._cancel()
            raise
        except Exception:
            logger.exception("replication batch failed")
            self._cancel()
            raise

    @override
    @with_timeout()
    async def __anext__(self) -> RunRecord:
        while not self._buffer:
            batch = await self._next_batch()
            if batch is None:
                raise StopAsyncIteration
            self._buffer.extend(batch)
        return self._buffer.popleft()


@contextlib.contextmanager
def _executor(workers: int) -> Iterator[Optional[concurrent.futures.Executor]]:
    if workers <= 1:
        yield None
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        yield executor


def _notes(config: ExperimentConfig) -> List[str]:
    preset = config.instance.preset
    if preset == "inventory":
        return [
            "inventory: full backlogging, holding cost on positive end-of-period on-hand,"
            " ordering cost at placement, position = on-hand + on-order - backorders",
        ]
    if preset == "queue":
        return [
            f"queue: input data drawn from {TRUE_SERVICE} service times",
            "queue: FIFO, 1000-arrival horizon by default, no warm-up,"
            " cost = 0.1 abandoned + 15 mean wait of served customers + 0.5 servers",
        ]
    return []


def _directory(config: ExperimentConfig) -> pathlib.Path:
    directory = config.outputs.directory
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DRRSException(f"cannot create output directory {directory}: {exc.strerror}") from exc
    return directory


def _write_csv(
    path: pathlib.Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    notes: Sequence[str] = (),
) -> pathlib.Path:
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            for note in notes:
                f.write(f"# {note}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise DRRSException(f"cannot write {path}: {exc.strerror}") from exc
    logger.info("wrote %s", path)
    return path


def _build_instance(config: ExperimentConfig) -> ProblemInstance:
    instance = config.instance.build(config.seed)
    logger.info("instance %r: best alternative %d, delta %.6g", instance, instance.best, instance.delta)
    return instance


async def _estimate(
    config: ExperimentConfig,
    instance: ProblemInstance,
    procedure: ProcedureSpec,
    executor: Optional[concurrent.futures.Executor],
) -> Tuple[List[EstimateRow], List[RunRecord]]:
    estimates, records = [], []
    for n1, budget in zip(config.budget.n1, config.budget.budgets(instance.k, instance.m)):
        start = time.perf_counter()
        lister = ReplicationLister(
            instance,
            procedure,
            budget,
            config.seed,
            config.replications,
            executor=executor,
            workers=config.workers,
            timeout=config.batch_timeout,
        )
        batch = await lister
        estimate = EstimateRow.from_records(procedure.name, budget, n1, batch, time.perf_counter() - start)
        logger.info(
            "%s N=%d: PCS %.4f (se %.4f) over %d replications in %.1fs",
            procedure.name,
            budget,
            estimate.pcs_hat,
            estimate.se,
            estimate.replications,
            estimate.wall_time,
        )
        estimates.append(estimate)
        records.extend(batch)
    return estimates, records


async def run_experiment(
    config: ExperimentConfig,
    *,
    instance: Optional[ProblemInstance] = None,
) -> ExperimentResult:
    """
    :py:func:`asyncio.coroutine`

    Run every configured procedure at every budget grid point and write
    ``estimates.csv``, ``records.csv`` and ``timings.csv`` (plus
    ``pics.svg`` when plots are enabled) to the output directory.

    :param instance: already built instance, for testbeds whose ground
        truth is expensive

    :raises drrs.BudgetError: when a grid budget cannot pay for a
        procedure's initial sample
    """
    directory = _directory(config)
    if instance is None:
        instance = _build_instance(config)
    logger.info(
        "experiment %r: %d procedures, %d budgets, %d replications, %d workers",
        config.name,
        len(config.procedures),
        len(config.budget.n1),
        config.replications,
        config.workers,
    )
    result = ExperimentResult(config, instance)
    with _executor(config.workers) as executor:
        for procedure in config.procedures:
            estimates, records = await _estimate(config, instance, procedure, executor)
            result.estimates.extend(estimates)
            result.records.extend(records)
    notes = _notes(config)
    result.paths["estimates"] = _write_csv(
        directory / "estimates.csv",
        EstimateRow.HEADER,
        (e.row() for e in result.estimates),
        notes,
    )
    result.paths["records"] = _write_csv(
        directory / "records.csv",
        RunRecord.header(instance.k, instance.m),
        (r.row() for r in result.records),
        notes,
    )
    result.paths["timings"] = _write_csv(
        directory / "timings.csv",
        ("procedure", "N", "wall_time"),
        ((e.procedure, e.budget, e.wall_time) for e in result.estimates),
    )
    if config.outputs.plots:
        path = directory / "pics.svg"
        result.paths["pics_svg"] = plotting.emit_svg(result.estimates, "pics", path, title=config.name)
    return result


def _log_slope(estimates: Sequence[EstimateRow]) -> float:
    points = [(e.budget, math.log(e.pics_hat)) for e in estimates if e.pics_hat > 0]
    if len(points) < 2:
        return math.nan
    x, y = zip(*points)
    return float(np.polyfit(x, y, 1)[0])


def _step_violations(values: Sequence[float], errors: Sequence[float], *, increasing: bool) -> List[int]:
    """
    Indices `t` where ``values[t + 1]`` moves against the expected
    direction by more than two combined standard errors.
    """
    bad = []
    for t in range(len(values) - 1):
        allowance = 2.0 * math.hypot(errors[t], errors[t + 1])
        change = values[t + 1] - values[t]
        if (change < -allowance) if increasing else (change > allowance):
            bad.append(t)
    return bad


async def suite_pics_decay(config: ExperimentConfig) -> ExperimentResult:
    """
    :py:func:`asyncio.coroutine`

    PICS against the total budget on a log scale, with the additive
    exponential bound for AA on canonical instances. Writes
    ``pics_decay.csv`` and, with plots, ``pics_decay.svg``.
    """
    result = await run_experiment(config)
    instance = result.instance
    b_delta = config.thresholds.b_delta
    rows = []
    for procedure in config.procedures:
        estimates = result.estimates_for(procedure.name)
        for e in estimates:
            bound: Any = ""
            if procedure.kind == "aa" and instance.is_canonical():
                bound = pics_bound_prop1(instance, e.budget, b_delta)
            log_pics: Any = math.log(e.pics_hat) if e.pics_hat > 0 else ""
            rows.append([e.procedure, e.budget, e.pics_hat, e.se, log_pics, bound])
        pics = [e.pics_hat for e in estimates]
        violations = _step_violations(pics, [e.se for e in estimates], increasing=False)
        slope = _log_slope(estimates)
        result.summary[procedure.name] = {"log_slope": slope, "monotone": not violations}
        logger.info("%s: log PICS slope %.3g per observation, monotone %s", procedure.name, slope, not violations)
    directory = config.outputs.directory
    header = ("procedure", "N", "pics_hat", "se", "log_pics", "pics_bound")
    result.paths["pics_decay"] = _write_csv(directory / "pics_decay.csv", header, rows, _notes(config))
    if config.outputs.plots:
        result.paths["pics_decay_svg"] = plotting.emit_svg(
            result.estimates,
            "pics",
            directory / "pics_decay.svg",
            title=config.name,
        )
    return result


async def suite_allocation_pattern(config: ExperimentConfig) -> ExperimentResult:
    """
    :py:func:`asyncio.coroutine`

    Which scenarios end up holding a substantial share of the sample.
    Per replication ``allocation.csv`` records the heavy-scenario count
    and whether some non-best alternative's most-sampled scenario misses
    its worst case; ``allocation_summary.csv`` aggregates per procedure
    and budget. With plots, the first two replications at the largest
    budget of each procedure are drawn as bar grids.
    """
    result = await run_experiment(config)
    instance = result.instance
    k, m = instance.k, instance.m
    theta = config.thresholds.theta
    worst_case = instance.worst_case_scenarios
    additive_count = k + m - 1
    rows, summary_rows = [], []
    groups: Dict[Tuple[str, int], List[Tuple[RunRecord, Any]]] = {}
    for record in result.records:
        pattern = allocation_pattern(record, theta, worst_case)
        groups.setdefault((record.procedure, record.budget), []).append((record, pattern))
        best_heavy = all(ScenarioId(instance.best, j) in pattern.heavy_set for j in range(1, m + 1))
        missed = worst_case_missed(pattern, instance.best)
        most = " ".join(str(j) for j in pattern.most_sampled)
        rows.append(
            [
                record.procedure,
                record.budget,
                record.replication,
                int(bool(record.correct)),
                pattern.heavy_count,
                int(best_heavy),
                int(missed),
                most,
            ]
        )
    kinds = {p.name: p for p in config.procedures}
    for (name, budget), items in groups.items():
        correct = [(r, p) for r, p in items if r.correct]
        additive = sum(1 for _, p in correct if p.heavy_count == additive_count)
        best_heavy = sum(
            1 for _, p in correct if all(ScenarioId(instance.best, j) in p.heavy_set for j in range(1, m + 1))
        )
        missed = sum(1 for _, p in items if worst_case_missed(p, instance.best))
        miss_rate = missed / len(items)
        bound: Any = ""
        if instance.is_canonical():
            n0 = None if kinds[name].kind == "aa" else kinds[name].n0
            total = nonnecessity_bound_total(instance, config.thresholds.b_delta, n0=n0)
            bound = total.value if total.applicable else ""
        summary_rows.append(
            [
                name,
                budget,
                len(correct),
                additive / len(correct) if correct else "",
                best_heavy / len(correct) if correct else "",
                miss_rate,
                math.sqrt(miss_rate * (1.0 - miss_rate) / len(items)),
                bound,
            ]
        )
        result.summary[f"{name} N={budget}"] = {
            "additive_fraction": additive / len(correct) if correct else math.nan,
            "best_all_heavy_fraction": best_heavy / len(correct) if correct else math.nan,
            "worst_case_miss": miss_rate,
        }
    directory = config.outputs.directory
    notes = _notes(config)
    result.paths["allocation"] = _write_csv(
        directory / "allocation.csv",
        ("procedure", "N", "replication", "correct", "heavy_count", "best_all_heavy", "worst_case_missed", "most"),
        rows,
        notes,
    )
    result.paths["allocation_summary"] = _write_csv(
        directory / "allocation_summary.csv",
        (
            "procedure",
            "N",
            "correct_runs",
            "additive_fraction",
            "best_all_heavy_fraction",
            "worst_case_miss",
            "miss_se",
            "nonnecessity_bound",
        ),
        summary_rows,
        notes,
    )
    if config.outputs.plots:
        largest = max(config.budget.budgets(k, m))
        for procedure in config.procedures:
            sample = [r for r in result.records if r.procedure == procedure.name and r.budget == largest][:2]
            if not sample:
                continue
            path = directory / f"allocation_{procedure.name}.svg"
            result.paths[f"allocation_{procedure.name}_svg"] = plotting.emit_svg(sample, "allocation", path)
    return result


async def suite_gaa_consistency(config: ExperimentConfig) -> ExperimentResult:
    """
    :py:func:`asyncio.coroutine`

    PCS against the per-scenario budget. ``consistency.csv`` marks steps
    where the PCS drops by more than two combined standard errors.
    """
    result = await run_experiment(config)
    rows = []
    for procedure in config.procedures:
        estimates = result.estimates_for(procedure.name)
        violations = _step_violations([e.pcs_hat for e in estimates], [e.se for e in estimates], increasing=True)
        for t, e in enumerate(estimates):
            rows.append([e.procedure, e.n1, e.budget, e.pcs_hat, e.se, int(t - 1 not in violations)])
        result.summary[procedure.name] = {
            "nondecreasing": not violations,
            "final_pcs": estimates[-1].pcs_hat,
        }
        logger.info(
            "%s: PCS nondecreasing %s, final %.4f", procedure.name, not violations, estimates[-1].pcs_hat
        )
    directory = config.outputs.directory
    header = ("procedure", "n1", "N", "pcs_hat", "se", "step_ok")
    result.paths["consistency"] = _write_csv(directory / "consistency.csv", header, rows, _notes(config))
    if config.outputs.plots:
        path = directory / "consistency.svg"
        result.paths["consistency_svg"] = plotting.emit_svg(result.estimates, "pcs", path, title=config.name)
    return result


async def suite_compare(config: ExperimentConfig) -> ExperimentResult:
    """
    :py:func:`asyncio.coroutine`

    Side-by-side PCS of every configured procedure; ``compare.csv`` has a
    row per budget and a PCS and SE column pair per procedure.
    """
    result = await run_experiment(config)
    names = [p.name for p in config.procedures]
    table: Dict[int, Dict[str, EstimateRow]] = collections.defaultdict(dict)
    n1_of = {}
    for e in result.estimates:
        table[e.budget][e.procedure] = e
        n1_of[e.budget] = e.n1
    header = ["N", "n1"]
    for name in names:
        header += [f"pcs_{name}", f"se_{name}"]
    rows = []
    for budget in sorted(table):
        row: List[Any] = [budget, n1_of[budget]]
        for name in names:
            e = table[budget][name]
            row += [e.pcs_hat, e.se]
        rows.append(row)
    directory = config.outputs.directory
    result.paths["compare"] = _write_csv(directory / "compare.csv", header, rows, _notes(config))
    if config.outputs.plots:
        path = directory / "compare.svg"
        result.paths["compare_svg"] = plotting.emit_svg(result.estimates, "pcs", path, title=config.name)
    return result


SUITES: Final[Dict[str, Callable[[ExperimentConfig], Awaitable[ExperimentResult]]]] = {
    "pics-decay": suite_pics_decay,
    "allocation": suite_allocation_pattern,
    "gaa-consistency": suite_gaa_consistency,
    "compare": suite_compare,
}


def _finish_checks(config: ExperimentConfig, name: str, rows: List[CheckRow]) -> List[CheckRow]:
    path = _directory(config) / f"{name}.csv"
    _write_csv(path, CheckRow._fields, (r.row() for r in rows))
    failed = [r.check for r in rows if not r.passed]
    for r in rows:
        status = "ok" if r.passed else "FAILED"
        logger.info("%s: %s (statistic %.6g, bound %.6g)", r.check, status, r.statistic, r.bound)
    if failed:
        raise VerificationFailure([tuple(r) for r in rows], failed)
    return rows


def verify_lemma1(config: ExperimentConfig) -> List[CheckRow]:
    """
    Pathwise check on shared streams: for every replication whose last
    exit times are resolved, the number of k-steps AA spends on the best
    alternative is at most the last-exit sum ``S(b_delta)``. Also checks
    that under one percent of the replications are unresolved. Writes
    ``verify_lemma1.csv``.

    :raises drrs.VerificationFailure: after writing, when a check fails
    :raises drrs.InstanceError: for an instance not in canonical ordering
    """
    instance = _build_instance(config)
    b_delta = config.thresholds.b_delta
    horizon = oracle_horizon(instance, b_delta)
    rows = []
    for budget in config.budget.budgets(instance.k, instance.m):
        length = max(horizon, budget)
        violations = unresolved = 0
        for replication in range(config.replications):
            spec = StreamSpec(config.seed, replication=replication, horizon=length)
            streams = open_streams(instance, spec)
            record = run_aa(instance, budget, spec, streams=streams)
            bound = s_bound(instance, streams, b_delta, length)
            if not bound.resolved:
                unresolved += 1
            elif record.k_rounds[0] > bound.value:
                violations += 1
                logger.warning(
                    "replication %d: %d k-steps on the best, bound %d", replication, record.k_rounds[0], bound.value
                )
        rows.append(_at_most(f"lemma1 N={budget}", violations, 0))
        rows.append(_at_most(f"unresolved N={budget}", unresolved / config.replications, UNRESOLVED_LIMIT))
    return _finish_checks(config, "verify_lemma1", rows)


def _tail_checks(seed: int) -> List[CheckRow]:
    rows = []
    for b in TAIL_BOUNDARIES:
        exits = simulate_last_exits(b, TAIL_PATHS, guard_horizon(b), seed)
        for n in TAIL_SIZES:
            p = float(np.mean(exits > n))
            se = math.sqrt(p * (1.0 - p) / TAIL_PATHS)
            rows.append(_at_most(f"tail b={b} n={n}", p, tail_bound_lemma3(n, b) + 3.0 * se))
        p = float(np.mean(exits == 0))
        se = math.sqrt(p * (1.0 - p) / TAIL_PATHS)
        rows.append(_at_least(f"zero exit b={b}", p, zero_exit_bound_ec6(b) - 3.0 * se))
    return rows


async def verify_bounds(config: ExperimentConfig) -> List[CheckRow]:
    """
    :py:func:`asyncio.coroutine`

    Probability bounds of AA at every grid budget, on the configured
    canonical instance:

    - the empirical PCS is at least the Monte Carlo last-exit lower bound
      minus three combined standard errors
    - the empirical PICS is at most the additive exponential bound plus
      three standard errors
    - the empirical PICS does not increase by more than two combined
      standard errors between grid points

    plus the last-exit tail and zero-exit bounds over
    :py:data:`TAIL_PATHS` standard-normal paths. Writes
    ``verify_bounds.csv``.

    :raises drrs.VerificationFailure: after writing, when a check fails
    """
    instance = _build_instance(config)
    b_delta = config.thresholds.b_delta
    rows = []
    with _executor(config.workers) as executor:
        estimates, _ = await _estimate(config, instance, AA_PROCEDURE, executor)
    for e in estimates:
        lower = pcs_lower_bound_mc(instance, e.budget, b_delta, config.replications, StreamSpec(config.seed))
        allowance = 3.0 * math.hypot(e.se, lower.se)
        rows.append(_at_least(f"pcs lower bound N={e.budget}", e.pcs_hat, lower.value - allowance))
        bound = pics_bound_prop1(instance, e.budget, b_delta)
        rows.append(_at_most(f"pics bound N={e.budget}", e.pics_hat, bound + 3.0 * e.se))
    violations = _step_violations([e.pics_hat for e in estimates], [e.se for e in estimates], increasing=False)
    rows.append(_at_most("pics monotone", len(violations), 0))
    rows.extend(_tail_checks(config.seed))
    return _finish_checks(config, "verify_bounds", rows)


def _labels(instance: ProblemInstance) -> Tuple[List[str], List[str]]:
    simulator = instance.simulator
    if isinstance(simulator, InventorySimulator):
        return [str(p) for p in simulator.policies], [f"demand mean {d:g}" for d in simulator.demand_means]
    if isinstance(simulator, QueueSimulator):
        return [f"{s} servers" for s in simulator.staffing], [str(d) for d in simulator.services]
    return [str(i) for i in range(1, instance.k + 1)], [str(j) for j in range(1, instance.m + 1)]


def run_testbed(config: ExperimentConfig, kind: str) -> ExperimentResult:
    """
    Estimate the ground-truth scenario means of a testbed and write
    ``ground_truth.csv``; the queue testbed also writes the ambiguity-set
    fit report ``ambiguity.csv``.

    :param kind: ``"inventory"`` or ``"queue"``, has to match the
        configured instance preset

    :raises drrs.ConfigError: for a mismatching preset
    :raises drrs.AmbiguitySetError: when no service family is retained
    """
    if config.instance.preset != kind:
        raise ConfigError([f"instance.preset: testbed {kind!r} needs preset {kind!r}, got {config.instance.preset!r}"])
    directory = _directory(config)
    ambiguity: Optional[AmbiguitySet] = None
    if kind == "queue":
        ambiguity = config.instance.ambiguity_set(config.seed)
    instance = config.instance.build(config.seed, ambiguity=ambiguity)
    result = ExperimentResult(config, instance)
    alternatives, distributions = _labels(instance)
    worst_case = instance.worst_case_scenarios
    rows = []
    for i in range(instance.k):
        for j in range(instance.m):
            rows.append(
                [
                    i + 1,
                    j + 1,
                    alternatives[i],
                    distributions[j],
                    float(instance.means[i, j]),
                    float(instance.variances[i, j]),
                    int(worst_case[i] == j + 1),
                ]
            )
    notes = _notes(config)
    result.paths["ground_truth"] = _write_csv(
        directory / "ground_truth.csv",
        ("alternative", "distribution", "alternative_label", "distribution_label", "mean", "variance", "worst_case"),
        rows,
        notes,
    )
    if ambiguity is not None:
        result.paths["ambiguity"] = _write_csv(
            directory / "ambiguity.csv",
            ("family", "params", "ks_statistic", "critical_value", "retained", "note"),
            (member.row() for member in ambiguity.report),
            notes,
        )
    result.summary = {"best": instance.best, "best_label": alternatives[instance.best - 1], "delta": instance.delta}
    logger.info("%s testbed: best %s, delta %.6g", kind, alternatives[instance.best - 1], instance.delta)
    return result
