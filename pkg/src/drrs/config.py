"""
Experiment configuration: a JSON document with a versioned ``schema`` key,
parsed into frozen dataclasses. Validation collects every problem and
raises a single :py:class:`drrs.ConfigError`.

Minimal example::

    {
        "schema": 1,
        "name": "pics-decay",
        "instance": {"preset": "sc", "k": 5, "m": 3, "gap": 0.5, "variance": 25},
        "procedures": [{"name": "AA", "kind": "aa"}],
        "budget": {"n0": 1, "n1": [20, 40, 60]},
        "replications": 10000,
        "seed": 1
    }
"""

import dataclasses
import json
import logging
import pathlib
from typing import Any, Dict, Final, List, Mapping, Optional, Tuple, Union

from .common import DEFAULT_SEED, DEFAULT_THETA, DEFAULT_VARIANCE
from .errors import ConfigError, DRRSException
from .model import ProblemInstance, mm_config, sc_config
from .procedures import GaaConfig, gaa_kg_config, gaa_ttts_config
from .rules import BaseRule, EpsilonWrap, EqualRule, KGRule, TTTSRule
from .testbeds import (
    FAMILIES,
    TRUE_SERVICE,
    AmbiguitySet,
    InventoryPolicy,
    ParametricDistribution,
    build_ambiguity_set,
    inventory_instance,
    queue_instance,
    service_sample,
)

__all__ = (
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
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION: Final[int] = 1
PRESETS: Final[Tuple[str, ...]] = ("sc", "mm", "explicit", "inventory", "queue")
RULE_TAGS: Final[Tuple[str, ...]] = ("equal", "kg", "ttts")
PROCEDURE_KINDS: Final[Tuple[str, ...]] = ("aa", "gaa", "gaa-kg", "gaa-ttts")


@dataclasses.dataclass(frozen=True)
class RuleSpec:
    tag: str = "equal"
    direction: Optional[str] = None
    beta: float = 0.5
    epsilon: float = 0.0
    exploration: str = "uniform"
    known_variance: bool = False

    def build(self, default_direction: str) -> BaseRule:
        direction: Any = self.direction or default_direction
        rule: BaseRule
        if self.tag == "equal":
            rule = EqualRule(direction)
        elif self.tag == "kg":
            rule = KGRule(direction, known_variance=self.known_variance)
        else:
            rule = TTTSRule(direction, beta=self.beta)
        if self.epsilon > 0:
            rule = EpsilonWrap(rule, self.epsilon, mode=self.exploration)  # type: ignore[arg-type]
        return rule


@dataclasses.dataclass(frozen=True)
class ProcedureSpec:
    """
    ``kind`` is ``"aa"``, ``"gaa"`` (rules given explicitly) or one of
    the presets ``"gaa-kg"`` and ``"gaa-ttts"``.
    """

    name: str
    kind: str = "aa"
    n0: int = 1
    delta_m: Optional[int] = None
    delta_k: Optional[int] = None
    m_rule: RuleSpec = RuleSpec()
    k_rule: RuleSpec = RuleSpec()
    joint: bool = False
    beta: float = 0.5
    epsilon: float = 0.1
    tie_break: str = "worst_case_mean"

    def gaa_config(self, k: int, m: int) -> Optional[GaaConfig]:
        if self.kind == "aa":
            return None
        if self.kind == "gaa-kg":
            return gaa_kg_config(self.n0, self.epsilon)
        if self.kind == "gaa-ttts":
            return gaa_ttts_config(self.n0, self.beta, self.epsilon)
        return GaaConfig(
            n0=self.n0,
            delta_m=self.delta_m if self.delta_m is not None else m,
            delta_k=self.delta_k if self.delta_k is not None else k - 1,
            m_rule=self.m_rule.build("max"),
            k_rule=self.k_rule.build("min"),
            joint_mode=self.joint,
            tie_break=self.tie_break,  # type: ignore[arg-type]
        )

    @property
    def initial_size(self) -> int:
        return 1 if self.kind == "aa" else self.n0


@dataclasses.dataclass(frozen=True)
class InstanceSpec:
    """
    ``preset`` picks the instance family, ``options`` holds its keys:

    - ``sc``: k, m, gap, variance
    - ``mm``: k, m, variance
    - ``explicit``: k, m, means, variances (row-major), canonical
    - ``inventory``: policies ``[[s, S], ...]``, demand_means, horizon,
      ground_truth_reps
    - ``queue``: staffing, one of ambiguity_set ``[{"family", "params"}]``
      or observations or sample_size (drawn from the gamma(2, 0.5) truth),
      alpha, horizon_arrivals, ground_truth_reps
    """

    preset: str
    options: Mapping[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        o = self.options
        if self.preset == "inventory":
            return len(o["policies"]), len(o["demand_means"])
        if self.preset == "queue":
            return len(o["staffing"]), -1
        return int(o["k"]), int(o["m"])

    def ambiguity_set(self, seed: int) -> AmbiguitySet:
        o = self.options
        if "ambiguity_set" in o:
            return AmbiguitySet.from_distributions(
                [ParametricDistribution(d["family"], tuple(d["params"])) for d in o["ambiguity_set"]]
            )
        observations = o.get("observations")
        if observations is None:
            observations = service_sample(int(o.get("sample_size", 20)), seed, TRUE_SERVICE).tolist()
        return build_ambiguity_set(observations, o.get("families", FAMILIES), float(o.get("alpha", 0.05)))

    def build(self, seed: int, *, ambiguity: Optional[AmbiguitySet] = None) -> ProblemInstance:
        """
        :param ambiguity: already built ambiguity set for the queue preset
        """
        o = self.options
        if self.preset == "sc":
            return sc_config(int(o["k"]), int(o["m"]), float(o["gap"]), float(o.get("variance", DEFAULT_VARIANCE)))
        if self.preset == "mm":
            return mm_config(int(o["k"]), int(o["m"]), float(o.get("variance", DEFAULT_VARIANCE)))
        if self.preset == "explicit":
            return ProblemInstance.from_dict(dict(o))
        if self.preset == "inventory":
            return inventory_instance(
                [InventoryPolicy(float(s), float(big_s)) for s, big_s in o["policies"]],
                [float(d) for d in o["demand_means"]],
                horizon=int(o.get("horizon", 1000)),
                replications=int(o.get("ground_truth_reps", 10_000)),
                seed=seed,
            )
        return queue_instance(
            [int(s) for s in o["staffing"]],
            (ambiguity or self.ambiguity_set(seed)).distributions,
            horizon_arrivals=int(o.get("horizon_arrivals", 1000)),
            replications=int(o.get("ground_truth_reps", 5000)),
            seed=seed,
        )


@dataclasses.dataclass(frozen=True)
class BudgetGrid:
    """
    Total budgets ``N = (n0 + n1) * k * m`` for every `n1`.
    """

    n0: int
    n1: Tuple[int, ...]

    def budgets(self, k: int, m: int) -> List[int]:
        return [(self.n0 + n1) * k * m for n1 in self.n1]


@dataclasses.dataclass(frozen=True)
class OutputSpec:
    directory: pathlib.Path = pathlib.Path("out")
    plots: bool = False


@dataclasses.dataclass(frozen=True)
class Thresholds:
    theta: float = DEFAULT_THETA
    b_delta: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    instance: InstanceSpec
    procedures: Tuple[ProcedureSpec, ...]
    budget: BudgetGrid
    replications: int
    seed: int
    workers: int = 1
    batch_timeout: Optional[float] = None
    outputs: OutputSpec = OutputSpec()
    thresholds: Thresholds = Thresholds()
    schema: int = SCHEMA_VERSION

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        replications: Optional[int] = None,
        workers: Optional[int] = None,
        directory: Optional[Union[str, pathlib.Path]] = None,
        plots: Optional[bool] = None,
    ) -> "ExperimentConfig":
        """
        Command line overrides; :py:class:`None` keeps the config value.
        """
        outputs = dataclasses.replace(
            self.outputs,
            directory=pathlib.Path(directory) if directory is not None else self.outputs.directory,
            plots=self.outputs.plots if plots is None else plots,
        )
        errors = []
        if replications is not None and replications < 1:
            errors.append(f"replications should be at least 1, got {replications}")
        if workers is not None and workers < 1:
            errors.append(f"workers should be at least 1, got {workers}")
        if seed is not None and not 0 <= seed < 2**64:
            errors.append(f"seed should be a 64-bit unsigned integer, got {seed}")
        if errors:
            raise ConfigError(errors)
        return dataclasses.replace(
            self,
            seed=self.seed if seed is None else seed,
            replications=self.replications if replications is None else replications,
            workers=self.workers if workers is None else workers,
            outputs=outputs,
        )


class _Reader:
    """
    Typed access to raw config values that records problems instead of
    raising on the first one.
    """

    def __init__(self) -> None:
        self.errors: List[str] = []

    def get(self, data: Mapping[str, Any], key: str, kind: Any, where: str, default: Any = dataclasses.MISSING) -> Any:
        if key not in data:
            if default is dataclasses.MISSING:
                self.errors.append(f"{where}: missing key {key!r}")
                return None
            return default
        value = data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
            self.errors.append(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
            return None
        return value

    def check(self, condition: bool, message: str) -> None:
        if not condition:
            self.errors.append(message)


def _or_default(value: Any, default: Any) -> Any:
    return default if value is None else value


def _parse_rule(reader: _Reader, data: Any, where: str) -> RuleSpec:
    if data is None:
        return RuleSpec()
    if not isinstance(data, dict):
        reader.errors.append(f"{where}: expected an object")
        return RuleSpec()
    tag = reader.get(data, "tag", str, where, "equal")
    reader.check(tag in RULE_TAGS, f"{where}.tag: unknown rule {tag!r}, expected one of {RULE_TAGS}")
    direction = reader.get(data, "direction", str, where, None)
    reader.check(direction in (None, "max", "min"), f"{where}.direction: expected 'max' or 'min'")
    beta = reader.get(data, "beta", float, where, 0.5)
    epsilon = reader.get(data, "epsilon", float, where, 0.0)
    exploration = reader.get(data, "exploration", str, where, "uniform")
    for name, value in (("beta", beta), ("epsilon", epsilon)):
        reader.check(value is None or 0.0 <= value <= 1.0, f"{where}.{name}: should be in [0, 1]")
    reader.check(exploration in ("uniform", "round_robin"), f"{where}.exploration: unknown mode {exploration!r}")
    known_variance = reader.get(data, "known_variance", bool, where, False)
    return RuleSpec(
        tag or "equal",
        direction,
        _or_default(beta, 0.5),
        epsilon or 0.0,
        exploration or "uniform",
        bool(known_variance),
    )


def _parse_procedure(reader: _Reader, data: Any, where: str) -> Optional[ProcedureSpec]:
    if not isinstance(data, dict):
        reader.errors.append(f"{where}: expected an object")
        return None
    name = reader.get(data, "name", str, where)
    kind = reader.get(data, "kind", str, where, "aa")
    reader.check(kind in PROCEDURE_KINDS, f"{where}.kind: unknown procedure {kind!r}, expected {PROCEDURE_KINDS}")
    n0 = reader.get(data, "n0", int, where, 1 if kind in ("aa", "gaa") else 20)
    reader.check(n0 is None or n0 >= 1, f"{where}.n0: should be at least 1")
    delta_m = reader.get(data, "delta_m", int, where, None)
    delta_k = reader.get(data, "delta_k", int, where, None)
    for key, value in (("delta_m", delta_m), ("delta_k", delta_k)):
        reader.check(value is None or value >= 1, f"{where}.{key}: should be at least 1")
    spec = ProcedureSpec(
        name=name or "",
        kind=kind or "aa",
        n0=n0 or 1,
        delta_m=delta_m,
        delta_k=delta_k,
        m_rule=_parse_rule(reader, data.get("m_rule"), f"{where}.m_rule"),
        k_rule=_parse_rule(reader, data.get("k_rule"), f"{where}.k_rule"),
        joint=bool(reader.get(data, "joint", bool, where, False)),
        beta=_or_default(reader.get(data, "beta", float, where, 0.5), 0.5),
        epsilon=reader.get(data, "epsilon", float, where, 0.1) or 0.0,
        tie_break=reader.get(data, "tie_break", str, where, "worst_case_mean") or "worst_case_mean",
    )
    return spec


def _parse_instance(reader: _Reader, data: Any) -> Optional[InstanceSpec]:
    where = "instance"
    if not isinstance(data, dict):
        reader.errors.append(f"{where}: expected an object")
        return None
    preset = reader.get(data, "preset", str, where)
    if preset not in PRESETS:
        reader.errors.append(f"{where}.preset: unknown preset {preset!r}, expected one of {PRESETS}")
        return None
    options = {key: value for key, value in data.items() if key != "preset"}
    required = {
        "sc": ("k", "m", "gap"),
        "mm": ("k", "m"),
        "explicit": ("k", "m", "means", "variances"),
        "inventory": ("policies", "demand_means"),
        "queue": ("staffing",),
    }[preset]
    for key in required:
        reader.check(key in options, f"{where}: preset {preset!r} needs key {key!r}")
    if preset in ("sc", "mm", "explicit"):
        k = reader.get(options, "k", int, where, 2)
        m = reader.get(options, "m", int, where, 1)
        reader.check(k is None or k >= 2, f"{where}.k: should be at least 2")
        reader.check(m is None or m >= 1, f"{where}.m: should be at least 1")
        variance = reader.get(options, "variance", float, where, DEFAULT_VARIANCE)
        reader.check(variance is None or variance > 0, f"{where}.variance: should be positive")
    if preset == "sc":
        gap = reader.get(options, "gap", float, where, 0.5)
        reader.check(gap is None or gap > 0, f"{where}.gap: should be positive")
    if preset == "inventory":
        for pair in options.get("policies", []):
            ok = isinstance(pair, list) and len(pair) == 2 and pair[0] < pair[1]
            reader.check(ok, f"{where}.policies: {pair!r} is not an [s, S] pair with s < S")
        means = options.get("demand_means", [])
        reader.check(len(means) >= 1 and all(d > 0 for d in means), f"{where}.demand_means: need positive means")
    if preset == "queue":
        staffing = options.get("staffing", [])
        ok = len(staffing) >= 2 and all(isinstance(s, int) and s >= 1 for s in staffing)
        reader.check(ok, f"{where}.staffing: need at least two positive server counts")
        for member in options.get("ambiguity_set", []):
            try:
                ParametricDistribution(member["family"], tuple(member["params"]))
            except (KeyError, TypeError, ValueError) as exc:
                reader.errors.append(f"{where}.ambiguity_set: {exc}")
    return InstanceSpec(preset, options)


def _check_b_delta(reader: _Reader, instance: ProblemInstance, b_delta: float) -> None:
    if not instance.canonical:
        return
    low, high = instance.means[0, 0], instance.means[1, 0]
    reader.check(low < b_delta < high, f"thresholds.b_delta: should lie in ({low:g}, {high:g}), got {b_delta!r}")


def parse_config(data: Any) -> ExperimentConfig:
    """
    :raises drrs.ConfigError: listing every problem found
    """
    reader = _Reader()
    if not isinstance(data, dict):
        raise ConfigError(["config should be a JSON object"])
    schema = reader.get(data, "schema", int, "config")
    reader.check(schema is None or schema == SCHEMA_VERSION, f"config.schema: unsupported version {schema!r}")
    instance = _parse_instance(reader, data.get("instance"))
    raw_procedures = reader.get(data, "procedures", list, "config", [{"name": "AA", "kind": "aa"}])
    procedures = [_parse_procedure(reader, p, f"procedures[{n}]") for n, p in enumerate(raw_procedures or [])]
    reader.check(bool(procedures), "procedures: at least one procedure is needed")
    names = [p.name for p in procedures if p is not None]
    reader.check(len(set(names)) == len(names), "procedures: names should be unique")
    budget_data = reader.get(data, "budget", dict, "config") or {}
    n0 = reader.get(budget_data, "n0", int, "budget", 1)
    n1 = reader.get(budget_data, "n1", list, "budget") or []
    reader.check(bool(n1), "budget.n1: the budget grid should not be empty")
    reader.check(all(isinstance(v, int) and v >= 0 for v in n1), "budget.n1: should hold nonnegative integers")
    replications = reader.get(data, "replications", int, "config", 1000)
    reader.check(replications is None or replications >= 1, "config.replications: should be at least 1")
    seed = reader.get(data, "seed", int, "config", DEFAULT_SEED)
    reader.check(seed is None or 0 <= seed < 2**64, "config.seed: should be a 64-bit unsigned integer")
    workers = reader.get(data, "workers", int, "config", 1)
    reader.check(workers is None or workers >= 1, "config.workers: should be at least 1")
    batch_timeout = reader.get(data, "batch_timeout", float, "config", None)
    reader.check(batch_timeout is None or batch_timeout > 0, "config.batch_timeout: should be positive")
    outputs_data = reader.get(data, "outputs", dict, "config", {}) or {}
    thresholds_data = reader.get(data, "thresholds", dict, "config", {}) or {}
    theta = reader.get(thresholds_data, "theta", float, "thresholds", DEFAULT_THETA)
    reader.check(theta is None or 0.0 < theta < 1.0, "thresholds.theta: should be in (0, 1)")
    b_delta = thresholds_data.get("b_delta")
    reader.check(b_delta is None or isinstance(b_delta, (int, float)), "thresholds.b_delta: should be a number")
    if instance is not None and instance.preset in ("sc", "mm", "explicit") and not reader.errors:
        k, m = instance.shape
        for p in procedures:
            if p is not None and n0 is not None and p.initial_size > n0 + min(n1):
                reader.errors.append(f"procedures: {p.name!r} needs n0 <= budget n0 + n1 for every grid point")
            if p is not None:
                try:
                    p.gaa_config(k, m)
                except (ValueError, DRRSException) as exc:
                    reader.errors.append(f"procedures: {p.name!r}: {exc}")
        if b_delta is not None:
            try:
                _check_b_delta(reader, instance.build(seed), float(b_delta))
            except (KeyError, ValueError, DRRSException) as exc:
                reader.errors.append(f"instance: {exc}")
    if reader.errors:
        raise ConfigError(reader.errors)
    assert instance is not None
    return ExperimentConfig(
        name=data.get("name", "experiment"),
        instance=instance,
        procedures=tuple(p for p in procedures if p is not None),
        budget=BudgetGrid(n0, tuple(n1)),
        replications=replications,
        seed=seed,
        workers=workers,
        batch_timeout=batch_timeout,
        outputs=OutputSpec(
            directory=pathlib.Path(outputs_data.get("directory", "out")),
            plots=bool(outputs_data.get("plots", False)),
        ),
        thresholds=Thresholds(theta, None if b_delta is None else float(b_delta)),
    )


def load_config(path: Union[str, pathlib.Path]) -> ExperimentConfig:
    """
    Read and validate a JSON experiment config.

    :raises drrs.ConfigError: for unreadable files, invalid JSON and every
        validation problem
    """
    path = pathlib.Path(path)
    try:
        data: Dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}"]) from exc
    config = parse_config(data)
    logger.info("loaded config %r from %s", config.name, path)
    return config

