import asyncio
from typing import Any, Iterable, List, Optional, Sequence, Tuple

__all__ = (
    "DRRSException",
    "InstanceError",
    "ConfigError",
    "HorizonExceeded",
    "BudgetError",
    "AllocationError",
    "InsufficientSamples",
    "FitError",
    "AmbiguitySetError",
    "VerificationFailure",
    "BatchTimeout",
)


class DRRSException(Exception):
    """
    Base exception class.
    """


class InstanceError(DRRSException, ValueError):
    """
    Raised for malformed problem instances and out-of-range scenario indices.
    """


class ConfigError(DRRSException):
    """
    Raised when an experiment config does not validate. All problems found
    are collected before raising.

    :param errors: human readable problems, one per entry
    :type errors: :py:class:`list` of :py:class:`str`

    ::

        >>> try:
        ...     config = drrs.load_config(path)
        ... except ConfigError as exc:
        ...     for problem in exc.errors:
        ...         print(problem)
    """

    def __init__(self, errors: Iterable[str]) -> None:
        self.errors: List[str] = list(errors)
        super().__init__("invalid config: " + "; ".join(self.errors))


class HorizonExceeded(DRRSException):
    """
    Raised when a scenario stream is read past its horizon. This is not the
    same thing as running out of sampling budget.
    """

    def __init__(self, scenario: Any, horizon: int) -> None:
        super().__init__(f"horizon exceeded for scenario {scenario} (horizon={horizon})")
        self.scenario = scenario
        self.horizon = horizon


class BudgetError(DRRSException, ValueError):
    """
    Raised when the total budget cannot pay for initialization.
    """

    def __init__(self, budget: int, required: int) -> None:
        super().__init__(f"budget {budget} is below the required {required}")
        self.budget = budget
        self.required = required


class AllocationError(DRRSException):
    """
    Raised when a sampling rule produces an allocation that breaks its
    contract, or cannot allocate at all.

    :param round_index: engine round (1-based) in which it happened
    :type round_index: :py:class:`int` or :py:class:`None`

    :param step: ``"m"``, ``"k"`` or ``"joint"``
    :type step: :py:class:`str` or :py:class:`None`
    """

    def __init__(
        self,
        message: str,
        *,
        round_index: Optional[int] = None,
        step: Optional[str] = None,
    ) -> None:
        if round_index is not None:
            message = f"round {round_index}, {step}-step: {message}"
        super().__init__(message)
        self.round_index = round_index
        self.step = step


class InsufficientSamples(DRRSException, ValueError):
    """
    Raised when a variance-based quantity is requested with fewer than
    `required` observations.
    """

    def __init__(self, n: int, required: int = 2, scenario: Any = None) -> None:
        where = "" if scenario is None else f" for scenario {scenario}"
        super().__init__(f"need at least {required} observations{where}, got {n}")
        self.n = n
        self.required = required
        self.scenario = scenario


class FitError(DRRSException):
    """
    Universal exception for distribution fitting failures.

    ::

        >>> try:
        ...     fit_family("gamma", observations)
        ... except FitError as exc:
        ...     type, value, traceback = exc.reason
    """

    def __init__(self, *args: Any, family: Optional[str] = None, reason: Optional[Any] = None) -> None:
        super().__init__(*args)
        self.family = family
        self.reason = reason


class AmbiguitySetError(DRRSException):
    """
    Raised when no candidate family survives fitting and KS retention.
    """


class VerificationFailure(DRRSException):
    """
    Raised when at least one verification check fails.

    :param rows: every check row, failed or not
    """

    def __init__(self, rows: Sequence[Tuple[Any, ...]], failed: Sequence[str]) -> None:
        super().__init__("failed checks: " + ", ".join(failed))
        self.rows = list(rows)
        self.failed = list(failed)


class BatchTimeout(DRRSException, asyncio.TimeoutError):
    """
    Raised when a replication batch does not arrive within the configured
    ``batch_timeout``.

    :param where: qualified name of the timed out coroutine
    :param seconds: the limit that was exceeded
    """

    def __init__(self, where: str, seconds: Optional[float]) -> None:
        super().__init__(f"{where} did not finish within {seconds} s")
        self.where = where
        self.seconds = seconds
