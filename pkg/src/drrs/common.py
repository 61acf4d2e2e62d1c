"""
Shared defaults and the async plumbing replication batches stream through.
"""

import abc
import asyncio
import functools
from typing import Any, AsyncIterator, Callable, Coroutine, Final, Generator, List, Optional, TypeVar

from typing_extensions import ParamSpec, override

from .errors import BatchTimeout
from .utils import get_param

__all__ = (
    "with_timeout",
    "AbstractAsyncLister",
    "DEFAULT_SEED",
    "DEFAULT_THETA",
    "DEFAULT_VARIANCE",
    "BATCHES_PER_WORKER",
)


DEFAULT_SEED: Final[int] = 20240601
DEFAULT_THETA: Final[float] = 0.05
DEFAULT_VARIANCE: Final[float] = 25.0
BATCHES_PER_WORKER: Final[int] = 4

_T = TypeVar("_T")
_PS = ParamSpec("_PS")


def with_timeout(
    name: str = "timeout",
) -> Callable[
    [Callable[_PS, Coroutine[Any, Any, _T]]],
    Callable[_PS, Coroutine[Any, Any, _T]],
]:
    """
    Method decorator factory. The wrapped coroutine gets as many seconds
    as the attribute `name` of its instance holds when it is called;
    :py:class:`None` waits forever.

    :raises drrs.BatchTimeout: when the coroutine does not finish in time

    ::

        >>> class Batches:
        ...     def __init__(self):
        ...         self.batch_timeout = 600
        ...
        ...     @with_timeout("batch_timeout")
        ...     async def next_batch(self):
        ...         ...
    """

    def decorator(f: Callable[_PS, Coroutine[Any, Any, _T]]) -> Callable[_PS, Coroutine[Any, Any, _T]]:
        @functools.wraps(f)
        async def wrapper(*args: _PS.args, **kwargs: _PS.kwargs) -> _T:
            owner = get_param((0, "self"), args, kwargs)
            seconds: Optional[float] = getattr(owner, name)
            try:
                return await asyncio.wait_for(f(*args, **kwargs), seconds)
            except asyncio.TimeoutError as exc:
                raise BatchTimeout(f.__qualname__, seconds) from exc

        return wrapper

    return decorator


class AbstractAsyncLister(AsyncIterator[_T], abc.ABC):
    """
    Items produced one at a time, either iterated with ``async for`` or
    collected into a list by awaiting the lister itself.

    :param timeout: seconds a subclass may spend producing one item
    :type timeout: :py:class:`None`, :py:class:`int` or :py:class:`float`

    ::

        >>> async for record in lister:
        ...     ...
        >>> records = await lister
    """

    def __init__(self, *, timeout: Optional[float] = None) -> None:
        if timeout is not None and timeout <= 0:
            raise ValueError(f"timeout should be positive, got {timeout!r}")
        self.timeout = timeout

    @override
    def __aiter__(self) -> "AbstractAsyncLister[_T]":
        return self

    @override
    @abc.abstractmethod
    async def __anext__(self) -> _T:
        """
        :py:func:`asyncio.coroutine`

        Next item, :py:class:`StopAsyncIteration` when exhausted.
        """

    async def collect(self) -> List[_T]:
        return [item async for item in self]

    def __await__(self) -> Generator[Any, None, List[_T]]:
        return self.collect().__await__()
