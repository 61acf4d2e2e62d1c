from typing import Any, Dict, Sequence, Tuple

__all__ = ("get_param", "first_argmax", "first_argmin")

_MISSING: Any = object()


def get_param(
    where: Tuple[int, str],
    args: Tuple[Any, ...],
    kwargs: Dict[str, Any],
    default: Any = _MISSING,
) -> Any:
    """
    Argument of a wrapped call by keyword or position.

    :param where: position and name of the parameter
    :param default: returned when the argument was not passed, otherwise
        a missing argument raises :py:class:`IndexError`
    """
    if where[1] in kwargs:
        return kwargs[where[1]]
    if where[0] < len(args) or default is _MISSING:
        return args[where[0]]
    return default


def first_argmax(values: Sequence[float]) -> int:
    """
    Index of the largest value, ties going to the lowest index.
    """
    return max(range(len(values)), key=values.__getitem__)


def first_argmin(values: Sequence[float]) -> int:
    return min(range(len(values)), key=values.__getitem__)
