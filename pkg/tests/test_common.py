import asyncio

import pytest

import drrs
from drrs.utils import first_argmax, first_argmin, get_param


class Numbers(drrs.AbstractAsyncLister[int]):
    def __init__(self, count, delay=0, timeout=None):
        super().__init__(timeout=timeout)
        self.left = list(range(count))
        self.delay = delay

    @drrs.with_timeout()
    async def __anext__(self):
        await asyncio.sleep(self.delay)
        if not self.left:
            raise StopAsyncIteration
        return self.left.pop(0)


class Slow:
    def __init__(self, timeout):
        self.step_timeout = timeout

    @drrs.with_timeout("step_timeout")
    async def step(self, delay):
        await asyncio.sleep(delay)
        return delay


@pytest.mark.asyncio
async def test_lister_iterates_and_awaits():
    assert [n async for n in Numbers(3)] == [0, 1, 2]
    assert await Numbers(4) == [0, 1, 2, 3]
    assert await Numbers(0) == []


@pytest.mark.asyncio
async def test_lister_timeout():
    with pytest.raises(asyncio.TimeoutError):
        await Numbers(2, delay=1, timeout=0.05)


@pytest.mark.asyncio
async def test_named_timeout():
    assert await Slow(None).step(0) == 0
    assert await Slow(1).step(0.01) == 0.01
    with pytest.raises(drrs.BatchTimeout) as exc:
        await Slow(0.05).step(1)
    assert exc.value.seconds == 0.05
    assert exc.value.where == "Slow.step"
    assert isinstance(exc.value, asyncio.TimeoutError)


def test_get_param():
    assert get_param((0, "self"), ("x",), {}) == "x"
    assert get_param((0, "self"), (), {"self": "y"}) == "y"
    assert get_param((1, "step"), ("x",), {}, default="m") == "m"
    with pytest.raises(IndexError):
        get_param((1, "step"), ("x",), {})


def test_first_arg_extremes():
    assert first_argmax([1, 3, 3, 2]) == 1
    assert first_argmin([2, 1, 5, 1]) == 1
    assert first_argmax([0.0]) == 0
