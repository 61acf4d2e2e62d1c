import dataclasses

import numpy as np
import pytest

import drrs


@dataclasses.dataclass(frozen=True)
class UniformSimulator:
    tag: str = "uniform"

    def observe(self, scenario, rng):
        return scenario.alternative + rng.random()


def _stream(instance, scenario, seed=1, replication=0, horizon=1000):
    spec = drrs.StreamSpec(seed, replication=replication, horizon=horizon)
    return drrs.open_stream(instance, drrs.ScenarioId(*scenario), spec)


def test_same_key_same_values(sc_cv):
    first = _stream(sc_cv, (1, 1)).values(1000)
    second = _stream(sc_cv, (1, 1)).values(1000)
    assert first == second


def test_different_scenarios_differ(sc_cv):
    assert _stream(sc_cv, (1, 1)).values(100) != _stream(sc_cv, (1, 2)).values(100)
    assert _stream(sc_cv, (1, 1)).values(100) != _stream(sc_cv, (1, 1), replication=1).values(100)
    assert _stream(sc_cv, (1, 1)).values(100) != _stream(sc_cv, (1, 1), seed=2).values(100)


def test_values_do_not_depend_on_horizon(sc_cv):
    short = _stream(sc_cv, (2, 1), horizon=10).values(10)
    long = _stream(sc_cv, (2, 1), horizon=50_000).values(10)
    assert short == long


def test_gaussian_moments():
    instance = drrs.sc_config(2, 2, 0.5, 25.0)
    values = np.asarray(_stream(instance, (2, 1), horizon=100_000).values(100_000))
    assert abs(values.mean() - 0.5) < 4 * 5 / np.sqrt(values.size)
    assert abs(values.var(ddof=1) - 25.0) < 4 * 25.0 * np.sqrt(2 / (values.size - 1))


def test_gaussian_mean_over_a_million_draws():
    instance = drrs.sc_config(2, 2, 0.5, 25.0)
    values = np.asarray(_stream(instance, (1, 1), horizon=10**6).values(10**6))
    assert abs(values.mean()) < 5 * 5 / 1000


def test_stub_stream_reads_in_order():
    stream = drrs.ScenarioStream.from_values(drrs.ScenarioId(1, 1), [1, 2, 3])
    assert [stream.next(), next(stream), stream.next()] == [1.0, 2.0, 3.0]
    assert stream.cursor == 3
    with pytest.raises(drrs.HorizonExceeded) as exc:
        stream.next()
    assert exc.value.horizon == 3


def test_interleaved_reads(stub_streams):
    streams = stub_streams([[[1.0, 2.0], [10.0, 20.0]], [[-1.0], [-10.0]]])
    assert streams.draw(1, 2) == 10.0
    assert streams.draw(1, 1) == 1.0
    assert streams.draw(1, 2) == 20.0
    assert streams.draw(2, 2) == -10.0
    assert streams[(1, 1)].cursor == 1
    with pytest.raises(drrs.HorizonExceeded):
        streams.draw(2, 2)


def test_stub_values_should_nest():
    with pytest.raises(drrs.InstanceError):
        drrs.StreamSet.from_values([[[1.0], [2.0]], [[3.0]]])


def test_horizon_checks(sc_cv):
    with pytest.raises(ValueError):
        drrs.open_stream(sc_cv, drrs.ScenarioId(1, 1), drrs.StreamSpec(1))
    with pytest.raises(drrs.HorizonExceeded):
        _stream(sc_cv, (1, 1), horizon=drrs.MAX_HORIZON + 1)
    with pytest.raises(drrs.InstanceError):
        _stream(sc_cv, (4, 1))
    stream = _stream(sc_cv, (1, 1), horizon=5)
    with pytest.raises(drrs.HorizonExceeded):
        stream.values(6)


def test_stream_spec_validation():
    with pytest.raises(ValueError):
        drrs.StreamSpec(-1)
    with pytest.raises(ValueError):
        drrs.StreamSpec(1, replication=-1)
    with pytest.raises(ValueError):
        drrs.StreamSpec(1, horizon=0)
    spec = drrs.StreamSpec(1).with_horizon(10).for_replication(3)
    assert (spec.horizon, spec.replication) == (10, 3)


def test_prefix_means_examples():
    stream = drrs.ScenarioStream.from_values(drrs.ScenarioId(1, 1), [1.0, 0.0, -1.0])
    np.testing.assert_allclose(drrs.prefix_means(stream, 3), [1.0, 0.5, 0.0])
    constant = drrs.ScenarioStream.from_values(drrs.ScenarioId(1, 1), [2.5] * 4)
    assert drrs.prefix_means(constant, 4).tolist() == [2.5] * 4
    with pytest.raises(drrs.HorizonExceeded):
        drrs.prefix_means(constant, 5)


def test_prefix_means_match_running_stats(sc_cv):
    stream = _stream(sc_cv, (2, 2))
    stats = drrs.ScenarioStats()
    running = []
    for _ in range(500):
        drrs.update_stats(stats, stream.next(), "init")
        running.append(stats.mean)
    assert drrs.prefix_means(stream, 500).tolist() == running


def test_prefix_means_ignore_cursor(sc_cv):
    stream = _stream(sc_cv, (1, 2))
    expected = drrs.prefix_means(stream, 20).tolist()
    for _ in range(7):
        stream.next()
    assert drrs.prefix_means(stream, 20).tolist() == expected


def test_open_streams_covers_every_scenario(mm_cv):
    streams = drrs.open_streams(mm_cv, drrs.StreamSpec(3, horizon=10))
    assert sorted(streams.streams) == mm_cv.scenarios()
    assert (streams.k, streams.m) == (4, 3)
    other = drrs.open_streams(mm_cv, drrs.StreamSpec(3, horizon=10))
    assert streams.rule_rng.random() == other.rule_rng.random()


def test_simulator_backend_streams():
    simulator = UniformSimulator()
    instance = drrs.ProblemInstance(
        means=[[1.5, 1.5], [2.5, 2.5]],
        variances=[[1 / 12, 1 / 12], [1 / 12, 1 / 12]],
        backend=simulator.tag,
        simulator=simulator,
    )
    spec = drrs.StreamSpec(5, replication=2, horizon=4)
    values = drrs.open_stream(instance, drrs.ScenarioId(2, 1), spec).values(4)
    assert all(2.0 <= v < 3.0 for v in values)
    expected = [2 + drrs.substream(spec, 2, 1, n).random() for n in range(4)]
    assert values == expected
    assert drrs.open_stream(instance, drrs.ScenarioId(2, 1), spec).values(4) == values
