import contextlib
import json

import numpy as np
import pytest

import drrs


class Container:
    def __init__(self, *args, **kwargs):
        self.args = args
        self.kwargs = kwargs


@pytest.fixture
def Rule():
    return Container


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))


@pytest.fixture
def make_stats():
    def factory(n, mean=0.0, variance=1.0):
        stats = drrs.ScenarioStats()
        stats.n = stats.n_init = n
        stats.total = mean * n
        stats.mean = mean
        stats.m2 = variance * (n - 1)
        return stats

    return factory


@pytest.fixture
def stats_of():
    def factory(*observations, provenance="init"):
        stats = drrs.ScenarioStats()
        for x in observations:
            drrs.update_stats(stats, x, provenance)
        return stats

    return factory


@pytest.fixture
def state_from_means():
    """
    Allocation state with one observation per scenario, equal to the
    given k x m means.
    """

    def factory(means, budget=1000):
        k, m = len(means), len(means[0])
        state = drrs.AllocationState(k=k, m=m, budget=budget)
        for i, row in enumerate(means):
            for j, x in enumerate(row):
                drrs.update_stats(state.stats[i][j], float(x), "init")
                state.consumed += 1
        return state

    return factory


@pytest.fixture
def stub_streams():
    def factory(values, seed=0):
        return drrs.StreamSet.from_values(values, np.random.Generator(np.random.Philox(seed)))

    return factory


@pytest.fixture
def constant_streams(stub_streams):
    """
    Stub streams repeating one value per scenario.
    """

    def factory(values, length=1000):
        return stub_streams([[[x] * length for x in row] for row in values])

    return factory


@pytest.fixture
def sc_cv():
    return drrs.sc_config(3, 2, 0.5, 25.0)


@pytest.fixture
def mm_cv():
    return drrs.mm_config(4, 3, 25.0)


@pytest.fixture
def expect_allocation_error():
    @contextlib.contextmanager
    def context(round_index, step):
        try:
            yield
        except drrs.AllocationError as e:
            assert e.round_index == round_index
            assert e.step == step
        else:
            raise RuntimeError("There was no exception")

    return context


@pytest.fixture
def config_data(tmp_path):
    """
    Raw config factory; every key can be overridden.
    """

    def factory(**overrides):
        data = {
            "schema": 1,
            "name": "test",
            "instance": {"preset": "sc", "k": 2, "m": 2, "gap": 0.5, "variance": 25},
            "procedures": [{"name": "AA", "kind": "aa"}],
            "budget": {"n0": 1, "n1": [10, 40]},
            "replications": 20,
            "seed": 7,
            "outputs": {"directory": str(tmp_path / "out")},
        }
        data.update(overrides)
        return data

    return factory


@pytest.fixture
def make_config(config_data):
    def factory(**overrides):
        return drrs.parse_config(config_data(**overrides))

    return factory


@pytest.fixture
def config_file(tmp_path, config_data):
    def factory(**overrides):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config_data(**overrides)), encoding="utf-8")
        return path

    return factory
