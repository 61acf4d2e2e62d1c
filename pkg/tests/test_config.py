import json
import pathlib

import pytest

import drrs


def test_minimal_config(make_config):
    config = make_config()
    assert config.name == "test"
    assert config.instance.preset == "sc"
    assert config.instance.shape == (2, 2)
    assert config.procedures == (drrs.ProcedureSpec("AA", "aa"),)
    assert config.budget.budgets(2, 2) == [44, 164]
    assert (config.replications, config.seed, config.workers) == (20, 7, 1)
    assert config.thresholds == drrs.Thresholds(0.05, None)
    assert not config.outputs.plots


def test_defaults():
    config = drrs.parse_config(
        {
            "schema": 1,
            "instance": {"preset": "mm", "k": 3, "m": 2},
            "budget": {"n1": [5]},
        }
    )
    assert config.name == "experiment"
    assert config.seed == drrs.DEFAULT_SEED
    assert config.replications == 1000
    assert config.procedures[0].kind == "aa"
    assert config.outputs.directory == pathlib.Path("out")
    assert config.instance.build(config.seed).variances[0, 0] == drrs.DEFAULT_VARIANCE


def test_batch_timeout(make_config):
    assert make_config().batch_timeout is None
    assert make_config(batch_timeout=30).batch_timeout == 30.0


def test_b_delta_range_is_reported(make_config):
    assert make_config(thresholds={"b_delta": 0.25}).thresholds.b_delta == 0.25
    with pytest.raises(drrs.ConfigError) as exc:
        make_config(thresholds={"b_delta": 0.5})
    assert exc.value.errors == ["thresholds.b_delta: should lie in (0, 0.5), got 0.5"]


def test_budget_grid():
    assert drrs.BudgetGrid(1, (20, 40)).budgets(5, 3) == [315, 615]
    assert drrs.BudgetGrid(20, (0,)).budgets(2, 2) == [80]


def test_every_problem_is_reported(config_data):
    data = config_data(replications=-1, instance={"preset": "cube"})
    del data["schema"]
    with pytest.raises(drrs.ConfigError) as exc:
        drrs.parse_config(data)
    errors = exc.value.errors
    assert len(errors) >= 3
    assert any("schema" in e for e in errors)
    assert any("cube" in e for e in errors)
    assert any("replications" in e for e in errors)


@pytest.mark.parametrize(
    "overrides",
    [
        {"schema": 2},
        {"instance": {"preset": "sc", "k": 1, "m": 2, "gap": 0.5}},
        {"instance": {"preset": "sc", "k": 2, "m": 2, "gap": -0.5}},
        {"instance": {"preset": "sc", "k": 2, "m": 2}},
        {"instance": {"preset": "queue", "staffing": [3]}},
        {"instance": {"preset": "inventory", "policies": [[5, 5]], "demand_means": [1]}},
        {"procedures": []},
        {"procedures": [{"name": "A"}, {"name": "A"}]},
        {"procedures": [{"name": "A", "kind": "bandit"}]},
        {"procedures": [{"name": "G", "kind": "gaa", "m_rule": {"tag": "kg"}}]},
        {"procedures": [{"name": "G", "kind": "gaa", "m_rule": {"tag": "ttts", "epsilon": 2.0}}]},
        {"procedures": [{"name": "G", "kind": "gaa-kg", "n0": 20}]},
        {"budget": {"n0": 1, "n1": []}},
        {"seed": -3},
        {"workers": 0},
        {"thresholds": {"theta": 1.5}},
        {"thresholds": {"b_delta": 0.9}},
        {"instance": {"preset": "mm", "k": 3, "m": 2}, "thresholds": {"b_delta": -1}},
        {"batch_timeout": 0},
        {"batch_timeout": "soon"},
        {"replications": True},
    ],
)
def test_invalid_configs(make_config, overrides):
    with pytest.raises(drrs.ConfigError):
        make_config(**overrides)


def test_procedure_kinds(make_config):
    config = make_config(
        procedures=[
            {"name": "AA"},
            {"name": "KG", "kind": "gaa-kg", "n0": 5},
            {"name": "TTTS", "kind": "gaa-ttts", "n0": 5, "beta": 0.7},
            {
                "name": "G",
                "kind": "gaa",
                "n0": 2,
                "m_rule": {"tag": "kg", "epsilon": 0.2, "exploration": "round_robin"},
                "k_rule": {"tag": "equal"},
            },
        ],
        budget={"n0": 5, "n1": [10]},
    )
    aa, kg, ttts, gaa = config.procedures
    assert aa.gaa_config(2, 2) is None
    assert aa.initial_size == 1
    kg_config = kg.gaa_config(2, 2)
    assert (kg_config.n0, kg_config.delta_m, kg_config.delta_k) == (5, 1, 1)
    assert kg_config.m_rule.tag == "kg+eps"
    assert ttts.gaa_config(2, 2).joint_mode
    assert ttts.gaa_config(2, 2).m_rule.rule.beta == 0.7
    explicit = gaa.gaa_config(2, 2)
    assert (explicit.delta_m, explicit.delta_k) == (2, 1)
    assert explicit.m_rule.mode == "round_robin"
    assert explicit.k_rule.direction == "min"


def test_rule_spec_build():
    assert isinstance(drrs.RuleSpec("equal").build("max"), drrs.EqualRule)
    kg = drrs.RuleSpec("kg", direction="min", known_variance=True).build("max")
    assert kg.direction == "min" and kg.known_variance
    wrapped = drrs.RuleSpec("ttts", beta=0.3, epsilon=0.1).build("min")
    assert isinstance(wrapped, drrs.EpsilonWrap)
    assert wrapped.rule.beta == 0.3 and wrapped.direction == "min"


def test_instance_presets():
    sc = drrs.InstanceSpec("sc", {"k": 3, "m": 2, "gap": 0.5}).build(1)
    assert sc.means.tolist() == drrs.sc_config(3, 2, 0.5, 25.0).means.tolist()
    explicit = drrs.InstanceSpec(
        "explicit",
        {"k": 2, "m": 1, "means": [0.0, 1.0], "variances": [1.0, 2.0], "canonical": True},
    ).build(1)
    assert explicit.canonical and explicit.variances.tolist() == [[1.0], [2.0]]


def test_queue_ambiguity_options():
    given = drrs.InstanceSpec(
        "queue",
        {"staffing": [3, 6], "ambiguity_set": [{"family": "exponential", "params": [1.0]}]},
    )
    assert given.ambiguity_set(1).distributions == (drrs.ParametricDistribution("exponential", (1.0,)),)
    assert given.shape == (2, -1)


def test_with_overrides(make_config, tmp_path):
    config = make_config().with_overrides(seed=3, replications=5, workers=2, directory=tmp_path, plots=True)
    assert (config.seed, config.replications, config.workers) == (3, 5, 2)
    assert config.outputs == drrs.OutputSpec(tmp_path, True)
    assert make_config().with_overrides() == make_config()
    with pytest.raises(drrs.ConfigError):
        make_config().with_overrides(replications=0)
    with pytest.raises(drrs.ConfigError) as exc:
        make_config().with_overrides(workers=0, seed=-1)
    assert len(exc.value.errors) == 2


def test_load_config(config_file):
    config = drrs.load_config(config_file(name="from-file"))
    assert config.name == "from-file"


def test_load_config_errors(tmp_path):
    with pytest.raises(drrs.ConfigError) as exc:
        drrs.load_config(tmp_path / "missing.json")
    assert "cannot read" in exc.value.errors[0]
    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "schema": 1,\n  oops\n}', encoding="utf-8")
    with pytest.raises(drrs.ConfigError) as exc:
        drrs.load_config(broken)
    assert "line 3" in exc.value.errors[0]
    listed = tmp_path / "list.json"
    listed.write_text(json.dumps([1, 2]), encoding="utf-8")
    with pytest.raises(drrs.ConfigError):
        drrs.load_config(listed)


@pytest.mark.parametrize("path", sorted((pathlib.Path(__file__).parent.parent / "configs").glob("*.json")), ids=str)
def test_shipped_configs_parse(path):
    config = drrs.load_config(path)
    assert config.schema == drrs.SCHEMA_VERSION
    assert config.replications >= 1
