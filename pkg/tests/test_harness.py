import asyncio
import concurrent.futures
import contextlib
import csv
import math
import time

import pytest

import drrs


def _read(path):
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.reader(line for line in f if not line.startswith("#")))


def test_wilson_interval():
    low, high = drrs.wilson_interval(0, 10)
    assert low == 0.0
    assert high == pytest.approx(0.27753279986, rel=1e-9)
    low, high = drrs.wilson_interval(3, 10)
    mirrored = drrs.wilson_interval(7, 10)
    assert (low, high) == pytest.approx((1 - mirrored[1], 1 - mirrored[0]))
    assert low < 0.3 < high
    with pytest.raises(ValueError):
        drrs.wilson_interval(1, 0)
    with pytest.raises(ValueError):
        drrs.wilson_interval(11, 10)


def test_estimate_row(sc_cv):
    records = [drrs.run_aa(sc_cv, 30, drrs.StreamSpec(1, replication=r)) for r in range(40)]
    row = drrs.EstimateRow.from_records("AA", 30, 4, records)
    correct = sum(1 for r in records if r.correct)
    assert row.pcs_hat == correct / 40
    assert row.pcs_hat + row.pics_hat == pytest.approx(1.0)
    assert row.se == pytest.approx(math.sqrt(row.pcs_hat * (1 - row.pcs_hat) / 40))
    assert row.wilson_low <= row.pcs_hat <= row.wilson_high
    assert len(row.row()) == len(drrs.EstimateRow.HEADER)
    with pytest.raises(ValueError):
        drrs.EstimateRow.from_records("AA", 30, 4, [])


def test_run_replications_matches_single_runs(sc_cv):
    spec = drrs.ProcedureSpec("KG", "gaa-kg", n0=3)
    records = drrs.run_replications(sc_cv, spec, 60, 5, range(2, 5))
    assert [r.replication for r in records] == [2, 3, 4]
    config = spec.gaa_config(sc_cv.k, sc_cv.m)
    assert records[1] == drrs.run_gaa(sc_cv, 60, config, drrs.StreamSpec(5, replication=3), procedure="KG")


@pytest.mark.asyncio
async def test_replication_lister_in_process(sc_cv):
    lister = drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 10)
    replications = [record.replication async for record in lister]
    assert replications == list(range(10))


@pytest.mark.asyncio
async def test_replication_lister_with_executor(sc_cv):
    expected = await drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 10)
    with concurrent.futures.ThreadPoolExecutor(2) as executor:
        records = await drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 10, executor=executor, workers=2)
    assert records == expected


@pytest.mark.asyncio
async def test_replication_lister_failure(sc_cv):
    with concurrent.futures.ThreadPoolExecutor(2) as executor:
        lister = drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 5, 1, 10, executor=executor)
        with pytest.raises(drrs.BudgetError):
            await lister
    with pytest.raises(ValueError):
        drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 0)


@pytest.mark.asyncio
async def test_run_experiment_single_replication(make_config):
    result = await drrs.run_experiment(make_config(replications=1))
    assert [e.pcs_hat in (0.0, 1.0) for e in result.estimates] == [True, True]
    assert len(result.records) == 2
    assert set(result.paths) == {"estimates", "records", "timings"}


@pytest.mark.asyncio
async def test_run_experiment_outputs(make_config):
    config = make_config(
        procedures=[{"name": "AA"}, {"name": "TTTS", "kind": "gaa-ttts", "n0": 3}],
        budget={"n0": 3, "n1": [5, 10]},
    )
    result = await drrs.run_experiment(config)
    estimates = _read(result.paths["estimates"])
    assert estimates[0] == list(drrs.EstimateRow.HEADER)
    assert [row[:3] for row in estimates[1:]] == [
        ["AA", "32", "5"],
        ["AA", "52", "10"],
        ["TTTS", "32", "5"],
        ["TTTS", "52", "10"],
    ]
    records = _read(result.paths["records"])
    assert records[0] == drrs.RunRecord.header(2, 2)
    assert len(records) == 1 + 4 * 20
    for estimate in result.estimates:
        rows = [r for r in records[1:] if r[1] == estimate.procedure and int(r[2]) == estimate.budget]
        assert sum(int(r[4]) for r in rows) / len(rows) == estimate.pcs_hat
    assert result.estimates_for("TTTS")[0].n1 == 5


@pytest.mark.asyncio
async def test_results_do_not_depend_on_workers(tmp_path, make_config):
    outputs = []
    for workers in (1, 2):
        directory = tmp_path / f"workers{workers}"
        config = make_config(workers=workers, outputs={"directory": str(directory)})
        await drrs.run_experiment(config)
        outputs.append(directory)
    for name in ("estimates.csv", "records.csv"):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


@pytest.mark.asyncio
async def test_run_experiment_unwritable_directory(tmp_path, make_config):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(drrs.DRRSException):
        await drrs.run_experiment(make_config(outputs={"directory": str(blocker / "out")}))


@pytest.mark.asyncio
async def test_suite_pics_decay(make_config):
    result = await drrs.suite_pics_decay(make_config(budget={"n0": 1, "n1": [5, 50, 500]}))
    rows = _read(result.paths["pics_decay"])
    assert rows[0] == ["procedure", "N", "pics_hat", "se", "log_pics", "pics_bound"]
    bounds = [float(row[5]) for row in rows[1:]]
    assert bounds == sorted(bounds, reverse=True)
    assert set(result.summary["AA"]) == {"log_slope", "monotone"}


@pytest.mark.asyncio
async def test_suite_allocation_pattern(make_config):
    config = make_config(
        instance={"preset": "mm", "k": 3, "m": 2},
        procedures=[{"name": "AA"}, {"name": "KG", "kind": "gaa-kg", "n0": 3}],
        budget={"n0": 3, "n1": [20]},
        replications=10,
    )
    result = await drrs.suite_allocation_pattern(config)
    rows = _read(result.paths["allocation"])
    assert len(rows) == 1 + 2 * 10
    assert all(1 <= int(row[4]) <= 6 for row in rows[1:])
    summary = _read(result.paths["allocation_summary"])
    assert [row[0] for row in summary[1:]] == ["AA", "KG"]
    assert all(0.0 <= float(row[5]) <= 1.0 for row in summary[1:])


@pytest.mark.asyncio
async def test_suite_gaa_consistency(make_config):
    config = make_config(
        procedures=[{"name": "TTTS", "kind": "gaa-ttts", "n0": 2}],
        budget={"n0": 2, "n1": [5, 20]},
    )
    result = await drrs.suite_gaa_consistency(config)
    rows = _read(result.paths["consistency"])
    assert rows[0] == ["procedure", "n1", "N", "pcs_hat", "se", "step_ok"]
    assert rows[1][5] == "1"
    assert result.summary["TTTS"]["final_pcs"] == result.estimates[-1].pcs_hat


@pytest.mark.asyncio
async def test_suite_compare(make_config):
    config = make_config(procedures=[{"name": "AA"}, {"name": "KG", "kind": "gaa-kg", "n0": 2}], budget={"n0": 2, "n1": [5]})
    result = await drrs.suite_compare(config)
    rows = _read(result.paths["compare"])
    assert rows[0] == ["N", "n1", "pcs_AA", "se_AA", "pcs_KG", "se_KG"]
    assert rows[1][:2] == ["28", "5"]
    assert set(drrs.SUITES) == {"pics-decay", "allocation", "gaa-consistency", "compare"}


def test_verify_lemma1(make_config):
    config = make_config(
        instance={"preset": "sc", "k": 3, "m": 2, "gap": 0.5},
        budget={"n0": 1, "n1": [832]},
        replications=10,
        thresholds={"b_delta": 0.25},
    )
    rows = drrs.verify_lemma1(config)
    assert [row.check for row in rows] == ["lemma1 N=4998", "unresolved N=4998"]
    assert all(row.passed for row in rows)
    written = _read(config.outputs.directory / "verify_lemma1.csv")
    assert written[0] == list(drrs.CheckRow._fields)


def test_verify_lemma1_failure(make_config, monkeypatch):
    monkeypatch.setattr(drrs.harness, "s_bound", lambda *args, **kwargs: drrs.SBound(-1, ()))
    config = make_config(replications=3)
    with pytest.raises(drrs.VerificationFailure) as exc:
        drrs.verify_lemma1(config)
    assert exc.value.failed == ["lemma1 N=44", "lemma1 N=164"]
    assert (config.outputs.directory / "verify_lemma1.csv").exists()


@pytest.mark.asyncio
async def test_verify_bounds(make_config):
    config = make_config(budget={"n0": 1, "n1": [25, 100]}, replications=40)
    rows = await drrs.verify_bounds(config)
    checks = [row.check for row in rows]
    assert "pcs lower bound N=104" in checks
    assert "pics bound N=404" in checks
    assert "pics monotone" in checks
    assert "zero exit b=2.0" in checks
    assert all(row.passed for row in rows)
    assert all(row.margin >= 0 for row in rows)


@pytest.mark.asyncio
async def test_verify_bounds_failure(make_config, monkeypatch):
    monkeypatch.setattr(drrs.harness, "tail_bound_lemma3", lambda n, b: -1.0)
    config = make_config(budget={"n0": 1, "n1": [5]}, replications=5)
    with pytest.raises(drrs.VerificationFailure) as exc:
        await drrs.verify_bounds(config)
    assert all(name.startswith("tail") for name in exc.value.failed)
    assert len(exc.value.rows) == 2 + 1 + 12


@pytest.mark.slow
@pytest.mark.asyncio
async def test_verify_bounds_full_scale(make_config):
    config = make_config(
        instance={"preset": "sc", "k": 5, "m": 3, "gap": 0.5},
        budget={"n0": 1, "n1": [5, 10, 20, 40, 80, 160]},
        replications=10_000,
        workers=4,
    )
    rows = await drrs.verify_bounds(config)
    assert sum(1 for row in rows if row.check.startswith("pics bound")) == 6
    assert sum(1 for row in rows if row.check.startswith("pcs lower bound")) == 6
    assert all(row.passed for row in rows)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_suite_allocation_pattern_full_scale(make_config):
    config = make_config(
        instance={"preset": "mm", "k": 5, "m": 3},
        budget={"n0": 1, "n1": [19_999]},
        replications=200,
        seed=5,
        workers=4,
    )
    result = await drrs.suite_allocation_pattern(config)
    summary = result.summary["AA N=300000"]
    assert summary["best_all_heavy_fraction"] == 1.0
    assert summary["additive_fraction"] >= 0.6
    rows = [row for row in _read(result.paths["allocation"])[1:] if row[3] == "1"]
    assert all(int(row[4]) >= 7 for row in rows)
    miss = summary["worst_case_miss"]
    bound = drrs.nonnecessity_bound_total(result.instance)
    assert bound.applicable
    assert miss > 0
    assert miss >= bound.value - 3 * math.sqrt(miss * (1 - miss) / 200)


def test_run_testbed_inventory(make_config):
    config = make_config(
        instance={
            "preset": "inventory",
            "policies": [[20, 60], [40, 80]],
            "demand_means": [5, 10],
            "horizon": 30,
            "ground_truth_reps": 20,
        }
    )
    result = drrs.run_testbed(config, "inventory")
    path = result.paths["ground_truth"]
    assert path.read_text(encoding="utf-8").startswith("# inventory")
    rows = _read(path)
    assert rows[0][:4] == ["alternative", "distribution", "alternative_label", "distribution_label"]
    assert len(rows) == 1 + 4
    assert rows[1][2] == "(20,60)" and rows[1][3] == "demand mean 5"
    assert result.summary["best"] in (1, 2)
    assert "ambiguity" not in result.paths


def test_run_testbed_queue(make_config):
    config = make_config(
        instance={
            "preset": "queue",
            "staffing": [3, 6],
            "ambiguity_set": [{"family": "exponential", "params": [0.5]}, {"family": "gamma", "params": [2, 0.5]}],
            "horizon_arrivals": 50,
            "ground_truth_reps": 10,
        }
    )
    result = drrs.run_testbed(config, "queue")
    rows = _read(result.paths["ground_truth"])
    assert len(rows) == 1 + 4
    assert rows[1][2] == "3 servers"
    ambiguity = _read(result.paths["ambiguity"])
    assert [row[0] for row in ambiguity[1:]] == ["exponential", "gamma"]
    assert result.instance.m == 2


def test_run_testbed_preset_mismatch(make_config):
    with pytest.raises(drrs.ConfigError):
        drrs.run_testbed(make_config(), "queue")


def test_emit_svg(tmp_path, sc_cv):
    pytest.importorskip("matplotlib")
    rows = [
        drrs.EstimateRow("AA", 100, 24, 1.0, 0.0, 0.0, 50, 0.0, 0.9, 1.0),
        drrs.EstimateRow("AA", 50, 11, 0.8, 0.2, 0.05, 50, 0.0, 0.7, 0.9),
        drrs.EstimateRow("KG", 100, 24, 0.9, 0.1, 0.04, 50, 0.0, 0.8, 0.95),
    ]
    path = drrs.emit_svg(rows, "pics", tmp_path / "pics.svg", title="decay")
    text = path.read_text(encoding="utf-8")
    assert text.lstrip().startswith("<?xml")
    assert "1/(10R)" in text
    assert "KG" in text and "decay" in text
    again = drrs.emit_svg(rows, "pics", tmp_path / "again.svg", title="decay")
    assert again.read_bytes() == path.read_bytes()
    drrs.emit_svg(rows[:1], "pcs", tmp_path / "single.svg")
    record = drrs.run_aa(sc_cv, 30, drrs.StreamSpec(1))
    assert "sample size" in drrs.emit_svg([record], "allocation", tmp_path / "bars.svg").read_text(encoding="utf-8")
    assert drrs.pics_floor(100) == pytest.approx(0.001)


def test_emit_svg_errors(tmp_path):
    pytest.importorskip("matplotlib")
    row = drrs.EstimateRow("AA", 100, 24, 1.0, 0.0, 0.0, 50, 0.0, 0.9, 1.0)
    with pytest.raises(ValueError):
        drrs.emit_svg([], "pics", tmp_path / "empty.svg")
    with pytest.raises(ValueError):
        drrs.emit_svg([row], "pie", tmp_path / "pie.svg")
    with pytest.raises(drrs.DRRSException):
        drrs.emit_svg([row], "pics", tmp_path / "missing" / "pics.svg")


@pytest.mark.asyncio
async def test_run_experiment_with_plots(make_config):
    pytest.importorskip("matplotlib")
    config = make_config(replications=5).with_overrides(plots=True)
    result = await drrs.run_experiment(config)
    assert result.paths["pics_svg"].exists()


@pytest.mark.asyncio
async def test_lister_timeout(sc_cv):
    lister = drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 1, timeout=1)

    async def stall():
        await asyncio.sleep(10)

    lister._next_batch = stall
    with pytest.raises(asyncio.TimeoutError):
        await lister
    with pytest.raises(ValueError):
        drrs.ReplicationLister(sc_cv, drrs.ProcedureSpec("AA"), 30, 1, 1, timeout=0)


@pytest.mark.asyncio
async def test_stalled_batch_times_out(make_config, monkeypatch):
    def stalled(*args):
        time.sleep(0.5)
        return []

    @contextlib.contextmanager
    def threads(workers):
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            yield executor

    monkeypatch.setattr(drrs.harness, "run_replications", stalled)
    monkeypatch.setattr(drrs.harness, "_executor", threads)
    config = make_config(workers=2, batch_timeout=0.1)
    with pytest.raises(drrs.BatchTimeout) as exc:
        await drrs.run_experiment(config)
    assert exc.value.seconds == 0.1
    assert "__anext__" in str(exc.value)
