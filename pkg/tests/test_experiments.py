"""Experiment driver: seeding, CSV schema, pairing, summaries, worked example."""

import csv
import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from tacosim.experiments import (
    MECHANISMS,
    ExperimentConfig,
    _seed_column,
    _stream,
    bound_report,
    columns_for,
    config_lines,
    make_instance,
    run_example,
    run_interrupt,
    run_montecarlo,
    run_scalability,
    run_sweep_gamma,
    write_csv,
)


def _quick_cfg(**kw):
    base = dict(
        scenario="random",
        n=3,
        m=4,
        trials=4,
        epsilon=0.1,
        d0=1,
        backend="numpy",
        mechanisms=MECHANISMS,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(scenario="exotic")
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(mechanisms=("taco", "bogus"))
    with pytest.raises(ValueError):
        ExperimentConfig(mechanisms=())
    with pytest.raises(ValueError):
        ExperimentConfig(b_min=2.0, b_max=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(workers=0)
    with pytest.raises(ValueError):
        ExperimentConfig(epsilon=-1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(gamma=1)
    with pytest.raises(ValueError):
        ExperimentConfig(base_seed=-1)


def test_config_lines_defaults():
    lines = config_lines(ExperimentConfig())
    assert "d0 = 1/50" in lines
    assert "epsilon = none" in lines
    assert "mechanisms = " + ",".join(MECHANISMS) in lines
    assert "scenario = waypoint" in lines


def test_make_instance_deterministic():
    cfg = _quick_cfg()
    a, eps_a = make_instance(cfg, _stream((42, 0), 0))
    b, eps_b = make_instance(cfg, _stream((42, 0), 0))
    np.testing.assert_array_equal(a.C, b.C)
    np.testing.assert_array_equal(a.b, b.b)
    assert eps_a == eps_b == 0.1
    c, _ = make_instance(cfg, _stream((42, 1), 0))
    assert not np.array_equal(a.C, c.C)


def test_make_instance_epsilon_resolution():
    rel = _quick_cfg(epsilon=None, epsilon_rel=1e-3)
    problem, eps = make_instance(rel, _stream((42, 0), 0))
    assert eps == pytest.approx(1e-3 * float(problem.C.mean()))
    fixture_cfg = ExperimentConfig(scenario="example2", epsilon=0.5)
    problem, eps = make_instance(fixture_cfg, _stream((42, 0), 0))
    assert (problem.n, problem.m) == (2, 2) and eps == 0.5
    waypoint_cfg = ExperimentConfig(scenario="waypoint", n=3)
    problem, _ = make_instance(waypoint_cfg, _stream((42, 0), 0))
    assert problem.m == 6  # one option per arrival ordering


def test_seed_column_deterministic():
    assert _seed_column((42, 0)) == _seed_column((42, 0))
    assert _seed_column((42, 0)) != _seed_column((42, 1))


def test_run_montecarlo_rows_and_files(tmp_path):
    cfg = _quick_cfg()
    res = run_montecarlo(cfg, tmp_path)
    assert len(res.rows) == cfg.trials * len(MECHANISMS)
    assert res.failures == 0
    assert res.columns == columns_for(res.rows)
    assert res.columns[-1] == "interrupt_step"
    assert res.csv_path.exists() and res.summary_path.exists()
    assert "cap_failures = 0" in res.summary_text
    assert "[taco]" in res.summary_text
    for row in res.rows:
        assert row["status"] == "ok"
        assert row["gamma"] == "9/10"
        assert row["d0"] == "1"
        assert row["interrupt_step"] == 0
        if row["mechanism"] == "taco":
            assert row["steps"] >= 1 and row["cycles"] >= 1
        else:
            assert row["steps"] == 0 and row["rounds"] == 0
            for i in range(cfg.n):
                assert row[f"raw_cost_{i + 1}"] == row[f"settled_cost_{i + 1}"]
    # Same trial, same seed column on every mechanism row.
    by_trial = {}
    for row in res.rows:
        by_trial.setdefault(row["trial"], set()).add(row["seed"])
    assert all(len(seeds) == 1 for seeds in by_trial.values())


def test_run_montecarlo_deterministic_and_worker_invariant(tmp_path):
    cfg = _quick_cfg()
    first = run_montecarlo(cfg, tmp_path / "a")
    again = run_montecarlo(cfg, tmp_path / "b")
    assert first.rows == again.rows
    two = run_montecarlo(_quick_cfg(workers=2), tmp_path / "c")
    assert two.rows == first.rows
    assert (tmp_path / "a" / "montecarlo.csv").read_bytes() == (
        tmp_path / "c" / "montecarlo.csv"
    ).read_bytes()


def test_run_sweep_gamma_pairs_instances(tmp_path):
    cfg = _quick_cfg(trials=3, mechanisms=("taco", "utilitarian"))
    res = run_sweep_gamma(cfg, ["1/2", "9/10"], tmp_path)
    assert len(res.rows) == 2 * 3 * 2
    assert "[gamma=1/2 taco]" in res.summary_text
    assert "gamma_list = 1/2,9/10" in res.summary_text
    util = {}
    for row in res.rows:
        assert row["gamma"] in ("1/2", "9/10")
        if row["mechanism"] == "utilitarian":
            util.setdefault(row["trial"], []).append(row)
    for rows in util.values():
        assert len(rows) == 2
        a, b = rows
        assert a["seed"] == b["seed"]
        assert a["chosen_option"] == b["chosen_option"]
        assert a["raw_cost_1"] == b["raw_cost_1"]
    with pytest.raises(ValueError):
        run_sweep_gamma(cfg, [])


def test_run_interrupt(tmp_path):
    cfg = _quick_cfg(trials=2, mechanisms=("taco",))
    res = run_interrupt(cfg, [0, 3], tmp_path)
    assert len(res.rows) == 4
    assert "interrupt_steps = 0,3" in res.summary_text
    assert "[interrupt_step=3 taco]" in res.summary_text
    for row in res.rows:
        if row["interrupt_step"] == 3:
            assert row["steps"] <= 3
        else:
            assert row["interrupt_step"] == 0
    with pytest.raises(ValueError):
        run_interrupt(cfg, [])
    with pytest.raises(ValueError):
        run_interrupt(cfg, [-1])


def test_run_scalability_forces_random_scenario(tmp_path):
    cfg = ExperimentConfig(
        scenario="waypoint", trials=2, base_seed=7, epsilon=0.1, d0=1,
        backend="numpy", mechanisms=("taco",),
    )
    res = run_scalability(cfg, [2], [3], tmp_path)
    assert len(res.rows) == 2
    for row in res.rows:
        assert (row["n"], row["m"]) == (2, 3)
    assert "[n=2 m=3 taco]" in res.summary_text
    with pytest.raises(ValueError):
        run_scalability(cfg, [], [3], tmp_path)


def test_cap_rows_are_reported(tmp_path):
    cfg = ExperimentConfig(
        scenario="example2", trials=1, epsilon=1e-6, d0=1, max_steps=3,
        backend="numpy", mechanisms=("taco",),
    )
    res = run_montecarlo(cfg, tmp_path)
    assert res.failures == 1
    row = res.rows[0]
    assert row["status"] == "cap"
    assert row["steps"] == 3
    assert "cap_failures = 1" in res.summary_text
    # The cap row carries no metrics; the CSV writer must blank them out.
    text = res.csv_path.read_text().splitlines()
    assert len(text) == 2
    header = text[0].split(",")
    data = text[1].split(",")
    assert data[header.index("og_raw")] == ""
    assert data[header.index("status")] == "cap"


def test_write_csv_roundtrip(tmp_path):
    rows = [
        {"trial": 0, "seed": 11, "mechanism": "taco", "n": 2, "m": 2,
         "gamma": "9/10", "epsilon": "0.1", "d0": "1", "status": "ok",
         "steps": 5, "interrupt_step": 0},
    ]
    columns = columns_for(rows)
    path = tmp_path / "out.csv"
    write_csv(path, rows, columns)
    with open(path, newline="") as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == 1
    assert back[0]["mechanism"] == "taco"
    assert back[0]["steps"] == "5"
    assert back[0]["og_raw"] == ""  # restval fills columns the row lacks
    assert list(back[0]) == columns


def test_columns_for_scales_with_n():
    rows = [{"n": 3}, {"n": 5}]
    cols = columns_for(rows)
    assert "raw_cost_5" in cols and "settled_cost_5" in cols
    assert "raw_cost_6" not in cols
    assert cols[-1] == "interrupt_step"


def test_run_example_golden():
    run = run_example()
    assert run.detected_spans == [(4, 5)]
    assert run.outcome.steps == 5
    first, last = run.steps[0], run.steps[-1]
    assert first.offers == [[0, 0], [0, 0]] and first.pays == [[0, 0], [0, 0]]
    np.testing.assert_allclose(first.profits, [[-10.0, -4.0], [-7.0, -9.0]])
    assert first.selections == [1, None]
    assert last.step == 5
    assert last.offers == [[1, 3], [1, 3]]
    assert last.pays == [[Fraction(0), Fraction(4)], [Fraction(2), Fraction(2)]]
    np.testing.assert_allclose(last.profits, [[-9.2, -4.8], [-8.2, -7.8]])
    assert last.selections == [1, 1]
    assert run.outcome.settlements == [Fraction(-1), Fraction(1)]


def test_bound_report_small_and_large():
    small = bound_report(2, 2, "9/10", 0.1, 1, 1.2)
    assert "reductions until guaranteed tolerance: 35" in small
    assert "per-cycle step bound: 162" in small
    assert "total step bound: 5670" in small
    large = bound_report(10, 100, "9/10", 0.1, 1, 1.5)
    assert "~10^" in large
