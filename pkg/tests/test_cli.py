"""Command-line driver: artifacts, determinism, and usage errors."""

import csv
import json
from pathlib import Path

import pytest

from dopic.cli import main


def _run(*argv):
    return main(list(argv))


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _breakwell_run(out, trials="2", n="12"):
    return _run(
        "run",
        "--problem",
        "breakwell",
        "--grid",
        "cgl",
        "--n",
        n,
        "--trials",
        trials,
        "--out",
        str(out),
    )


def test_run_writes_all_artifacts(tmp_path):
    out = tmp_path / "bw"
    assert _breakwell_run(out) == 0
    for name in ("trials.csv", "trajectory.csv", "summary.json"):
        assert (out / name).exists()

    header, rows = _read_csv(out / "trials.csv")
    assert header == [
        "n",
        "trial",
        "converged",
        "iterations",
        "objective",
        "max_eq_violation",
        "max_ineq_violation",
        "wall_time",
        "message",
    ]
    assert len(rows) == 2

    header, rows = _read_csv(out / "trajectory.csv")
    assert header == ["t", "x", "x_d1", "x_d2", "u", "max_ineq"]
    assert len(rows) == 13  # n + 1 nodes

    summary = json.loads((out / "summary.json").read_text())
    desc = summary["descriptor"]
    assert desc["problem"] == "breakwell"
    assert desc["grid"] == "cgl"
    assert desc["basis"] == "cp1k"
    assert desc["n"] == 12
    assert "best" in summary and "12" in summary["per_n"]


def _strip_timing(out):
    header, rows = _read_csv(out / "trials.csv")
    wall = header.index("wall_time")
    stripped = [[v for i, v in enumerate(row) if i != wall] for row in rows]
    summary = json.loads((out / "summary.json").read_text())
    for payload in summary["per_n"].values():
        payload.pop("runtime_quartiles")
    return stripped, summary


def test_artifacts_are_deterministic_modulo_wall_time(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _breakwell_run(a) == 0
    assert _breakwell_run(b) == 0
    assert _strip_timing(a) == _strip_timing(b)
    assert (a / "trajectory.csv").read_text() == (b / "trajectory.csv").read_text()


def test_run_exit_code_reflects_failure(tmp_path):
    # an unachievable feasibility tolerance fails every trial
    code = _run(
        "run",
        "--problem",
        "min-fuel",
        "--grid",
        "cg",
        "--n",
        "12",
        "--trials",
        "1",
        "--tol",
        "1e-15",
        "--out",
        str(tmp_path / "fail"),
    )
    assert code == 1


def test_json_config_descriptor(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {"problem": "breakwell", "grid": "cgl", "n": 12, "trials": 1, "seed": 7}
        )
    )
    out = tmp_path / "run"
    assert _run("run", "--config", str(cfg), "--out", str(out)) == 0
    desc = json.loads((out / "summary.json").read_text())["descriptor"]
    assert desc["problem"] == "breakwell" and desc["seed"] == 7


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": "breakwell", "granularity": 3}))
    with pytest.raises(SystemExit):
        _run("run", "--config", str(cfg), "--out", str(tmp_path / "x"))


def test_order_sweep_and_range_validation(tmp_path):
    out = tmp_path / "sweep"
    assert (
        _run(
            "run",
            "--problem",
            "breakwell",
            "--grid",
            "cgl",
            "--n",
            "10:5:15",
            "--out",
            str(out),
        )
        == 0
    )
    summary = json.loads((out / "summary.json").read_text())
    assert sorted(summary["per_n"]) == ["10", "15"]
    with pytest.raises(SystemExit):
        _run("run", "--n", "5", "--out", str(tmp_path / "bad"))
    with pytest.raises(SystemExit):
        _run("run", "--n", "201", "--out", str(tmp_path / "bad"))


def test_basis_grid_mismatch_is_rejected(tmp_path):
    with pytest.raises(SystemExit):
        _run(
            "run",
            "--grid",
            "lg",
            "--basis",
            "cp1k",
            "--n",
            "12",
            "--out",
            str(tmp_path / "x"),
        )


def test_compare_tabulates_families(tmp_path, capsys):
    out = tmp_path / "cmp"
    code = _run(
        "compare",
        "--problem",
        "breakwell",
        "--grids",
        "cgl,lgl",
        "--n",
        "12",
        "--trials",
        "1",
        "--out",
        str(out),
    )
    assert code == 0
    header, rows = _read_csv(out / "compare.csv")
    assert header == [
        "nodes",
        "successes",
        "iteration_mean",
        "objective_mean",
        "runtime_mean",
    ]
    assert [row[0] for row in rows] == ["cgl", "lgl"]
    assert "nodes" in capsys.readouterr().out


def test_compare_rejects_unknown_family(tmp_path):
    with pytest.raises(SystemExit):
        _run(
            "compare",
            "--grids",
            "cgl,hermite",
            "--n",
            "12",
            "--out",
            str(tmp_path / "x"),
        )


def test_plot_data_breakwell_band(tmp_path):
    out = tmp_path / "bw"
    assert _breakwell_run(out, trials="1") == 0
    assert _run("plot-data", "--run", str(out), "--bound", "0.2") == 0
    header, rows = _read_csv(out / "figure_breakwell.csv")
    assert header[-1] == "x_bound"
    assert all(float(row[-1]) == 0.2 for row in rows)


def test_plot_data_min_fuel_band(tmp_path):
    out = tmp_path / "mf"
    code = _run(
        "run",
        "--problem",
        "min-fuel",
        "--grid",
        "cg",
        "--n",
        "15",
        "--trials",
        "1",
        "--out",
        str(out),
    )
    assert code == 0
    assert _run("plot-data", "--run", str(out)) == 0
    header, _ = _read_csv(out / "figure_min-fuel.csv")
    assert header[-2:] == ["u_min", "u_max"]


def test_plot_data_orbit_polar_angle(tmp_path):
    out = tmp_path / "orb"
    code = _run(
        "run",
        "--problem",
        "orbit-min-time",
        "--grid",
        "cg",
        "--n",
        "15",
        "--trials",
        "1",
        "--out",
        str(out),
    )
    assert code == 0
    assert _run("plot-data", "--run", str(out)) == 0
    header, rows = _read_csv(out / "figure_orbit-min-time.csv")
    assert {"theta", "phi_min", "phi_max"} <= set(header)
    theta = [float(row[header.index("theta")]) for row in rows]
    assert abs(theta[0]) < 0.05  # theta(0) = 0 up to the first interior node
    assert theta[-1] > theta[0]  # prograde transfer accumulates angle


def test_plot_data_missing_run_directory(tmp_path):
    assert _run("plot-data", "--run", str(tmp_path / "nope")) == 2
