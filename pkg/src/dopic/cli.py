"""Batch experiment driver.

Subcommands:

* ``run``       -- solve one problem over (grid, n, trials, seed), writing
  per-trial CSV, best-trial trajectory CSV, and a JSON summary;
* ``compare``   -- run the same experiment across several node families and
  tabulate success counts / iterations / objective / runtime per family;
* ``plot-data`` -- expand a finished run directory into per-figure CSV
  bundles (time series plus constant constraint-band columns).

Artifacts are deterministic for a fixed descriptor except for the wall-time
columns, which depend on the machine.  CSV floats use 17 significant digits
so values round-trip exactly; JSON summaries are pretty-printed with sorted
keys.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from dopic.bases import NodeFamily, make_grid, poly_family_of
from dopic.problems import PROBLEM_NAMES, build_problem
from dopic.problems.orbit import recover_polar_angle
from dopic.solver import SolverOptions, batch_solve, solve, summarize

ARTIFACT_SCHEMA_VERSION = 1

__all__ = ["main"]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_orders(text: str) -> list[int]:
    """Either a single order ("50") or a start:step:stop sweep ("15:5:50")."""
    if ":" in text:
        start, step, stop = (int(p) for p in text.split(":"))
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"bad order sweep {text!r}")
        return list(range(start, stop + 1, step))
    return [int(text)]


def _descriptor(args) -> dict:
    return {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "problem": args.problem,
        "basis": poly_family_of(NodeFamily(args.grid)).value,
        "grid": args.grid,
        "n": args.n if len(args.n) > 1 else args.n[0],
        "trials": args.trials,
        "seed": args.seed,
        "solver": args.solver,
        "tol": args.tol,
        "stage_rate_constraints": args.stage_rate_constraints,
    }


def _load_config(args, parser) -> None:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    known = {
        "problem": str,
        "grid": str,
        "basis": str,
        "n": lambda v: _parse_orders(str(v)),
        "trials": int,
        "seed": int,
        "solver": str,
        "tol": float,
        "stage_rate_constraints": str,
        "out": str,
    }
    for key, value in cfg.items():
        if key not in known:
            parser.error(f"unknown descriptor key {key!r} in {args.config}")
        setattr(args, key, known[key](value))


def _options_for(problem, args) -> SolverOptions:
    opts = problem.default_options
    overrides = {"rng_seed": args.seed}
    if args.solver is not None:
        overrides["algorithm"] = args.solver
    if args.tol is not None:
        overrides["constraint_tolerance"] = args.tol
    return dataclasses.replace(opts, **overrides)


def _trial_runner(problem, staged: bool):
    """A (x0, options) -> SolveReport callable honoring the staging switch."""
    if staged:
        return problem.solve_trial
    final = problem.stages[-1]
    return lambda x0, options: solve(final.nlp_problem(), x0, options)


def _trajectory_rows(problem, chi):
    tr = problem.transcription
    t, states, controls = tr.trajectory(chi)
    header = ["t"]
    columns = [t]
    for coord in tr.ocp.coordinates:
        for k in range(coord.order + 1):
            header.append(coord.name if k == 0 else f"{coord.name}_d{k}")
            columns.append(states[coord.name][k])
    for u in tr.ocp.controls:
        header.append(u)
        columns.append(controls[u])
    ineq = tr.ineq_constraints(chi)
    header.append("max_ineq")
    columns.append(np.full_like(t, np.max(ineq) if ineq.size else 0.0))
    return header, list(zip(*columns))


REPORT_COLUMNS = [
    "trial",
    "converged",
    "iterations",
    "objective",
    "max_eq_violation",
    "max_ineq_violation",
    "wall_time",
    "message",
]


def _report_row(trial, rep):
    return [
        trial,
        int(rep.converged),
        rep.iterations,
        rep.objective,
        rep.max_eq_violation,
        rep.max_ineq_violation,
        rep.wall_time,
        rep.message,
    ]


def _stats_payload(stats) -> dict:
    return {
        "trials": stats.trials,
        "successes": stats.successes,
        "iteration_mean": stats.iteration_mean,
        "objective_mean": stats.objective_mean,
        "objective_std": stats.objective_std,
        "runtime_quartiles": list(stats.runtime_quartiles),
    }


def _run_one(args, n: int, options_seed_offset: int = 0):
    grid = make_grid(NodeFamily(args.grid), n)
    problem = build_problem(args.problem, grid)
    options = _options_for(problem, args)
    runner = _trial_runner(problem, args.stage_rate_constraints == "on")
    reports, stats = batch_solve(
        lambda: runner, args.trials, problem.sample_x0, options
    )
    return problem, reports, stats


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    all_rows = []
    per_n = {}
    best = None  # (objective, problem, report)
    for n in args.n:
        problem, reports, stats = _run_one(args, n)
        per_n[n] = _stats_payload(stats)
        for trial, rep in enumerate(reports):
            all_rows.append([n] + _report_row(trial, rep))
            if rep.converged and (best is None or rep.objective < best[0]):
                best = (rep.objective, problem, rep)

    _write_csv(out / "trials.csv", ["n"] + REPORT_COLUMNS, all_rows)
    summary = {
        "descriptor": _descriptor(args),
        "per_n": {str(n): payload for n, payload in per_n.items()},
    }
    if best is not None:
        header, rows = _trajectory_rows(best[1], best[2].chi)
        _write_csv(out / "trajectory.csv", header, rows)
        summary["best"] = {
            "objective": best[2].objective,
            "iterations": best[2].iterations,
            "chi": [float(v) for v in best[2].chi],
        }
    _write_json(out / "summary.json", summary)

    converged = sum(1 for row in all_rows if row[2])
    print(f"{args.problem}: {converged}/{len(all_rows)} trials converged -> {out}")
    return 0 if converged >= 1 else 1


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for grid_name in args.grids:
        args.grid = grid_name
        _, reports, stats = _run_one(args, args.n[0])
        runtimes = [r.wall_time for r in reports]
        rows.append(
            [
                grid_name,
                stats.successes,
                stats.iteration_mean,
                stats.objective_mean,
                float(np.mean(runtimes)),
            ]
        )
    header = ["nodes", "successes", "iteration_mean", "objective_mean", "runtime_mean"]
    _write_csv(out / "compare.csv", header, rows)
    widths = [max(len(h), 12) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(_fmt(v)[:w].ljust(w) for v, w in zip(row, widths)))
    return 0


def _read_csv(path: Path):
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_maybe_float(v) for v in row] for row in reader]
    return header, rows


def _maybe_float(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def cmd_plot_data(args) -> int:
    run_dir = Path(args.run)
    traj_path = run_dir / "trajectory.csv"
    summary_path = run_dir / "summary.json"
    if not traj_path.exists() or not summary_path.exists():
        print(f"no trajectory artifacts in {run_dir}", file=sys.stderr)
        return 2
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    descriptor = summary["descriptor"]
    header, rows = _read_csv(traj_path)
    cols = {name: np.array([row[i] for row in rows]) for i, name in enumerate(header)}
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)

    problem = descriptor["problem"]
    bundle_header = list(header)
    bundle_cols = dict(cols)
    if problem == "min-fuel":
        bundle_cols["u_min"] = np.full_like(cols["t"], -1.0)
        bundle_cols["u_max"] = np.full_like(cols["t"], 1.0)
        bundle_header += ["u_min", "u_max"]
    elif problem in ("orbit-min-time", "orbit-max-radius"):
        t = cols["t"]
        grid = make_grid(NodeFamily(descriptor["grid"]), int(descriptor["n"]))
        from dopic.transcription import TimeMap

        tm = TimeMap(float(t[0]), float(t[-1]))
        theta = recover_polar_angle(grid, cols["r"], cols["v_t"], tm)
        bundle_cols["theta"] = theta
        bundle_cols["phi_min"] = np.zeros_like(t)
        bundle_cols["phi_max"] = np.full_like(t, 2.0 * math.pi)
        bundle_header += ["theta", "phi_min", "phi_max"]
    elif problem == "rocket-landing":
        from dopic.problems.rocket import DELTA_MAX, DELTA_MIN, PHI_MAX

        t = cols["t"]
        bundle_cols["delta_min"] = np.full_like(t, DELTA_MIN)
        bundle_cols["delta_max"] = np.full_like(t, DELTA_MAX)
        bundle_cols["phi_min"] = np.full_like(t, -PHI_MAX)
        bundle_cols["phi_max"] = np.full_like(t, PHI_MAX)
        bundle_header += ["delta_min", "delta_max", "phi_min", "phi_max"]
    elif problem == "breakwell":
        bundle_cols["x_bound"] = np.full_like(cols["t"], float(args.bound))
        bundle_header.append("x_bound")

    path = out / f"figure_{problem}.csv"
    _write_csv(path, bundle_header, list(zip(*(bundle_cols[h] for h in bundle_header))))
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dopic", description="Pseudospectral trajectory optimization runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--problem", choices=PROBLEM_NAMES, default="min-fuel")
        p.add_argument(
            "--basis",
            choices=["cp1k", "cp2k", "legendre"],
            default=None,
            help="polynomial family; must match the grid when given",
        )
        p.add_argument("--n", type=_parse_orders, default=[25])
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--solver", choices=["sqp_like", "interior_point_like"], default=None
        )
        p.add_argument("--tol", type=float, default=None)
        p.add_argument(
            "--stage-rate-constraints",
            choices=["on", "off"],
            default="on",
            dest="stage_rate_constraints",
            help="warm-start rate-constrained problems from an unconstrained stage",
        )
        p.add_argument(
            "--out",
            default=os.environ.get("DOPIC_OUT_ROOT", "runs"),
            help="output directory (env DOPIC_OUT_ROOT sets the default)",
        )
        p.add_argument("--config", default=None, help="JSON run descriptor")

    runp = sub.add_parser("run", help="solve one problem and write artifacts")
    common(runp)
    runp.add_argument("--grid", choices=[f.value for f in NodeFamily], default="cg")

    cmpp = sub.add_parser("compare", help="compare node families on one problem")
    common(cmpp)
    cmpp.add_argument(
        "--grids",
        default="cg,cgl,cp2k,lg,lgl",
        help="comma-separated node families",
    )

    plotp = sub.add_parser("plot-data", help="emit per-figure CSV bundles")
    plotp.add_argument("--run", required=True, help="finished run directory")
    plotp.add_argument("--out", default=None)
    plotp.add_argument("--bound", type=float, default=0.2, help="breakwell bound")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "plot-data":
        return cmd_plot_data(args)

    if args.config:
        _load_config(args, parser)
    if not 10 <= min(args.n) <= max(args.n) <= 200:
        parser.error("orders must lie within [10, 200]")
    if args.command == "compare":
        args.grids = [g.strip() for g in args.grids.split(",")]
        for g in args.grids:
            if g not in [f.value for f in NodeFamily]:
                parser.error(f"unknown node family {g!r}")
        args.grid = args.grids[0]
    if args.basis is not None:
        expected = poly_family_of(NodeFamily(args.grid)).value
        if args.basis != expected:
            parser.error(
                f"basis {args.basis!r} does not match grid {args.grid!r} "
                f"(expected {expected!r})"
            )

    if args.command == "run":
        return cmd_run(args)
    return cmd_compare(args)


if __name__ == "__main__":
    sys.exit(main())
