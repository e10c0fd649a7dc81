"""Second-order minimum-fuel problem with control saturation.

Double integrator driven to rest at the origin, cost integral of |u|,
control box -1 <= u <= 1.  The optimal control is bang-zero-bang.
"""

from __future__ import annotations

import numpy as np

from dopic.bases import Grid
from dopic.problems.base import StagedProblem
from dopic.problems.oracles import min_fuel_minimum_time
from dopic.solver import SolverOptions
from dopic.transcription import CoordinateSpec, OcpDefinition, Transcription

__all__ = ["build_min_fuel"]


def build_min_fuel(
    grid: Grid,
    x0: float = 0.0,
    xdot0: float = 10.0,
    tf: float | None = None,
    formulation: str = "direct",
) -> StagedProblem:
    """tf defaults to 1.5x the minimum time for the given initial state.

    ``formulation`` selects how the |u| cost is posed:

    * ``"direct"``  -- integrate |u| as written (nonsmooth objective);
    * ``"slack"``   -- add a slack control s with s >= |u| via the linear
      rows u - s <= 0 and -u - s <= 0 and integrate s instead, which makes
      objective and constraints affine and far friendlier to an SQP.
    """
    if formulation not in ("direct", "slack"):
        raise ValueError(f"unknown formulation {formulation!r}")
    if tf is None:
        tf = 1.5 * min_fuel_minimum_time(x0, xdot0)

    slack = formulation == "slack"

    def ineq_rows(ctx):
        u = ctx.controls["u"]
        rows = [u - 1.0, -1.0 - u]
        if slack:
            s = ctx.controls["s"]
            rows += [u - s, -u - s]
        return np.concatenate(rows)

    if slack:
        running = lambda levels, controls, tau, tm: controls["s"]
    else:
        running = lambda levels, controls, tau, tm: np.abs(controls["u"])

    ocp = OcpDefinition(
        coordinates=[CoordinateSpec("x", 2, (x0, xdot0))],
        controls=["u", "s"] if slack else ["u"],
        dynamics=lambda levels, controls, tau, tm: {"x": controls["u"]},
        terminal_rows=[
            lambda end, tm: end.comp("x", 0, +1) - 0.0,
            lambda end, tm: end.comp("x", 1, +1) - tm.deriv_scale(1) * 0.0,
        ],
        ineq_rows=ineq_rows,
        lagrange=running,
        t0=0.0,
        tf=tf,
        affine_eq=True,
        affine_ineq=True,
        affine_objective=slack,
        objective_depends=None if slack else ("u:u",),
    )
    tr = Transcription(ocp, grid)
    return StagedProblem(
        name="min-fuel",
        stages=[tr],
        sample_x0=lambda rng: rng.uniform(0.0, 1.0, tr.n_chi),
        default_options=SolverOptions(max_iterations=500),
    )
