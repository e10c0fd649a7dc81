"""Minimum-energy double integrator with a state ceiling (Breakwell).

x'' = u on [0, 1], x(0) = x(1) = 0, x'(0) = 1, x'(1) = -1, cost
(1/2) integral of u^2, path constraint x <= bound enforced at the nodes.
"""

from __future__ import annotations

from dopic.bases import Grid
from dopic.problems.base import StagedProblem
from dopic.transcription import CoordinateSpec, OcpDefinition, Transcription

__all__ = ["build_breakwell"]


def build_breakwell(grid: Grid, bound: float = 0.2) -> StagedProblem:
    if bound <= 0:
        raise ValueError("bound must be positive")

    ocp = OcpDefinition(
        coordinates=[CoordinateSpec("x", 2, (0.0, 1.0))],
        controls=["u"],
        dynamics=lambda levels, controls, tau, tm: {"x": controls["u"]},
        terminal_rows=[
            lambda end, tm: end.comp("x", 0, +1) - 0.0,
            lambda end, tm: end.comp("x", 1, +1) - tm.deriv_scale(1) * (-1.0),
        ],
        ineq_rows=lambda ctx: ctx.levels["x"][0] - bound,
        lagrange=lambda levels, controls, tau, tm: 0.5 * controls["u"] ** 2,
        t0=0.0,
        tf=1.0,
        affine_eq=True,
        affine_ineq=True,
        objective_depends=("u:u",),
    )
    tr = Transcription(ocp, grid)
    return StagedProblem(
        name="breakwell",
        stages=[tr],
        sample_x0=lambda rng: rng.uniform(0.0, 1.0, tr.n_chi),
    )
