"""Planar low-thrust circular orbit raising.

Two variants over the same nondimensional dynamics (mu = 1): a minimum-time
transfer between the unit circular orbit and r = 1.525, and a maximum-radius
transfer over a fixed horizon t_f = 3.32 ending on some circular orbit.  The
radial coordinate r carries second-order dynamics, the tangential velocity
v_t first-order ones; the single control is the thrust angle phi in [0, 2pi]
with an inter-node rate limit of 400 deg per time unit.

Each variant is staged: the rate constraint enters only in the second stage,
warm-started from the first.
"""

from __future__ import annotations

import math

import numpy as np

from dopic.bases import Grid, poly_family_of
from dopic.opic import build_operator
from dopic.problems.base import StagedProblem
from dopic.solver import SolverOptions
from dopic.transcription import (
    CoordinateSpec,
    OcpDefinition,
    TimeMap,
    Transcription,
    assemble_rate_constraints,
)

__all__ = ["build_orbit_raising", "recover_polar_angle"]

MU = 1.0
THRUST = 0.1405
M0 = 1.0
MDOT = -0.07487
RATE_MAX = math.radians(400.0)  # thrust-angle rate bound per time unit

R_TARGET = 1.525
RDOT_TARGET = 0.0
VT_TARGET = 0.8098
TF_FIXED = 3.32


def _dynamics(levels, controls, tau, tm):
    r = levels["r"][0]
    rdot = levels["r"][1]
    vt = levels["v_t"][0]
    phi = controls["phi"]
    accel = THRUST / (M0 + MDOT * tm.to_time(tau))
    return {
        "r": vt**2 / r - MU / r**2 + accel * np.sin(phi),
        "v_t": -rdot * vt / r + accel * np.cos(phi),
    }


def _ineq_rows(with_rate: bool, free_tf: bool):
    def rows(ctx):
        phi = ctx.controls["phi"]
        parts = [phi - 2.0 * math.pi, -phi]
        if with_rate:
            parts.append(
                assemble_rate_constraints(phi, ctx.tm, ctx.grid, RATE_MAX)
            )
        if free_tf:
            parts.append(np.array([-(ctx.tm.delta)]))
        return np.concatenate(parts)

    return rows


def build_orbit_raising(grid: Grid, mode: str = "min_time") -> StagedProblem:
    if mode not in ("min_time", "max_radius"):
        raise ValueError(f"unknown mode {mode!r}")
    free_tf = mode == "min_time"

    if free_tf:
        terminal = [
            lambda end, tm: end.comp("r", 0, +1) - R_TARGET,
            lambda end, tm: end.comp("r", 1, +1) - tm.deriv_scale(1) * RDOT_TARGET,
            lambda end, tm: end.comp("v_t", 0, +1) - VT_TARGET,
        ]
        mayer = lambda end, tm: tm.delta
    else:
        terminal = [
            lambda end, tm: end.comp("r", 1, +1) - tm.deriv_scale(1) * RDOT_TARGET,
            lambda end, tm: end.comp("v_t", 0, +1)
            - np.sqrt(1.0 / end.comp("r", 0, +1)),
        ]
        mayer = lambda end, tm: -end.comp("r", 0, +1)

    def stage(with_rate: bool) -> Transcription:
        ocp = OcpDefinition(
            coordinates=[
                CoordinateSpec("r", 2, (1.0, 0.0)),
                CoordinateSpec("v_t", 1, (1.0,)),
            ],
            controls=["phi"],
            dynamics=_dynamics,
            terminal_rows=terminal,
            ineq_rows=_ineq_rows(with_rate, free_tf),
            mayer=mayer,
            t0=0.0,
            tf=3.0 if free_tf else TF_FIXED,
            free_tf=free_tf,
            affine_ineq=not with_rate,
            affine_objective=True,
            ineq_depends=("u:phi", "tf") if free_tf else ("u:phi",),
        )
        return Transcription(ocp, grid)

    stages = [stage(False), stage(True)]
    tr = stages[0]
    n_nodes = grid.order + 1

    def sample_x0(rng):
        alphas = {
            "r": rng.uniform(1.0, 2.0, n_nodes),
            "v_t": rng.uniform(1.0, 2.0, n_nodes),
        }
        controls = {"phi": np.linspace(0.0, math.pi, n_nodes)}
        return tr.pack(alphas, controls, tf=3.0 if free_tf else None)

    return StagedProblem(
        name="orbit-min-time" if free_tf else "orbit-max-radius",
        stages=stages,
        sample_x0=sample_x0,
        # a tight ftol is needed so the SQP polishes feasibility below the
        # 1e-8 gate before declaring the objective stationary
        default_options=SolverOptions(
            max_iterations=1000, optimality_tolerance=1e-9
        ),
    )


def recover_polar_angle(grid: Grid, r_nodes, vt_nodes, tm: TimeMap) -> np.ndarray:
    """Polar angle theta at the nodes from theta' = v_t / r, theta(0) = 0.

    A fresh first-order operator on the same grid is fit to the nodal
    angular-rate values by least squares and reconstructed with the
    prescribed zero initial angle.
    """
    r_nodes = np.asarray(r_nodes, dtype=float)
    vt_nodes = np.asarray(vt_nodes, dtype=float)
    if np.any(np.abs(r_nodes) < 1e-12):
        raise ValueError("radius vanishes at a node; polar angle is undefined")
    op = build_operator(poly_family_of(grid.family), grid.order, 1, grid)
    rate = 0.5 * tm.delta * vt_nodes / r_nodes  # computational-time derivative
    alpha, *_ = np.linalg.lstsq(op.node_matrices[0], rate, rcond=None)
    return op.reconstruct_level(alpha, [0.0], 1)
