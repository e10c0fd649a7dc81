"""Benchmark optimal-control problems and their analytic oracles."""

from __future__ import annotations

from dopic.bases import Grid
from dopic.problems.base import StagedProblem
from dopic.problems.breakwell import build_breakwell
from dopic.problems.min_fuel import build_min_fuel
from dopic.problems.oracles import (
    analytic_breakwell,
    analytic_min_fuel,
    breakwell_regime,
    min_fuel_minimum_time,
)
from dopic.problems.orbit import build_orbit_raising, recover_polar_angle
from dopic.problems.rocket import build_rocket_landing, rocket_constants

__all__ = [
    "PROBLEM_NAMES",
    "StagedProblem",
    "build_problem",
    "build_min_fuel",
    "build_breakwell",
    "build_orbit_raising",
    "build_rocket_landing",
    "analytic_min_fuel",
    "analytic_breakwell",
    "breakwell_regime",
    "min_fuel_minimum_time",
    "recover_polar_angle",
    "rocket_constants",
]

_BUILDERS = {
    "min-fuel": lambda grid, **kw: build_min_fuel(grid, **kw),
    "breakwell": lambda grid, **kw: build_breakwell(grid, **kw),
    "orbit-min-time": lambda grid, **kw: build_orbit_raising(grid, "min_time", **kw),
    "orbit-max-radius": lambda grid, **kw: build_orbit_raising(grid, "max_radius", **kw),
    "rocket-landing": lambda grid, **kw: build_rocket_landing(grid, **kw),
}

PROBLEM_NAMES = tuple(sorted(_BUILDERS))


def build_problem(name: str, grid: Grid, **kwargs) -> StagedProblem:
    """Build a benchmark problem by its registry name."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}"
        ) from None
    return builder(grid, **kwargs)
