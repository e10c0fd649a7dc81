"""Closed-form reference solutions for the benchmark problems.

These are independent of the collocation path: arcs are derived from the
necessary conditions and validated by forward simulation, so they can sit
on the other side of every accuracy assertion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "min_fuel_minimum_time",
    "MinFuelSolution",
    "analytic_min_fuel",
    "BreakwellSolution",
    "analytic_breakwell",
    "breakwell_regime",
]


def min_fuel_minimum_time(x0: float, xdot0: float) -> float:
    """Shortest time to the origin under |u| <= 1 from (x0, xdot0)."""
    return xdot0 + math.sqrt(4.0 * x0 + 2.0 * xdot0**2)


@dataclass(frozen=True)
class MinFuelSolution:
    """Bang-zero-bang arcs: u = -1 on [0, t1], 0 on [t1, t2], +1 on [t2, tf]."""

    x0: float
    xdot0: float
    tf: float
    t1: float
    t2: float
    cost: float

    def control(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t1, -1.0, np.where(t < self.t2, 0.0, 1.0))

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        v1 = self.xdot0 - self.t1
        return np.where(
            t < self.t1,
            self.xdot0 - t,
            np.where(t < self.t2, v1, v1 + (t - self.t2)),
        )

    def state(self, t):
        t = np.asarray(t, dtype=float)
        v1 = self.xdot0 - self.t1
        x1 = self.x0 + self.xdot0 * self.t1 - 0.5 * self.t1**2
        x2 = x1 + v1 * (self.t2 - self.t1)
        return np.where(
            t < self.t1,
            self.x0 + self.xdot0 * t - 0.5 * t**2,
            np.where(
                t < self.t2,
                x1 + v1 * (t - self.t1),
                x2 + v1 * (t - self.t2) + 0.5 * (t - self.t2) ** 2,
            ),
        )


def analytic_min_fuel(x0: float, xdot0: float, tf: float) -> MinFuelSolution:
    """Three-arc minimum-fuel solution driving (x0, xdot0) to rest at the
    origin by time tf.  Requires xdot0 >= 0, x0 >= -xdot0^2/2, and
    tf >= minimum time (the braking regime with a -1/0/+1 structure)."""
    if xdot0 < 0 or x0 < -0.5 * xdot0**2:
        raise ValueError("initial conditions outside the supported regime")
    tf_min = min_fuel_minimum_time(x0, xdot0)
    if tf < tf_min - 1e-12:
        raise ValueError(f"tf={tf} below the minimum time {tf_min}")

    def final_position(t1):
        v1 = xdot0 - t1
        t2 = tf + v1  # final burn of duration -v1 ends with zero velocity
        x1 = x0 + xdot0 * t1 - 0.5 * t1**2
        x2 = x1 + v1 * (t2 - t1)
        d3 = tf - t2
        return x2 + v1 * d3 + 0.5 * d3**2

    t1 = brentq(final_position, xdot0, 0.5 * (tf + xdot0), xtol=1e-14)
    t2 = tf + (xdot0 - t1)
    cost = 2.0 * t1 - xdot0
    sol = MinFuelSolution(x0=x0, xdot0=xdot0, tf=tf, t1=t1, t2=t2, cost=cost)
    _validate_double_integrator(
        sol.control, x0, xdot0, tf, sol.state, sol.velocity, breaks=(t1, t2)
    )
    return sol


@dataclass(frozen=True)
class BreakwellSolution:
    """Minimum-energy double integrator on [0, 1] with x <= bound,
    x(0)=x(1)=0, x'(0)=1, x'(1)=-1."""

    bound: float
    regime: str  # parabolic | osculating | bifurcated
    cost: float
    _segments: tuple  # ((t_start, t_end, poly_coeffs_highest_first), ...)

    def state(self, t):
        return self._eval(t, 0)

    def velocity(self, t):
        return self._eval(t, 1)

    def control(self, t):
        return self._eval(t, 2)

    def _eval(self, t, deriv):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for lo, hi, coeffs in self._segments:
            poly = np.polyder(np.poly1d(coeffs), deriv)
            mask = (t >= lo) & (t <= hi)
            out[mask] = poly(t[mask])
        # half-open interval bookkeeping: later segments win at shared points
        return out if out.shape else float(out)


def breakwell_regime(bound: float) -> str:
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound >= 0.25:
        return "parabolic"
    if bound >= 1.0 / 6.0:
        return "osculating"
    return "bifurcated"


def analytic_breakwell(bound: float) -> BreakwellSolution:
    regime = breakwell_regime(bound)
    if regime == "parabolic":
        # unconstrained: x = t(1 - t), u = -2
        segments = ((0.0, 1.0, (-1.0, 1.0, 0.0)),)
        cost = 2.0
    elif regime == "osculating":
        # cubic arcs touching x = bound at t = 1/2 with zero velocity
        half = 0.5
        a = np.array([[half**3, half**2], [3 * half**2, 2 * half]])
        c3, c2 = np.linalg.solve(a, [bound - half, -1.0])
        up = np.poly1d((c3, c2, 1.0, 0.0))  # rising half
        down = up(np.poly1d((-1.0, 1.0)))  # mirror image x(1 - t)
        segments = (
            (0.0, half, tuple(up.coeffs)),
            (half, 1.0, tuple(np.poly1d(down).coeffs)),
        )
        acc = np.polyder(up, 2)
        cost = 2.0 * 0.5 * _poly_square_integral(acc, 0.0, half)
    else:
        # boundary arc x = bound on [3l, 1-3l] with cubic entry/exit arcs
        tb = 3.0 * bound
        entry = np.poly1d((1.0 / (27.0 * bound**2), -1.0 / (3.0 * bound), 1.0, 0.0))
        exit_arc = entry(np.poly1d((-1.0, 1.0)))  # time-reversed copy
        segments = (
            (0.0, tb, tuple(entry.coeffs)),
            (tb, 1.0 - tb, (bound,)),
            (1.0 - tb, 1.0, tuple(np.poly1d(exit_arc).coeffs)),
        )
        cost = 4.0 / (9.0 * bound)

    sol = BreakwellSolution(bound=bound, regime=regime, cost=cost, _segments=segments)
    breaks = tuple(hi for _, hi, _ in segments[:-1])
    _validate_double_integrator(
        sol.control, 0.0, 1.0, 1.0, sol.state, sol.velocity, xf=0.0, vf=-1.0,
        breaks=breaks,
    )
    return sol


def _poly_square_integral(poly: np.poly1d, lo: float, hi: float) -> float:
    sq = np.polyint(poly * poly)
    return float(sq(hi) - sq(lo))


def _validate_double_integrator(
    control, x0, v0, tf, state, velocity, xf=0.0, vf=0.0, breaks=()
):
    """Forward-simulate x'' = u arc by arc and check the closed form.

    Integration restarts at each control breakpoint, so the simulation
    keeps full accuracy across discontinuities.
    """
    from scipy.integrate import solve_ivp

    edges = [0.0, *sorted(b for b in breaks if 0.0 < b < tf), tf]
    s = np.array([x0, v0])
    worst = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        out = solve_ivp(
            lambda t, s: [s[1], float(np.atleast_1d(control(min(t, hi - 1e-13)))[0])],
            (lo, hi),
            s,
            rtol=1e-12,
            atol=1e-13,
            dense_output=True,
        )
        ts = np.linspace(lo, hi, 41)[1:]
        xs, vs = out.sol(ts)
        worst = max(
            worst,
            np.max(np.abs(xs - state(ts))),
            np.max(np.abs(vs - velocity(ts))),
        )
        s = out.y[:, -1]
    if worst > 1e-10:
        raise AssertionError(f"oracle failed forward-simulation check (err={worst:.2e})")
    if abs(s[0] - xf) > 1e-9 or abs(s[1] - vf) > 1e-9:
        raise AssertionError(
            f"oracle endpoint mismatch: x(tf)={s[0]:.2e}, v(tf)={s[1]:.2e}"
        )
