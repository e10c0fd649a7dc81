"""NLP solving behind a stable interface.

The transcribed problems need a locally convergent KKT solver with
finite-difference Jacobians; scipy's SLSQP (SQP-like) and trust-constr
(interior-point-like) back the two algorithm modes.  Reports gate the
converged flag on actual constraint violations, never on the backend's
word alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, NonlinearConstraint, linprog, minimize

from dopic.transcription import NlpProblem

__all__ = ["SolverOptions", "SolveReport", "BatchStats", "solve", "batch_solve"]


@dataclass(frozen=True)
class SolverOptions:
    algorithm: str = "sqp_like"  # or "interior_point_like"
    max_iterations: int = 400
    constraint_tolerance: float = 1e-8
    optimality_tolerance: float = 1e-6
    finite_difference_step: float = 1e-7
    rng_seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("sqp_like", "interior_point_like"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.constraint_tolerance <= 0 or self.optimality_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if not 1e-9 <= self.finite_difference_step <= 1e-4:
            raise ValueError("finite_difference_step must be in [1e-9, 1e-4]")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    objective: float
    chi: np.ndarray
    max_eq_violation: float
    max_ineq_violation: float
    wall_time: float
    message: str = ""


@dataclass
class BatchStats:
    trials: int
    successes: int
    iteration_mean: float
    objective_mean: float
    objective_std: float
    runtime_quartiles: tuple  # (q1, median, q3) over all trials


def _violations(problem: NlpProblem, chi) -> tuple[float, float]:
    eq = problem.eq_constraints(chi)
    ineq = problem.ineq_constraints(chi)
    max_eq = float(np.max(np.abs(eq))) if eq.size else 0.0
    max_ineq = float(np.max(ineq)) if ineq.size else 0.0
    return max_eq, max(max_ineq, 0.0)


def _nontrivial_eq(problem: NlpProblem):
    """Equality evaluator with identically-zero rows dropped.

    Rows that are zero by construction (bound initial conditions) carry
    zero gradients and can break the SQP least-squares subproblem.
    """
    trivial = sorted(set(problem.trivial_eq_indices))
    if not trivial:
        return problem.eq_constraints

    def eq(chi):
        full = problem.eq_constraints(chi)
        mask = np.ones(full.size, dtype=bool)
        mask[trivial] = False
        return full[mask]

    return eq


def solve(problem: NlpProblem, x0, options: SolverOptions | None = None) -> SolveReport:
    """Local KKT solution of the packed NLP from the given start point."""
    options = options or SolverOptions()
    x0 = np.asarray(x0, dtype=float)
    if x0.size != problem.n_chi:
        raise ValueError(f"expected |x0| = {problem.n_chi}, got {x0.size}")

    eq_fn = _nontrivial_eq(problem)
    t_start = time.perf_counter()
    try:
        if problem.affine_eq and problem.affine_ineq and problem.affine_objective:
            res = _solve_linear(problem, x0, options, eq_fn)
        elif options.algorithm == "sqp_like":
            res = _solve_slsqp(problem, x0, options, eq_fn)
        else:
            res = _solve_trust_constr(problem, x0, options, eq_fn)
        chi = np.asarray(res.x, dtype=float)
        iterations = int(getattr(res, "nit", 0) or 0)
        message = str(res.message)
        backend_ok = bool(res.success)
    except FloatingPointError as exc:
        wall = time.perf_counter() - t_start
        return SolveReport(
            converged=False,
            iterations=0,
            objective=float("nan"),
            chi=x0,
            max_eq_violation=float("inf"),
            max_ineq_violation=float("inf"),
            wall_time=wall,
            message=f"non-finite evaluation: {exc}",
        )
    wall = time.perf_counter() - t_start

    max_eq, max_ineq = _violations(problem, chi)
    feasible = (
        max_eq <= options.constraint_tolerance
        and max_ineq <= options.constraint_tolerance
    )
    return SolveReport(
        converged=feasible and backend_ok,
        iterations=iterations,
        objective=float(problem.objective(chi)),
        chi=chi,
        max_eq_violation=max_eq,
        max_ineq_violation=max_ineq,
        wall_time=wall,
        message=message,
    )


def _fd_jacobian(fn, x, step=1.0):
    """Forward-difference Jacobian of fn at x.

    Used once, at the start point, for evaluators declared affine: the
    forward difference of an affine map is its exact (constant) Jacobian
    for any step, so a unit step is used to keep floating-point rounding
    (~eps.|f|/step) negligible.
    """
    f0 = np.atleast_1d(fn(x))
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        xi = x.copy()
        xi[i] += step
        jac[:, i] = (np.atleast_1d(fn(xi)) - f0) / step
    return jac


def _fd_jac_callable(fn, step):
    """Pointwise forward-difference Jacobian with per-column scaled steps.

    trust-constr's internal '2-point' differencing can stall its quasi-
    Newton updates even on tiny quadratic programs, so constraint Jacobians
    are always handed over as explicit callables.
    """

    def jac(x):
        x = np.asarray(x, dtype=float)
        f0 = np.atleast_1d(fn(x))
        out = np.empty((f0.size, x.size))
        for i in range(x.size):
            h = step * max(1.0, abs(x[i]))
            xp = x.copy()
            xp[i] += h
            out[:, i] = (np.atleast_1d(fn(xp)) - f0) / h
        return out

    return jac


def _guard(fn):
    """Turn non-finite evaluations into a diagnosable error."""

    def wrapped(chi):
        out = fn(chi)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("constraint/objective returned non-finite values")
        return out

    return wrapped


def _masked_eq_jac(problem, step):
    """problem.eq_jac with the identically-zero rows dropped, or None."""
    if problem.eq_jac is None:
        return None
    trivial = sorted(set(problem.trivial_eq_indices))
    if not trivial:
        return lambda chi: problem.eq_jac(chi, step)

    def jac(chi):
        full = problem.eq_jac(chi, step)
        mask = np.ones(full.shape[0], dtype=bool)
        mask[trivial] = False
        return full[mask]

    return jac


def _solve_slsqp(problem, x0, options, eq_fn):
    step = options.finite_difference_step
    constraints = []
    if np.atleast_1d(eq_fn(x0)).size:
        eq_con = {"type": "eq", "fun": _guard(eq_fn)}
        if problem.affine_eq:
            eq_jac = _fd_jacobian(eq_fn, x0)
            eq_con["jac"] = lambda chi: eq_jac
        else:
            eq_jac_fn = _masked_eq_jac(problem, step)
            if eq_jac_fn is not None:
                eq_con["jac"] = eq_jac_fn
        constraints.append(eq_con)
    probe_ineq = problem.ineq_constraints(x0)
    if probe_ineq.size:
        ineq = _guard(problem.ineq_constraints)
        ineq_con = {"type": "ineq", "fun": lambda chi: -ineq(chi)}
        if problem.affine_ineq:
            ineq_jac = -_fd_jacobian(problem.ineq_constraints, x0)
            ineq_con["jac"] = lambda chi: ineq_jac
        elif problem.ineq_jac is not None:
            ineq_con["jac"] = lambda chi: -problem.ineq_jac(chi, step)
        constraints.append(ineq_con)
    obj_jac = None
    if problem.affine_objective:
        grad = _fd_jacobian(problem.objective, x0)[0]
        obj_jac = lambda chi: grad
    elif problem.objective_grad is not None:
        obj_jac = lambda chi: problem.objective_grad(chi, step)
    return minimize(
        _guard(problem.objective),
        x0,
        method="SLSQP",
        jac=obj_jac,
        bounds=problem.bounds,
        constraints=constraints,
        options={
            "maxiter": options.max_iterations,
            "ftol": options.optimality_tolerance,
            "eps": step,
        },
    )


def _solve_linear(problem, x0, options, eq_fn):
    """Fast path for problems that are affine throughout.

    The one-shot finite-difference Jacobians at x0 are the exact constraint
    matrices, so the NLP collapses to a linear program and an LP solver
    finds its global solution directly (the start point only anchors the
    Jacobian probe).
    """
    c = _fd_jacobian(problem.objective, x0)[0]
    a_eq = b_eq = None
    e0 = np.atleast_1d(eq_fn(x0))
    if e0.size:
        a_eq = _fd_jacobian(eq_fn, x0)
        b_eq = a_eq @ x0 - e0
    a_ub = b_ub = None
    g0 = problem.ineq_constraints(x0)
    if g0.size:
        a_ub = _fd_jacobian(problem.ineq_constraints, x0)
        b_ub = a_ub @ x0 - g0
    bounds = [(-np.inf, np.inf)] * problem.n_chi
    if problem.bounds is not None:
        bounds = [
            (lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
            for lo, hi in problem.bounds
        ]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.x is None:
        res.x = x0
    return res


def _solve_trust_constr(problem, x0, options, eq_fn):
    step = options.finite_difference_step
    constraints = []
    if np.atleast_1d(eq_fn(x0)).size:
        if problem.affine_eq:
            jac_eq = _fd_jacobian(eq_fn, x0)
            eq_jac = lambda chi: jac_eq
        else:
            eq_jac = _masked_eq_jac(problem, step) or _fd_jac_callable(eq_fn, step)
        constraints.append(NonlinearConstraint(_guard(eq_fn), 0.0, 0.0, jac=eq_jac))
    probe_ineq = problem.ineq_constraints(x0)
    if probe_ineq.size:
        if problem.affine_ineq:
            jac_in = _fd_jacobian(problem.ineq_constraints, x0)
            ineq_jac = lambda chi: jac_in
        elif problem.ineq_jac is not None:
            ineq_jac = lambda chi: problem.ineq_jac(chi, step)
        else:
            ineq_jac = _fd_jac_callable(problem.ineq_constraints, step)
        constraints.append(
            NonlinearConstraint(
                _guard(problem.ineq_constraints), -np.inf, 0.0, jac=ineq_jac
            )
        )
    bounds = None
    if problem.bounds is not None:
        lo = [b[0] if b[0] is not None else -np.inf for b in problem.bounds]
        hi = [b[1] if b[1] is not None else np.inf for b in problem.bounds]
        bounds = Bounds(lo, hi)
    obj_jac = None
    if problem.affine_objective:
        grad = _fd_jacobian(problem.objective, x0)[0]
        obj_jac = lambda chi: grad
    elif problem.objective_grad is not None:
        obj_jac = lambda chi: problem.objective_grad(chi, step)
    return minimize(
        _guard(problem.objective),
        x0,
        method="trust-constr",
        jac=obj_jac,
        bounds=bounds,
        constraints=constraints,
        options={
            "maxiter": options.max_iterations,
            "gtol": options.optimality_tolerance,
            "xtol": 1e-12,
            "finite_diff_rel_step": options.finite_difference_step,
        },
    )


def batch_solve(
    problem_factory,
    trials: int,
    init_sampler,
    options: SolverOptions | None = None,
) -> tuple[list, BatchStats]:
    """Run seeded trials and aggregate statistics.

    ``problem_factory()`` builds (or returns) the NlpProblem (or a callable
    solving one trial end to end when given (x0, options) -- see
    problems.StagedProblem.solve_trial); ``init_sampler(rng)`` draws one
    starting point.  Trial t uses seed ``options.rng_seed + t`` so results
    are order-independent.
    """
    options = options or SolverOptions()
    reports: list[SolveReport] = []
    for trial in range(trials):
        rng = np.random.default_rng(options.rng_seed + trial)
        x0 = init_sampler(rng)
        target = problem_factory()
        if isinstance(target, NlpProblem):
            reports.append(solve(target, x0, options))
        else:
            reports.append(target(x0, options))
    return reports, summarize(reports)


def summarize(reports: list) -> BatchStats:
    ok = [r for r in reports if r.converged]
    objectives = np.array([r.objective for r in ok]) if ok else np.zeros(0)
    runtimes = np.array([r.wall_time for r in reports])
    return BatchStats(
        trials=len(reports),
        successes=len(ok),
        iteration_mean=float(np.mean([r.iterations for r in ok])) if ok else 0.0,
        objective_mean=float(objectives.mean()) if ok else float("nan"),
        objective_std=float(objectives.std()) if ok else float("nan"),
        runtime_quartiles=tuple(np.percentile(runtimes, [25, 50, 75]))
        if len(reports)
        else (0.0, 0.0, 0.0),
    )
