"""Solver interface: small KKT problems, gating, and batch statistics."""

import numpy as np
import pytest

from dopic.bases import NodeFamily, make_grid
from dopic.problems import build_min_fuel
from dopic.problems.oracles import analytic_min_fuel, min_fuel_minimum_time
from dopic.solver import BatchStats, SolverOptions, batch_solve, solve, summarize
from dopic.transcription import NlpProblem


def _qp_inequality():
    # min (x - 3)^2 s.t. x <= 2  ->  x* = 2
    return NlpProblem(
        objective=lambda x: (x[0] - 3.0) ** 2,
        eq_constraints=lambda x: np.zeros(0),
        ineq_constraints=lambda x: np.array([x[0] - 2.0]),
        n_chi=1,
        chi_layout={},
    )


def _qp_equality():
    # min x1^2 + x2^2 s.t. x1 + x2 = 1  ->  (1/2, 1/2)
    return NlpProblem(
        objective=lambda x: float(x @ x),
        eq_constraints=lambda x: np.array([x[0] + x[1] - 1.0]),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=2,
        chi_layout={},
    )


# the interior-point mode keeps a small barrier distance from active
# inequalities at the default gtol, hence its looser tolerance
@pytest.mark.parametrize(
    "algorithm,tol", [("sqp_like", 1e-5), ("interior_point_like", 5e-3)]
)
def test_inequality_qp(algorithm, tol):
    report = solve(
        _qp_inequality(), np.array([0.0]), SolverOptions(algorithm=algorithm)
    )
    assert report.converged
    assert abs(report.chi[0] - 2.0) < tol
    assert report.max_ineq_violation <= 1e-8


@pytest.mark.parametrize("algorithm", ["sqp_like", "interior_point_like"])
def test_equality_qp(algorithm):
    report = solve(
        _qp_equality(), np.array([5.0, -3.0]), SolverOptions(algorithm=algorithm)
    )
    assert report.converged
    assert np.allclose(report.chi, [0.5, 0.5], atol=1e-5)
    assert abs(report.objective - 0.5) < 1e-5


def test_variable_bounds_are_enforced():
    problem = NlpProblem(
        objective=lambda x: float((x[0] - 3.0) ** 2),
        eq_constraints=lambda x: np.zeros(0),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=1,
        chi_layout={},
        bounds=[(-1.0, 1.0)],
    )
    report = solve(problem, np.array([0.0]))
    assert report.converged
    assert abs(report.chi[0] - 1.0) < 1e-6


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(algorithm="newton")
    with pytest.raises(ValueError):
        SolverOptions(constraint_tolerance=0.0)
    with pytest.raises(ValueError):
        SolverOptions(finite_difference_step=1e-2)


def test_wrong_start_size_is_rejected():
    with pytest.raises(ValueError):
        solve(_qp_equality(), np.zeros(3))


def test_infeasible_problem_is_not_reported_converged():
    problem = NlpProblem(
        objective=lambda x: float(x[0] ** 2),
        eq_constraints=lambda x: np.array([x[0] - 1.0, x[0] + 1.0]),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=1,
        chi_layout={},
    )
    report = solve(problem, np.array([0.0]))
    assert not report.converged
    assert report.max_eq_violation > 0.5


def test_non_finite_evaluations_fail_softly():
    problem = NlpProblem(
        objective=lambda x: float("nan"),
        eq_constraints=lambda x: np.zeros(0),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=1,
        chi_layout={},
    )
    report = solve(problem, np.array([1.0]))
    assert not report.converged
    assert "non-finite" in report.message


def test_trivial_equality_rows_are_ignored_by_the_backend():
    # first row is identically zero; the solver must still make progress
    problem = NlpProblem(
        objective=lambda x: float(x @ x),
        eq_constraints=lambda x: np.array([0.0, x[0] + x[1] - 1.0]),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=2,
        chi_layout={},
        trivial_eq_indices=(0,),
    )
    report = solve(
        problem, np.array([4.0, 4.0]), SolverOptions(optimality_tolerance=1e-10)
    )
    assert report.converged
    assert np.allclose(report.chi, [0.5, 0.5], atol=1e-5)


def test_fully_affine_problem_takes_the_lp_path():
    # min -x1 - 2 x2 s.t. x1 + x2 = 1, x >= 0  ->  (0, 1)
    problem = NlpProblem(
        objective=lambda x: float(-x[0] - 2.0 * x[1]),
        eq_constraints=lambda x: np.array([x[0] + x[1] - 1.0]),
        ineq_constraints=lambda x: -x,
        n_chi=2,
        chi_layout={},
        affine_eq=True,
        affine_ineq=True,
        affine_objective=True,
    )
    report = solve(problem, np.array([10.0, -3.0]))
    assert report.converged
    assert np.allclose(report.chi, [0.0, 1.0], atol=1e-9)
    assert report.max_eq_violation < 1e-10


def test_affine_lp_detects_infeasibility():
    problem = NlpProblem(
        objective=lambda x: float(x[0]),
        eq_constraints=lambda x: np.array([x[0] - 1.0, x[0] + 1.0]),
        ineq_constraints=lambda x: np.zeros(0),
        n_chi=1,
        chi_layout={},
        affine_eq=True,
        affine_ineq=True,
        affine_objective=True,
    )
    report = solve(problem, np.array([0.0]))
    assert not report.converged


def test_batch_solve_is_seed_deterministic():
    samples = []

    def sampler(rng):
        x0 = rng.uniform(-5.0, 5.0, 2)
        samples.append(x0.copy())
        return x0

    opts = SolverOptions(rng_seed=42)
    r1, s1 = batch_solve(_qp_equality, 4, sampler, opts)
    r2, s2 = batch_solve(_qp_equality, 4, sampler, opts)
    assert np.allclose(samples[0], samples[4])  # same seed, same draws
    assert [r.objective for r in r1] == [r.objective for r in r2]
    assert s1.successes == 4
    assert s1.objective_mean == pytest.approx(0.5, abs=1e-5)


def test_summarize_handles_all_failures():
    from dopic.solver import SolveReport

    reports = [
        SolveReport(False, 3, float("nan"), np.zeros(1), 1.0, 0.0, 0.01)
        for _ in range(3)
    ]
    stats = summarize(reports)
    assert isinstance(stats, BatchStats)
    assert stats.successes == 0
    assert np.isnan(stats.objective_mean)


def test_min_fuel_from_random_start_matches_analytic_cost():
    grid = make_grid(NodeFamily.CG, 50)
    prob = build_min_fuel(grid, formulation="slack")
    exact = analytic_min_fuel(0.0, 10.0, 1.5 * min_fuel_minimum_time(0.0, 10.0)).cost
    x0 = prob.sample_x0(np.random.default_rng(123))
    report = prob.solve_trial(x0)
    assert report.converged
    assert abs(report.objective - exact) / exact < 0.02
