"""Integral collocation operators: weights, shapes, and IVP accuracy."""

import numpy as np
import pytest
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P

from dopic.bases import NodeFamily, PolyFamily, make_grid, poly_family_of
from dopic.opic import (
    build_operator,
    integration_matrix,
    integration_weights,
    solve_linear_ivp,
    solve_nonlinear_ivp,
)

GRID_OF = {
    PolyFamily.CP1K: NodeFamily.CG,
    PolyFamily.CP2K: NodeFamily.CP2K_ZEROS,
    PolyFamily.LEGENDRE: NodeFamily.LG,
}


def _u_power_coeffs(i):
    """Power-series coefficients of the second-kind Chebyshev U_i."""
    prev, cur = np.array([1.0]), np.array([0.0, 2.0])
    if i == 0:
        return prev
    for _ in range(1, i):
        prev, cur = cur, P.polysub(P.polymulx(cur) * 2.0, prev)
    return cur


def _antiderivative_in_basis(family, i, imax):
    """Coefficients of the antiderivative of phi_i in the family basis."""
    if family is PolyFamily.CP1K:
        coeffs = C.chebint(np.eye(imax + 1)[i])
        return np.pad(coeffs, (0, imax + 2 - coeffs.size))
    if family is PolyFamily.LEGENDRE:
        coeffs = L.legint(np.eye(imax + 1)[i])
        return np.pad(coeffs, (0, imax + 2 - coeffs.size))
    # CP2K: integrate the power series, then change basis by solving
    # a triangular system against the U power-series columns.
    anti = P.polyint(_u_power_coeffs(i))
    basis = np.zeros((imax + 2, imax + 2))
    for j in range(imax + 2):
        col = _u_power_coeffs(j)
        basis[: col.size, j] = col
    return np.linalg.solve(basis, np.pad(anti, (0, imax + 2 - anti.size)))


@pytest.mark.parametrize("family", list(PolyFamily))
@pytest.mark.parametrize("i", [0, 1, 2, 3, 7, 12])
def test_integration_weights_match_polynomial_antiderivatives(family, i):
    bp, bm = integration_weights(family, i)
    exact = _antiderivative_in_basis(family, i, max(i, 13))
    assert abs(bp - exact[i + 1]) < 1e-13
    if i == 0:
        assert bm == 0.0
    elif i >= 2:
        assert abs(bm - exact[i - 1]) < 1e-13
    # for i = 1 the phi_0 coefficient is an integration constant; any
    # convention is a valid antiderivative, so only bp is pinned down
    # the antiderivative touches only phi_{i-1} and phi_{i+1} (plus the
    # integration constant in phi_0)
    others = [k for k in range(1, exact.size) if k not in (i - 1, i + 1)]
    assert np.max(np.abs(exact[others])) < 1e-13


@pytest.mark.parametrize("family", list(PolyFamily))
@pytest.mark.parametrize("cols", [3, 8, 15])
def test_integration_matrix_shape_and_bandedness(family, cols):
    b = integration_matrix(family, cols)
    assert b.shape == (cols + 1, cols)
    # only the first sub/super diagonals may be populated
    mask = np.ones_like(b, dtype=bool)
    for i in range(cols):
        mask[i + 1, i] = False
        if i >= 1:
            mask[i - 1, i] = False
    assert np.all(b[mask] == 0.0)


@pytest.mark.parametrize("family", list(PolyFamily))
@pytest.mark.parametrize("q", [1, 2, 3])
def test_operator_shapes(family, q):
    n = 12
    grid = make_grid(GRID_OF[family], n)
    op = build_operator(family, n, q, grid)
    assert op.phi_nodes.shape == (n + 1, n + q + 1)
    for m in range(1, q + 1):
        assert op.products[m - 1].shape == (n + m + 1, n + 1)
        assert op.node_matrix(m).shape == (n + 1, n + 1)
    assert op.p_nodes.shape == (n + 1, q)


@pytest.mark.parametrize("family", list(PolyFamily))
def test_point_matrix_agrees_with_node_matrix(family):
    grid = make_grid(GRID_OF[family], 10)
    op = build_operator(family, 10, 2, grid)
    for m in range(3):
        assert np.allclose(
            op.point_matrix(m, grid.nodes), op.node_matrix(m), atol=1e-12
        )


@pytest.mark.parametrize("family", list(PolyFamily))
def test_zero_alpha_reproduces_taylor_polynomial(family):
    # with alpha = 0 the reconstruction is just the initial-condition
    # polynomial: y(tau) = b + a (tau + 1) for q = 2, y'(-1) = a, y(-1) = b
    grid = make_grid(GRID_OF[family], 8)
    op = build_operator(family, 8, 2, grid)
    a, b = 0.7, -1.3
    alpha = np.zeros(9)
    y = op.reconstruct_level(alpha, [a, b], 2)
    yp = op.reconstruct_level(alpha, [a, b], 1)
    assert np.allclose(y, b + a * (grid.nodes + 1.0), atol=1e-13)
    assert np.allclose(yp, a, atol=1e-13)


@pytest.mark.parametrize("family", list(PolyFamily))
def test_dense_reconstruction_honors_initial_conditions(family):
    grid = make_grid(GRID_OF[family], 9)
    op = build_operator(family, 9, 2, grid)
    rng = np.random.default_rng(3)
    alpha = rng.normal(size=10)
    init = [0.25, -2.0]
    start = np.array([-1.0])
    assert abs(op.reconstruct_dense(alpha, init, 2, start)[0] - init[1]) < 1e-12
    assert abs(op.reconstruct_dense(alpha, init, 1, start)[0] - init[0]) < 1e-12


def test_build_operator_validates_inputs():
    grid = make_grid(NodeFamily.CG, 10)
    with pytest.raises(ValueError):
        build_operator(PolyFamily.LEGENDRE, 10, 1, grid)  # family mismatch
    with pytest.raises(ValueError):
        build_operator(PolyFamily.CP1K, 10, 11, grid)  # q > n
    with pytest.raises(ValueError):
        build_operator(PolyFamily.CP1K, 9, 1, grid)  # order mismatch


def test_reconstruct_level_rejects_bad_level():
    grid = make_grid(NodeFamily.CG, 6)
    op = build_operator(PolyFamily.CP1K, 6, 2, grid)
    with pytest.raises(ValueError):
        op.reconstruct_level(np.zeros(7), [0.0, 0.0], 3)


@pytest.mark.parametrize("node_family", list(NodeFamily))
def test_harmonic_oscillator_spectral_accuracy(node_family):
    # y'' = -y, y(-1) = 0, y'(-1) = 1  ->  y = sin(tau + 1)
    n = 25
    grid = make_grid(node_family, n)
    op = build_operator(poly_family_of(node_family), n, 2, grid)
    sol = solve_linear_ivp(op, [lambda t: -1.0, None], None, [1.0, 0.0])
    err = np.max(np.abs(sol.levels[0] - np.sin(grid.nodes + 1.0)))
    assert err < 1e-10
    dense = sol.dense(0, np.linspace(-1.0, 1.0, 137))
    dense_err = np.max(np.abs(dense - np.sin(np.linspace(-1.0, 1.0, 137) + 1.0)))
    assert dense_err < 1e-10


@pytest.mark.parametrize("node_family", list(NodeFamily))
def test_exponential_decay_error_shrinks_with_order(node_family):
    # y' = -y, y(-1) = 1  ->  y = exp(-(tau + 1))
    errs = []
    for n in (5, 10, 15, 20):
        grid = make_grid(node_family, n)
        op = build_operator(poly_family_of(node_family), n, 1, grid)
        sol = solve_linear_ivp(op, [lambda t: -1.0], None, [1.0])
        errs.append(np.max(np.abs(sol.levels[0] - np.exp(-(grid.nodes + 1.0)))))
    for prev, cur in zip(errs, errs[1:]):
        # decreasing until the roundoff floor is reached
        assert cur <= prev or cur < 1e-13
    assert errs[-1] < 1e-12


def test_forced_second_order_ivp():
    # y'' + y = tau with y(-1) = 0, y'(-1) = 0
    # particular y_p = tau; y = tau + sin/cos combination matching the ICs
    n = 30
    grid = make_grid(NodeFamily.LGL, n)
    op = build_operator(PolyFamily.LEGENDRE, n, 2, grid)
    sol = solve_linear_ivp(op, [lambda t: -1.0, None], lambda t: t, [0.0, 0.0])
    # y = t + A cos(t+1) + B sin(t+1); y(-1) = 0 gives A = 1 and
    # y'(-1) = 0 gives B = -1
    t = grid.nodes
    exact = t + np.cos(t + 1.0) - np.sin(t + 1.0)
    assert np.max(np.abs(sol.levels[0] - exact)) < 1e-10


def test_nonlinear_ivp_riccati():
    # y' = -y^2, y(-1) = 1  ->  y = 1 / (tau + 2)
    n = 20
    grid = make_grid(NodeFamily.CG, n)
    op = build_operator(PolyFamily.CP1K, n, 1, grid)
    sol = solve_nonlinear_ivp(op, lambda tau, lows: -lows[0] ** 2, [1.0])
    assert np.max(np.abs(sol.levels[0] - 1.0 / (grid.nodes + 2.0))) < 1e-9


def test_nonlinear_ivp_reports_stall():
    grid = make_grid(NodeFamily.CG, 5)
    op = build_operator(PolyFamily.CP1K, 5, 1, grid)
    with pytest.raises(RuntimeError):
        solve_nonlinear_ivp(
            op, lambda tau, lows: lows[0] ** 2, [5.0], max_iter=3
        )
