"""Grids, quadrature weights, and basis evaluation."""

import numpy as np
import pytest

from dopic.bases import (
    Grid,
    NodeFamily,
    PolyFamily,
    discrete_orthogonality_check,
    eval_basis,
    make_grid,
    poly_family_of,
)

ALL_NODES = list(NodeFamily)


def test_eval_basis_chebyshev_closed_form():
    row = eval_basis(PolyFamily.CP1K, 3, np.array([0.5]))[0]
    assert np.allclose(row, [1.0, 0.5, -0.5, -1.0], atol=1e-14)


def test_eval_basis_legendre_closed_form():
    row = eval_basis(PolyFamily.LEGENDRE, 2, np.array([0.5]))[0]
    assert np.allclose(row, [1.0, 0.5, -0.125], atol=1e-14)


def test_eval_basis_second_kind_closed_form():
    # U_n(cos t) = sin((n+1)t)/sin(t)
    t = 0.7
    row = eval_basis(PolyFamily.CP2K, 4, np.array([np.cos(t)]))[0]
    expected = [np.sin((n + 1) * t) / np.sin(t) for n in range(5)]
    assert np.allclose(row, expected, atol=1e-13)


def test_eval_basis_domain_error_names_value():
    with pytest.raises(ValueError, match="1.5"):
        eval_basis(PolyFamily.CP1K, 2, np.array([0.0, 1.5]))


def test_eval_basis_endpoint_roundoff_tolerated():
    pts = np.array([-1.0 - 5e-13, 1.0 + 5e-13])
    out = eval_basis(PolyFamily.LEGENDRE, 3, pts)
    assert out.shape == (2, 4)


@pytest.mark.parametrize("family", ALL_NODES)
@pytest.mark.parametrize("n", [8, 20, 40])
def test_weights_sum_to_interval_length(family, n):
    grid = make_grid(family, n)
    assert abs(grid.weights.sum() - 2.0) <= 1e-12


@pytest.mark.parametrize("family", ALL_NODES)
@pytest.mark.parametrize("n", [8, 20, 40])
def test_nodes_ascending_and_inside_domain(family, n):
    grid = make_grid(family, n)
    assert grid.nodes.size == n + 1
    assert np.all(np.diff(grid.nodes) > 0)
    assert grid.nodes[0] >= -1.0 and grid.nodes[-1] <= 1.0


@pytest.mark.parametrize("family", ALL_NODES)
def test_nodes_symmetric(family):
    grid = make_grid(family, 17)
    assert np.allclose(grid.nodes, -grid.nodes[::-1], atol=1e-14)
    assert np.allclose(grid.weights, grid.weights[::-1], atol=1e-13)


def test_boundary_membership():
    assert make_grid(NodeFamily.CGL, 10).has_boundary_nodes
    assert make_grid(NodeFamily.LGL, 10).has_boundary_nodes
    for fam in (NodeFamily.CG, NodeFamily.LG, NodeFamily.CP2K_ZEROS):
        assert not make_grid(fam, 10).has_boundary_nodes


def test_cg_nodes_closed_form():
    n = 9
    grid = make_grid(NodeFamily.CG, n)
    expected = np.sort(np.cos((2 * np.arange(n + 1) + 1) * np.pi / (2 * (n + 1))))
    assert np.allclose(grid.nodes, expected, atol=1e-14)


def test_cgl_nodes_closed_form():
    n = 9
    grid = make_grid(NodeFamily.CGL, n)
    expected = np.sort(np.cos(np.arange(n + 1) * np.pi / n))
    assert np.allclose(grid.nodes, expected, atol=1e-14)


def _quad(grid, f):
    return float(np.dot(grid.weights, f(grid.nodes)))


def _exact_monomial(k):
    return 0.0 if k % 2 else 2.0 / (k + 1)


@pytest.mark.parametrize("n", [8, 20, 40])
def test_lg_quadrature_exact_to_2n_plus_1(n):
    grid = make_grid(NodeFamily.LG, n)
    for k in range(2 * n + 2):
        got = _quad(grid, lambda t: t**k)
        assert abs(got - _exact_monomial(k)) < 1e-11, f"degree {k}"


@pytest.mark.parametrize("n", [8, 20, 40])
def test_lgl_quadrature_exact_to_2n_minus_1(n):
    grid = make_grid(NodeFamily.LGL, n)
    for k in range(2 * n):
        got = _quad(grid, lambda t: t**k)
        assert abs(got - _exact_monomial(k)) < 1e-11, f"degree {k}"


@pytest.mark.parametrize(
    "family", [NodeFamily.CG, NodeFamily.CGL, NodeFamily.CP2K_ZEROS]
)
@pytest.mark.parametrize("n", [8, 20, 40])
def test_chebyshev_family_quadrature_exact_to_n(family, n):
    grid = make_grid(family, n)
    for k in range(n + 1):
        got = _quad(grid, lambda t: t**k)
        assert abs(got - _exact_monomial(k)) < 1e-11, f"degree {k}"


@pytest.mark.parametrize("family", ALL_NODES)
@pytest.mark.parametrize("n", [8, 20, 40])
def test_discrete_orthogonality(family, n):
    grid = make_grid(family, n)
    off_diag = discrete_orthogonality_check(poly_family_of(family), grid)
    assert off_diag < 1e-10


def test_make_grid_rejects_tiny_order():
    with pytest.raises(ValueError):
        make_grid(NodeFamily.CG, 0)


def test_poly_family_mapping():
    assert poly_family_of(NodeFamily.CG) is PolyFamily.CP1K
    assert poly_family_of(NodeFamily.CGL) is PolyFamily.CP1K
    assert poly_family_of(NodeFamily.CP2K_ZEROS) is PolyFamily.CP2K
    assert poly_family_of(NodeFamily.LG) is PolyFamily.LEGENDRE
    assert poly_family_of(NodeFamily.LGL) is PolyFamily.LEGENDRE


def test_grid_is_immutable():
    grid = make_grid(NodeFamily.CG, 5)
    with pytest.raises(Exception):
        grid.order = 7
    assert isinstance(grid, Grid)
