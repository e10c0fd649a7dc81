"""Integral collocation operators.

The highest derivative of a coordinate is represented by one coefficient
set alpha on an orthogonal basis; every lower derivative level is an exact
antiderivative obtained through sparse integration-weight matrices.  One
operator precomputes everything needed for a (family, n, q) triple on a
grid, after which reconstructing any level is a matrix-vector product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dopic.bases import Grid, PolyFamily, eval_basis, poly_family_of

__all__ = [
    "integration_weights",
    "integration_matrix",
    "OpicOperator",
    "build_operator",
    "TrajectoryLevels",
    "solve_linear_ivp",
    "solve_nonlinear_ivp",
]


def integration_weights(family: PolyFamily, i: int) -> tuple[float, float]:
    """(b_i_plus, b_i_minus): weights of phi_{i+1} and phi_{i-1} in the
    antiderivative of phi_i.  b_0_minus is reported as 0 (no phi_{-1} term).
    """
    if family is PolyFamily.CP1K:
        if i == 0:
            return 1.0, 0.0
        if i == 1:
            return 0.25, 0.25
        return 1.0 / (2 * (i + 1)), -1.0 / (2 * (i - 1))
    if family is PolyFamily.CP2K:
        if i == 0:
            return 0.5, 0.0
        if i == 1:
            return 0.25, 0.25
        return 1.0 / (2 * (i + 1)), -1.0 / (2 * (i + 1))
    if family is PolyFamily.LEGENDRE:
        if i == 0:
            return 1.0, 0.0
        if i == 1:
            return 1.0 / 3.0, -1.0 / 6.0
        return 1.0 / (2 * i + 1), -1.0 / (2 * i + 1)
    raise ValueError(family)


def integration_matrix(family: PolyFamily, cols: int) -> np.ndarray:
    """(cols+1) x cols matrix mapping series coefficients of a degree-
    (cols-1) expansion to those of its antiderivative (constant term aside).

    Column i carries b_i_plus on the sub-diagonal and b_i_minus on the
    super-diagonal.
    """
    b = np.zeros((cols + 1, cols))
    for i in range(cols):
        bp, bm = integration_weights(family, i)
        b[i + 1, i] = bp
        if i >= 1:
            b[i - 1, i] = bm
    return b


def _p_terms(points: np.ndarray, kmax: int) -> np.ndarray:
    """Columns p_k(points) = (tau+1)^k / k! for k = 0..kmax."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    cols = [np.power(pts + 1.0, k) / math.factorial(k) for k in range(kmax + 1)]
    return np.stack(cols, axis=1)


@dataclass
class OpicOperator:
    """Precomputed reconstruction machinery for one (family, n, q, grid)."""

    family: PolyFamily
    n: int
    q: int
    grid: Grid
    phi_nodes: np.ndarray = field(repr=False)  # (n+1, n+q+1)
    products: list = field(repr=False)  # m -> (n+m+1, n+1), m = 1..q
    v: list = field(repr=False)  # j -> (n+1,), j = 1..q
    node_matrices: list = field(repr=False)  # m -> (n+1, n+1), m = 0..q
    p_nodes: np.ndarray = field(repr=False)  # (n+1, q)

    def node_matrix(self, m: int) -> np.ndarray:
        """Matrix M_m with y^(q-m)(nodes) = M_m @ alpha + p-terms @ init."""
        return self.node_matrices[m]

    def point_matrix(self, m: int, points) -> np.ndarray:
        """Same as node_matrix but at arbitrary points in [-1, 1]."""
        if m == 0:
            return eval_basis(self.family, self.n, points)
        phi = eval_basis(self.family, self.n + m, points)
        p = _p_terms(points, m - 1)
        mat = phi @ self.products[m - 1]
        for j in range(1, m + 1):
            mat -= np.outer(p[:, m - j], self.v[j - 1])
        return mat

    def reconstruct_level(self, alpha, init_conds, m: int) -> np.ndarray:
        """y^(q-m) at the grid nodes.

        ``init_conds[j-1]`` is y^(q-j)(-1) for j = 1..q (computational-
        domain derivatives); only the first m entries are used.
        """
        if not 0 <= m <= self.q:
            raise ValueError(f"level index m={m} outside 0..{self.q}")
        alpha = np.asarray(alpha, dtype=float)
        out = self.node_matrices[m] @ alpha
        for j in range(1, m + 1):
            out = out + self.p_nodes[:, m - j] * init_conds[j - 1]
        return out

    def reconstruct_dense(self, alpha, init_conds, m: int, points) -> np.ndarray:
        """y^(q-m) at arbitrary points (global polynomial solution)."""
        if not 0 <= m <= self.q:
            raise ValueError(f"level index m={m} outside 0..{self.q}")
        alpha = np.asarray(alpha, dtype=float)
        out = self.point_matrix(m, points) @ alpha
        if m > 0:
            p = _p_terms(points, m - 1)
            for j in range(1, m + 1):
                out = out + p[:, m - j] * init_conds[j - 1]
        return out


def build_operator(family: PolyFamily, n: int, q: int, grid: Grid) -> OpicOperator:
    """Precompute basis, integration-matrix products, and lower-bound rows."""
    if not n >= q >= 1:
        raise ValueError(f"need n >= q >= 1, got n={n}, q={q}")
    if grid.order != n:
        raise ValueError(f"grid order {grid.order} does not match n={n}")
    if poly_family_of(grid.family) is not family:
        raise ValueError(f"grid {grid.family} does not pair with {family}")

    phi_nodes = eval_basis(family, n + q, grid.nodes)
    phi_minus1 = eval_basis(family, n + q, np.array([-1.0]))[0]

    products: list[np.ndarray] = []
    v: list[np.ndarray] = []
    prod = np.eye(n + 1)
    for j in range(1, q + 1):
        bj = integration_matrix(family, n + j)  # (n+j+1) x (n+j)
        prod = bj @ prod
        products.append(prod)
        v.append(phi_minus1[: n + j + 1] @ prod)

    p_nodes = _p_terms(grid.nodes, max(q - 1, 0))
    node_matrices = [phi_nodes[:, : n + 1]]
    for m in range(1, q + 1):
        mat = phi_nodes[:, : n + m + 1] @ products[m - 1]
        for j in range(1, m + 1):
            mat = mat - np.outer(p_nodes[:, m - j], v[j - 1])
        node_matrices.append(mat)

    return OpicOperator(
        family=family,
        n=n,
        q=q,
        grid=grid,
        phi_nodes=phi_nodes,
        products=products,
        v=v,
        node_matrices=node_matrices,
        p_nodes=p_nodes,
    )


@dataclass
class TrajectoryLevels:
    """All derivative levels of one coordinate at the grid nodes.

    ``levels[m]`` holds y^(m) for m = 0..q (state first, highest derivative
    last); everything derives from the single coefficient vector ``alpha``.
    """

    alpha: np.ndarray
    init_conds: list
    levels: list
    operator: OpicOperator

    def dense(self, m_derivative: int, points) -> np.ndarray:
        """y^(m_derivative) evaluated at arbitrary points."""
        m = self.operator.q - m_derivative
        return self.operator.reconstruct_dense(self.alpha, self.init_conds, m, points)


def _levels_from_alpha(op: OpicOperator, alpha, init_conds) -> TrajectoryLevels:
    levels = [
        op.reconstruct_level(alpha, init_conds, m) for m in range(op.q, -1, -1)
    ]
    return TrajectoryLevels(
        alpha=np.asarray(alpha, dtype=float),
        init_conds=list(init_conds),
        levels=levels,
        operator=op,
    )


def solve_linear_ivp(op: OpicOperator, a_coeffs, forcing, init_conds) -> TrajectoryLevels:
    """Solve y^(q) = sum_m a_m(tau) y^(m) + g(tau) on [-1, 1].

    ``a_coeffs`` is a sequence of q callables (or None) giving the
    coefficient of y^(m) for m = 0..q-1; ``forcing`` maps tau to g(tau)
    (or None for 0); ``init_conds[j-1]`` is y^(q-j)(-1) for j = 1..q.
    Collocating the reconstruction formulas yields one dense linear system
    in alpha.
    """
    tau = op.grid.nodes
    npts = tau.size
    lhs = op.node_matrices[0].copy()
    rhs = np.zeros(npts) if forcing is None else np.asarray(forcing(tau), dtype=float) * np.ones(npts)
    for m_deriv in range(op.q):
        fn = a_coeffs[m_deriv] if a_coeffs is not None else None
        if fn is None:
            continue
        a = np.asarray(fn(tau), dtype=float) * np.ones(npts)
        m = op.q - m_deriv
        lhs -= a[:, None] * op.node_matrices[m]
        contrib = np.zeros(npts)
        for j in range(1, m + 1):
            contrib += op.p_nodes[:, m - j] * init_conds[j - 1]
        rhs += a * contrib
    try:
        alpha = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(lhs)
        raise RuntimeError(f"singular collocation matrix (cond ~ {cond:.3e})") from exc
    return _levels_from_alpha(op, alpha, init_conds)


def solve_nonlinear_ivp(
    op: OpicOperator,
    rhs_fn,
    init_conds,
    alpha0=None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> TrajectoryLevels:
    """Newton iteration on alpha for y^(q) = f(tau, y, y', ..., y^(q-1)).

    ``rhs_fn(tau, levels)`` receives the node values of levels 0..q-1
    (state first) and returns y^(q) at the nodes.  Finite-difference
    Jacobian; intended as a testing oracle, not a production path.
    """
    alpha = np.zeros(op.n + 1) if alpha0 is None else np.array(alpha0, dtype=float)

    def residual(a):
        lows = [
            op.reconstruct_level(a, init_conds, m) for m in range(op.q, 0, -1)
        ]
        return op.node_matrices[0] @ a - rhs_fn(op.grid.nodes, lows)

    for _ in range(max_iter):
        r = residual(alpha)
        if np.max(np.abs(r)) < tol:
            break
        jac = np.empty((r.size, alpha.size))
        for i in range(alpha.size):
            step = 1e-7 * max(1.0, abs(alpha[i]))
            pert = alpha.copy()
            pert[i] += step
            jac[:, i] = (residual(pert) - r) / step
        alpha -= np.linalg.solve(jac, r)
    else:
        raise RuntimeError(
            f"Newton IVP iteration did not reach {tol:.1e} in {max_iter} steps"
        )
    return _levels_from_alpha(op, alpha, init_conds)
