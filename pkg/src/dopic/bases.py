"""Orthogonal polynomial bases, node grids, and quadrature weights.

Three families are supported: Chebyshev polynomials of the first kind
(CP1K), Chebyshev polynomials of the second kind (CP2K), and Legendre
polynomials.  Each family comes with its usual interpolation grids
(Chebyshev-Gauss, Chebyshev-Gauss-Lobatto, CP2K zeros, Legendre-Gauss,
Legendre-Gauss-Lobatto) and the matching quadrature weights.

Nodes are always stored in ascending order; the cosine formulas generate
them descending, so they are flipped once here and every downstream matrix
uses ascending order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "PolyFamily",
    "NodeFamily",
    "Grid",
    "eval_basis",
    "make_grid",
    "quadrature_weights",
    "discrete_orthogonality_check",
    "poly_family_of",
]

_DOMAIN_EPS = 1e-12


class PolyFamily(Enum):
    CP1K = "cp1k"
    CP2K = "cp2k"
    LEGENDRE = "legendre"


class NodeFamily(Enum):
    CG = "cg"
    CGL = "cgl"
    CP2K_ZEROS = "cp2k"
    LG = "lg"
    LGL = "lgl"


_POLY_OF_NODES = {
    NodeFamily.CG: PolyFamily.CP1K,
    NodeFamily.CGL: PolyFamily.CP1K,
    NodeFamily.CP2K_ZEROS: PolyFamily.CP2K,
    NodeFamily.LG: PolyFamily.LEGENDRE,
    NodeFamily.LGL: PolyFamily.LEGENDRE,
}

# Grids whose first/last nodes sit exactly on the domain boundary.
_BOUNDARY_GRIDS = (NodeFamily.CGL, NodeFamily.LGL)


def poly_family_of(nodes: NodeFamily) -> PolyFamily:
    """Polynomial family a node family belongs to."""
    return _POLY_OF_NODES[nodes]


@dataclass(frozen=True)
class Grid:
    """Interpolation nodes on [-1, 1] with their quadrature weights.

    A grid of order ``n`` has ``n + 1`` points, ascending.
    """

    nodes: np.ndarray
    weights: np.ndarray
    family: NodeFamily
    order: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self.nodes.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def poly_family(self) -> PolyFamily:
        return poly_family_of(self.family)

    @property
    def has_boundary_nodes(self) -> bool:
        return self.family in _BOUNDARY_GRIDS


def eval_basis(family: PolyFamily, degree_max: int, points) -> np.ndarray:
    """Evaluate phi_0..phi_degree_max at the given points.

    Returns a matrix of shape ``(len(points), degree_max + 1)`` built from
    the three-term recurrence of the family (no trigonometric shortcuts, so
    all families are treated uniformly).
    """
    if degree_max < 0:
        raise ValueError(f"degree_max must be >= 0, got {degree_max}")
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    bad = np.abs(pts) > 1.0 + _DOMAIN_EPS
    if bad.any():
        raise ValueError(f"point outside [-1, 1]: {pts[bad][0]!r}")

    out = np.empty((pts.size, degree_max + 1))
    out[:, 0] = 1.0
    if degree_max == 0:
        return out
    if family is PolyFamily.CP2K:
        out[:, 1] = 2.0 * pts
    else:
        out[:, 1] = pts
    if family is PolyFamily.LEGENDRE:
        for i in range(1, degree_max):
            out[:, i + 1] = (
                (2 * i + 1) / (i + 1) * pts * out[:, i] - i / (i + 1) * out[:, i - 1]
            )
    else:
        for i in range(1, degree_max):
            out[:, i + 1] = 2.0 * pts * out[:, i] - out[:, i - 1]
    return out


def _legendre_deriv(n: int, tau: np.ndarray, pn: np.ndarray, pnm1: np.ndarray):
    """P_n'(tau) via (1 - tau^2) P_n' = n (P_{n-1} - tau P_n)."""
    return n * (pnm1 - tau * pn) / (1.0 - tau * tau)


def _legendre_newton(n: int, guesses: np.ndarray, target: str) -> np.ndarray:
    """Polish roots of P_n (target='poly') or P_n' (target='deriv') by Newton."""
    tau = np.array(guesses, dtype=float)
    for _ in range(100):
        phi = eval_basis(PolyFamily.LEGENDRE, n, tau)
        pn, pnm1 = phi[:, n], phi[:, n - 1]
        dpn = _legendre_deriv(n, tau, pn, pnm1)
        if target == "poly":
            f, df = pn, dpn
        else:
            # P_n'' from the Legendre ODE: (1 - x^2) P_n'' = 2 x P_n' - n(n+1) P_n
            f = dpn
            df = (2.0 * tau * dpn - n * (n + 1) * pn) / (1.0 - tau * tau)
        step = f / df
        tau -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    # judge convergence by the Newton correction (the root error); the raw
    # polynomial value grows with n and is not a reliable absolute measure
    worst = int(np.argmax(np.abs(step)))
    if abs(step[worst]) > 1e-14:
        raise RuntimeError(
            f"Newton failed to converge for Legendre {target} root {worst} "
            f"(last correction {step[worst]:.3e})"
        )
    return tau


def _raw_nodes(family: NodeFamily, n: int) -> np.ndarray:
    if family is NodeFamily.CG:
        k = np.arange(n + 1)
        tau = np.cos((k + 0.5) * np.pi / (n + 1))
    elif family is NodeFamily.CGL:
        k = np.arange(n + 1)
        tau = np.cos(k * np.pi / n)
    elif family is NodeFamily.CP2K_ZEROS:
        k = np.arange(1, n + 2)
        tau = np.cos(k * np.pi / (n + 2))
    elif family is NodeFamily.LG:
        # roots of P_{n+1}, seeded from the Chebyshev-Gauss angles
        k = np.arange(n + 1)
        guess = np.cos((k + 0.75) * np.pi / (n + 1.5))
        tau = _legendre_newton(n + 1, guess, "poly")
    elif family is NodeFamily.LGL:
        # interior: roots of P_n', seeded from the CP1K extrema
        k = np.arange(1, n)
        guess = np.cos(k * np.pi / n)
        interior = _legendre_newton(n, guess, "deriv") if n > 1 else np.array([])
        tau = np.concatenate(([1.0], interior, [-1.0]))
    else:  # pragma: no cover
        raise ValueError(family)
    tau = np.sort(tau)
    # symmetrize to kill cosine roundoff: grids are symmetric about 0
    tau = 0.5 * (tau - tau[::-1])
    if family in _BOUNDARY_GRIDS:
        tau[0], tau[-1] = -1.0, 1.0
    return tau


def quadrature_weights(family: NodeFamily, n: int, nodes) -> np.ndarray:
    """Quadrature weights for the n+1 given nodes of a grid family.

    Legendre grids use the Gauss and Gauss-Lobatto closed forms; Chebyshev
    grids use the Fejer-1 (CG), Clenshaw-Curtis (CGL), and Fejer-2 (CP2K)
    closed forms.  Every weight set is checked for polynomial exactness at
    construction before being accepted.
    """
    tau = np.asarray(nodes, dtype=float)
    if family is NodeFamily.LG:
        phi = eval_basis(PolyFamily.LEGENDRE, n + 1, tau)
        dp = _legendre_deriv(n + 1, tau, phi[:, n + 1], phi[:, n])
        w = 2.0 / ((1.0 - tau**2) * dp**2)
    elif family is NodeFamily.LGL:
        phi = eval_basis(PolyFamily.LEGENDRE, n, tau)
        w = 2.0 / (n * (n + 1) * phi[:, n] ** 2)
    elif family is NodeFamily.CG:
        # Fejer-1 rule on the roots of T_{n+1}
        npts = n + 1
        theta = np.arccos(np.clip(tau, -1.0, 1.0))
        m = np.arange(1, npts // 2 + 1)
        terms = np.cos(2.0 * np.outer(theta, m)) / (4.0 * m**2 - 1.0)
        w = (2.0 / npts) * (1.0 - 2.0 * terms.sum(axis=1))
    elif family is NodeFamily.CGL:
        # Clenshaw-Curtis rule on the extrema of T_n
        theta = np.arccos(np.clip(tau, -1.0, 1.0))
        j = np.arange(1, n // 2 + 1)
        b = np.where(2 * j == n, 1.0, 2.0)
        terms = (b / (4.0 * j**2 - 1.0)) * np.cos(2.0 * np.outer(theta, j))
        c = np.full(n + 1, 2.0)
        c[0] = c[-1] = 1.0
        w = (c / n) * (1.0 - terms.sum(axis=1))
    elif family is NodeFamily.CP2K_ZEROS:
        # Fejer-2 rule on the roots of U_{n+1}
        theta = np.arccos(np.clip(tau, -1.0, 1.0))
        m = np.arange(1, (n + 2) // 2 + 1)
        terms = np.sin(np.outer(theta, 2.0 * m - 1.0)) / (2.0 * m - 1.0)
        w = (4.0 / (n + 2)) * np.sin(theta) * terms.sum(axis=1)
    else:  # pragma: no cover
        raise ValueError(family)

    _check_exactness(family, n, tau, w)
    return w


def _exactness_degree(family: NodeFamily, n: int) -> int:
    if family is NodeFamily.LG:
        return 2 * n + 1
    if family is NodeFamily.LGL:
        return 2 * n - 1
    return n


def _check_exactness(family: NodeFamily, n: int, tau: np.ndarray, w: np.ndarray):
    worst_p, worst = 0, 0.0
    for p in range(_exactness_degree(family, n) + 1):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        err = abs(np.dot(w, tau**p) - exact)
        if err > worst:
            worst_p, worst = p, err
    if worst > 1e-11:
        raise RuntimeError(
            f"quadrature exactness self-check failed for {family} n={n}: "
            f"degree {worst_p} error {worst:.3e}"
        )


def make_grid(family: NodeFamily, n: int) -> Grid:
    """Build the order-n grid (n+1 nodes, ascending) with quadrature weights."""
    if n < 1:
        raise ValueError(f"grid order must be >= 1, got {n}")
    tau = _raw_nodes(family, n)
    w = quadrature_weights(family, n, tau)
    return Grid(nodes=tau, weights=w, family=family, order=n)


def discrete_orthogonality_check(family: PolyFamily, grid: Grid) -> float:
    """Max off-diagonal discrete inner product of the basis on the grid.

    Legendre grids use their quadrature weights; CP1K on CG nodes uses the
    plain sum; CP1K on CGL nodes halves the end terms; CP2K on its zeros
    uses the (1 - tau^2) weight (plain sum: its nodes are strictly
    interior, so no end-halving applies).
    """
    n = grid.order
    phi = eval_basis(family, n, grid.nodes)
    if family is PolyFamily.LEGENDRE:
        w = grid.weights
    elif family is PolyFamily.CP2K:
        w = 1.0 - grid.nodes**2
    else:
        w = np.ones(n + 1)
        if grid.has_boundary_nodes:
            w[0] = w[-1] = 0.5
    gram = phi.T @ (w[:, None] * phi)
    off = gram - np.diag(np.diag(gram))
    return float(np.max(np.abs(off)))
