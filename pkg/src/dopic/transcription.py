"""Direct transcription of Bolza optimal-control problems.

States are modal (one coefficient set per coordinate, highest derivative
represented on the basis); controls are nodal.  The transcription packs the
free variables into one vector chi, exposes equality/inequality constraint
evaluators matching the problem's printed layout, and evaluates the cost by
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dopic.bases import Grid, poly_family_of
from dopic.opic import OpicOperator, build_operator

__all__ = [
    "TimeMap",
    "CoordinateSpec",
    "OcpDefinition",
    "EndpointView",
    "NodeContext",
    "NlpProblem",
    "Transcription",
    "assemble_rate_constraints",
]


@dataclass(frozen=True)
class TimeMap:
    """Affine bijection between physical time [t0, tf] and tau in [-1, 1]."""

    t0: float
    tf: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")

    @property
    def delta(self) -> float:
        return self.tf - self.t0

    def to_time(self, tau):
        return 0.5 * self.delta * np.asarray(tau) + 0.5 * (self.tf + self.t0)

    def to_tau(self, t):
        return (2.0 * np.asarray(t) - (self.tf + self.t0)) / self.delta

    def deriv_scale(self, order: int) -> float:
        """(dt/dtau)^order: converts computational derivatives to time ones."""
        return (0.5 * self.delta) ** order


@dataclass(frozen=True)
class CoordinateSpec:
    """One degree of freedom: name, highest derivative order, and the fixed
    initial values [y(t0), y'(t0), ..., y^(order-1)(t0)] in physical time."""

    name: str
    order: int
    init: tuple

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"coordinate order must be >= 1, got {self.order}")
        if len(self.init) != self.order:
            raise ValueError(
                f"{self.name}: expected {self.order} initial values, got {len(self.init)}"
            )


@dataclass
class OcpDefinition:
    """Continuous-time Bolza problem in callback form.

    ``dynamics(levels, controls, tau, tm)`` receives physical-time
    derivative levels per coordinate (``levels[name][k]`` is y^(k) at the
    nodes) and returns the highest physical derivative per coordinate.
    It must act nodewise: output node k may depend only on input node k
    (this is what collocation means, and the structured Jacobians rely
    on it).
    ``terminal_rows`` are equality rows evaluated on an EndpointView;
    ``ineq_rows`` assembles the problem's full inequality vector from a
    NodeContext.  ``mayer``/``lagrange`` follow the same conventions.
    """

    coordinates: list
    controls: list
    dynamics: object
    terminal_rows: list = field(default_factory=list)
    ineq_rows: object = None
    mayer: object = None
    lagrange: object = None
    t0: float = 0.0
    tf: float = 1.0
    free_tf: bool = False
    tf_min: float = 1e-6
    control_bounds: dict = field(default_factory=dict)
    # declared by the problem author when the transcribed evaluators are
    # affine in chi (linear dynamics, fixed tf, linear rows); forwarded to
    # NlpProblem so solvers can reuse a one-shot Jacobian
    affine_eq: bool = False
    affine_ineq: bool = False
    affine_objective: bool = False
    # chi blocks (chi_layout keys) the inequality rows / objective actually
    # depend on; lets the Jacobian probes skip the other columns entirely
    ineq_depends: tuple | None = None
    objective_depends: tuple | None = None
    # optional closed-form inequality Jacobian,
    # called as ineq_jacobian(transcription, chi, step)
    ineq_jacobian: object = None

    def coordinate(self, name: str) -> CoordinateSpec:
        for c in self.coordinates:
            if c.name == name:
                return c
        raise KeyError(name)


class EndpointView:
    """Boundary values of every coordinate at tau = -1 and +1.

    Values come from the dense reconstruction, so interior-node grids are
    handled identically to boundary-node grids.
    """

    def __init__(self, transcription, alphas, init_slots, tm):
        self._tr = transcription
        self._alphas = alphas
        self._slots = init_slots
        self.tm = tm

    def comp(self, name: str, k: int, side: int) -> float:
        """d^k y / d tau^k at tau = side (side is -1 or +1)."""
        tr = self._tr
        op = tr.ops[name]
        m = op.q - k
        idx = 0 if side < 0 else 1
        row = tr._end_rows[name][idx][m]
        val = float(row @ self._alphas[name])
        slots = self._slots[name]
        p_end = tr._end_p[name][idx]
        for j in range(1, m + 1):
            val += p_end[m - j] * slots[j - 1]
        return val

    def phys(self, name: str, k: int, side: int) -> float:
        """d^k y / d t^k at the corresponding boundary time."""
        return self.comp(name, k, side) / self.tm.deriv_scale(k)


@dataclass
class NodeContext:
    """Everything an inequality/cost callback can see at the nodes."""

    levels: dict  # name -> [y, y', ...] physical-time derivatives at nodes
    controls: dict  # name -> nodal values
    tau: np.ndarray
    tm: TimeMap
    grid: Grid
    endpoints: EndpointView


class _FrozenEndpoints:
    """EndpointView stand-in backed by precomputed boundary values."""

    def __init__(self, values: dict, tm: TimeMap):
        self._values = values
        self.tm = tm

    def comp(self, name: str, k: int, side: int) -> float:
        return self._values[(name, k, side)]

    def phys(self, name: str, k: int, side: int) -> float:
        return self.comp(name, k, side) / self.tm.deriv_scale(k)


def _endpoint_value(tr, alphas, slots, name, k, side) -> float:
    op = tr.ops[name]
    m = op.q - k
    idx = 0 if side < 0 else 1
    val = float(tr._end_rows[name][idx][m] @ alphas[name])
    p_end = tr._end_p[name][idx]
    for j in range(1, m + 1):
        val += p_end[m - j] * slots[name][j - 1]
    return val


def assemble_rate_constraints(values, tm: TimeMap, grid: Grid, rate_max: float) -> np.ndarray:
    """n inter-node rate rows |u_{k+1} - u_k| / ((dt/2)(tau_{k+1} - tau_k)) - rate_max."""
    u = np.asarray(values, dtype=float)
    dtau = np.diff(grid.nodes)
    if np.any(dtau <= 0):
        raise ValueError("grid nodes must be strictly increasing")
    return np.abs(np.diff(u)) / (0.5 * tm.delta * dtau) - rate_max


@dataclass
class NlpProblem:
    """Packed NLP: minimize objective(chi) s.t. eq = 0, ineq <= 0.

    The affine flags declare that an evaluator is affine in chi, letting a
    solver compute its finite-difference Jacobian once and reuse it (exact
    for affine maps).
    """

    objective: object
    eq_constraints: object
    ineq_constraints: object
    n_chi: int
    chi_layout: dict  # block name -> slice
    bounds: list | None = None
    trivial_eq_indices: tuple = ()
    affine_eq: bool = False
    affine_ineq: bool = False
    affine_objective: bool = False
    # optional Jacobian/gradient callables (chi, step) -> ndarray; forward
    # finite differences arranged around the transcription structure
    eq_jac: object = None
    ineq_jac: object = None
    objective_grad: object = None


class Transcription:
    """Ties an OcpDefinition to a basis/grid/order and evaluates the NLP."""

    def __init__(self, ocp: OcpDefinition, grid: Grid):
        self.ocp = ocp
        self.grid = grid
        self.n = grid.order
        self.family = poly_family_of(grid.family)
        self.ops: dict[str, OpicOperator] = {}
        cache: dict[int, OpicOperator] = {}
        for c in ocp.coordinates:
            if c.order not in cache:
                cache[c.order] = build_operator(self.family, self.n, c.order, grid)
            self.ops[c.name] = cache[c.order]

        # chi layout: per-coordinate alpha blocks, per-channel control
        # blocks, then tf if free
        self.chi_layout: dict[str, slice] = {}
        off = 0
        blk = self.n + 1
        for c in ocp.coordinates:
            self.chi_layout[f"alpha:{c.name}"] = slice(off, off + blk)
            off += blk
        for u in ocp.controls:
            self.chi_layout[f"u:{u}"] = slice(off, off + blk)
            off += blk
        if ocp.free_tf:
            self.chi_layout["tf"] = slice(off, off + 1)
            off += 1
        self.n_chi = off

        # endpoint reconstruction rows at tau = -1 and +1 per coordinate
        self._end_rows = {}
        self._end_p = {}
        for c in ocp.coordinates:
            op = self.ops[c.name]
            rows_by_side = []
            for side in (-1.0, 1.0):
                pts = np.array([side])
                rows_by_side.append(
                    [op.point_matrix(m, pts)[0] for m in range(c.order + 1)]
                )
            self._end_rows[c.name] = rows_by_side
            p_minus = np.array([0.0 if k else 1.0 for k in range(c.order)])
            p_plus = np.array(
                [2.0**k / math.factorial(k) for k in range(c.order)]
            )
            self._end_p[c.name] = (p_minus, p_plus)

        self._n_ic_rows = sum(c.order for c in ocp.coordinates)
        self._n_xi_rows = (self.n + 1) * len(ocp.coordinates)

    # -- chi packing ------------------------------------------------------

    def pack(self, alphas: dict, controls: dict, tf: float | None = None) -> np.ndarray:
        chi = np.zeros(self.n_chi)
        for c in self.ocp.coordinates:
            chi[self.chi_layout[f"alpha:{c.name}"]] = alphas[c.name]
        for u in self.ocp.controls:
            chi[self.chi_layout[f"u:{u}"]] = controls[u]
        if self.ocp.free_tf:
            if tf is None:
                raise ValueError("free-tf problem requires a tf value")
            chi[self.chi_layout["tf"]] = tf
        return chi

    def unpack(self, chi):
        chi = np.asarray(chi, dtype=float)
        if chi.size != self.n_chi:
            raise ValueError(f"expected |chi| = {self.n_chi}, got {chi.size}")
        alphas = {
            c.name: chi[self.chi_layout[f"alpha:{c.name}"]]
            for c in self.ocp.coordinates
        }
        controls = {
            u: chi[self.chi_layout[f"u:{u}"]] for u in self.ocp.controls
        }
        tf = float(chi[self.chi_layout["tf"]][0]) if self.ocp.free_tf else self.ocp.tf
        return alphas, controls, tf

    # -- evaluation -------------------------------------------------------

    def _time_map(self, tf: float) -> TimeMap:
        if self.ocp.free_tf:
            tf = max(tf, self.ocp.t0 + self.ocp.tf_min)
        return TimeMap(self.ocp.t0, tf)

    def _init_slots(self, tm: TimeMap) -> dict:
        slots = {}
        for c in self.ocp.coordinates:
            q = c.order
            slots[c.name] = [
                tm.deriv_scale(q - j) * c.init[q - j] for j in range(1, q + 1)
            ]
        return slots

    def _state(self, chi):
        alphas, controls, tf = self.unpack(chi)
        tm = self._time_map(tf)
        slots = self._init_slots(tm)
        levels_phys = {}
        highest_comp = {}
        for c in self.ocp.coordinates:
            op = self.ops[c.name]
            q = c.order
            a = alphas[c.name]
            ic = slots[c.name]
            phys = []
            for k in range(q):
                comp = op.reconstruct_level(a, ic, q - k)
                phys.append(comp / tm.deriv_scale(k))
            levels_phys[c.name] = phys
            highest_comp[c.name] = op.node_matrices[0] @ a
        return alphas, controls, tm, slots, levels_phys, highest_comp

    def collocation_residual(self, chi) -> np.ndarray:
        """Stacked Xi blocks in coordinate order."""
        alphas, controls, tm, slots, levels, highest = self._state(chi)
        f = self.ocp.dynamics(levels, controls, self.grid.nodes, tm)
        blocks = []
        for c in self.ocp.coordinates:
            fc = np.asarray(f[c.name], dtype=float)
            if not np.all(np.isfinite(fc)):
                bad = int(np.argmax(~np.isfinite(fc)))
                raise FloatingPointError(
                    f"non-finite dynamics output for {c.name} at node {bad}"
                )
            blocks.append(highest[c.name] - tm.deriv_scale(c.order) * fc)
        return np.concatenate(blocks)

    def endpoint_view(self, chi) -> EndpointView:
        alphas, _, tf = self.unpack(chi)
        tm = self._time_map(tf)
        return EndpointView(self, alphas, self._init_slots(tm), tm)

    def eq_constraints(self, chi) -> np.ndarray:
        """[initial rows, Xi blocks, terminal rows] per the problem layout."""
        alphas, controls, tm, slots, levels, highest = self._state(chi)
        end = EndpointView(self, alphas, slots, tm)

        rows = []
        for c in self.ocp.coordinates:
            for k in range(c.order):
                rows.append(end.comp(c.name, k, -1) - tm.deriv_scale(k) * c.init[k])

        f = self.ocp.dynamics(levels, controls, self.grid.nodes, tm)
        xi = []
        for c in self.ocp.coordinates:
            fc = np.asarray(f[c.name], dtype=float)
            xi.append(highest[c.name] - tm.deriv_scale(c.order) * fc)

        terminal = [row(end, tm) for row in self.ocp.terminal_rows]
        return np.concatenate([np.asarray(rows), *xi, np.asarray(terminal)])

    def _node_context(self, chi) -> NodeContext:
        alphas, controls, tm, slots, levels, _ = self._state(chi)
        end = EndpointView(self, alphas, slots, tm)
        return NodeContext(
            levels=levels,
            controls=controls,
            tau=self.grid.nodes,
            tm=tm,
            grid=self.grid,
            endpoints=end,
        )

    def ineq_constraints(self, chi) -> np.ndarray:
        if self.ocp.ineq_rows is None:
            return np.zeros(0)
        return np.asarray(self.ocp.ineq_rows(self._node_context(chi)), dtype=float)

    def objective(self, chi) -> float:
        ctx = self._node_context(chi)
        total = 0.0
        if self.ocp.mayer is not None:
            total += float(self.ocp.mayer(ctx.endpoints, ctx.tm))
        if self.ocp.lagrange is not None:
            g = np.asarray(
                self.ocp.lagrange(ctx.levels, ctx.controls, ctx.tau, ctx.tm),
                dtype=float,
            )
            total += 0.5 * ctx.tm.delta * float(np.dot(self.grid.weights, g))
        return total

    # -- reporting --------------------------------------------------------

    def trajectory(self, chi, dense_points=None):
        """Nodal (or dense) time histories for every coordinate and control.

        Returns (t, states, controls) where states[name][k] is y^(k).
        Dense control output is piecewise-linear in tau between the nodes
        (presentation only; the transcription places controls at nodes).
        """
        alphas, controls, tf = self.unpack(chi)
        tm = self._time_map(tf)
        slots = self._init_slots(tm)
        pts = self.grid.nodes if dense_points is None else np.asarray(dense_points)
        states = {}
        for c in self.ocp.coordinates:
            op = self.ops[c.name]
            q = c.order
            states[c.name] = [
                op.reconstruct_dense(alphas[c.name], slots[c.name], q - k, pts)
                / tm.deriv_scale(k)
                for k in range(q + 1)
            ]
        out_controls = {}
        for u in self.ocp.controls:
            if dense_points is None:
                out_controls[u] = controls[u]
            else:
                out_controls[u] = np.interp(pts, self.grid.nodes, controls[u])
        return tm.to_time(pts), states, out_controls

    # -- structured finite-difference Jacobians ----------------------------
    #
    # The dynamics callback acts nodewise (node k of its output depends only
    # on node k of its inputs), so the Jacobian of the collocation blocks
    # factors into nodewise partial derivatives (a handful of dynamics
    # evaluations) chained with the known linear reconstruction matrices.
    # Only the free-time column needs a full-vector difference.

    def _columns_of(self, blocks) -> list:
        if blocks is None:
            return list(range(self.n_chi))
        cols = []
        for name in blocks:
            cols.extend(range(*self.chi_layout[name].indices(self.n_chi)))
        return cols

    def _nodewise_partials(self, levels, controls, tm, f0, step):
        """df_c/d(input channel) at the nodes, by forward differences."""
        tau = self.grid.nodes
        partials = {}

        def probe(levels_p, controls_p, key):
            f1 = self.ocp.dynamics(levels_p, controls_p, tau, tm)
            for c in self.ocp.coordinates:
                partials.setdefault(c.name, {})[key] = (
                    np.asarray(f1[c.name], dtype=float) - f0[c.name]
                ) / h

        for c2 in self.ocp.coordinates:
            for m in range(c2.order):
                v = levels[c2.name][m]
                h = step * np.maximum(1.0, np.abs(v))
                lv = {k: list(vs) for k, vs in levels.items()}
                lv[c2.name][m] = v + h
                probe(lv, controls, ("level", c2.name, m))
        for u in self.ocp.controls:
            v = controls[u]
            h = step * np.maximum(1.0, np.abs(v))
            cp = dict(controls)
            cp[u] = v + h
            probe(levels, cp, ("control", u))
        return partials

    def eq_jacobian(self, chi, step: float = 1e-7) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        alphas, controls, tm, slots, levels, highest = self._state(chi)
        f0 = {
            k: np.asarray(v, dtype=float)
            for k, v in self.ocp.dynamics(
                levels, controls, self.grid.nodes, tm
            ).items()
        }
        partials = self._nodewise_partials(levels, controls, tm, f0, step)

        n_nodes = self.n + 1
        n_term = len(self.ocp.terminal_rows)
        n_eq = self._n_ic_rows + self._n_xi_rows + n_term
        jac = np.zeros((n_eq, self.n_chi))

        # collocation blocks (initial-condition rows stay identically zero)
        row = self._n_ic_rows
        for c in self.ocp.coordinates:
            rows = slice(row, row + n_nodes)
            s_c = tm.deriv_scale(c.order)
            dfd = partials[c.name]
            for c2 in self.ocp.coordinates:
                op2 = self.ops[c2.name]
                block = np.zeros((n_nodes, n_nodes))
                for m in range(c2.order):
                    d = dfd[("level", c2.name, m)]
                    if np.any(d):
                        block += d[:, None] * (
                            op2.node_matrix(c2.order - m) / tm.deriv_scale(m)
                        )
                block *= -s_c
                if c2.name == c.name:
                    block += self.ops[c.name].node_matrix(0)
                jac[rows, self.chi_layout[f"alpha:{c2.name}"]] = block
            for u in self.ocp.controls:
                d = dfd[("control", u)]
                cols = self.chi_layout[f"u:{u}"]
                jac[rows, cols] = np.diag(-s_c * d)
            row += n_nodes

        # terminal rows: difference in endpoint-value space, then chain
        # through the linear endpoint reconstruction rows
        if n_term:
            end_vals = {}
            for c in self.ocp.coordinates:
                for k in range(c.order + 1):
                    for side in (-1, +1):
                        end_vals[(c.name, k, side)] = _endpoint_value(
                            self, alphas, slots, c.name, k, side
                        )
            base_end = _FrozenEndpoints(end_vals, tm)
            t_base = np.array(
                [row_fn(base_end, tm) for row_fn in self.ocp.terminal_rows]
            )
            trows = slice(n_eq - n_term, n_eq)
            for (name, k, side), val in end_vals.items():
                h = step * max(1.0, abs(val))
                pert = dict(end_vals)
                pert[(name, k, side)] = val + h
                p_end = _FrozenEndpoints(pert, tm)
                dt = (
                    np.array([row_fn(p_end, tm) for row_fn in self.ocp.terminal_rows])
                    - t_base
                ) / h
                if np.any(dt):
                    idx = 0 if side < 0 else 1
                    lin = self._end_rows[name][idx][self.ops[name].q - k]
                    jac[trows, self.chi_layout[f"alpha:{name}"]] += np.outer(dt, lin)

        if self.ocp.free_tf:
            i = self.chi_layout["tf"].start
            h = step * max(1.0, abs(chi[i]))
            pert = chi.copy()
            pert[i] += h
            jac[:, i] = (self.eq_constraints(pert) - self.eq_constraints(chi)) / h
        return jac

    def ineq_jacobian(self, chi, step: float = 1e-7) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        if self.ocp.ineq_jacobian is not None:
            return self.ocp.ineq_jacobian(self, chi, step)
        g0 = self.ineq_constraints(chi)
        jac = np.zeros((g0.size, self.n_chi))
        for i in self._columns_of(self.ocp.ineq_depends):
            h = step * max(1.0, abs(chi[i]))
            pert = chi.copy()
            pert[i] += h
            jac[:, i] = (self.ineq_constraints(pert) - g0) / h
        return jac

    def objective_gradient(self, chi, step: float = 1e-7) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        f0 = self.objective(chi)
        grad = np.zeros(self.n_chi)
        for i in self._columns_of(self.ocp.objective_depends):
            h = step * max(1.0, abs(chi[i]))
            pert = chi.copy()
            pert[i] += h
            grad[i] = (self.objective(pert) - f0) / h
        return grad

    # -- NLP packaging ----------------------------------------------------

    def nlp_problem(self) -> NlpProblem:
        bounds = None
        if self.ocp.free_tf or self.ocp.control_bounds:
            bounds = [(None, None)] * self.n_chi
            for u, (lo, hi) in self.ocp.control_bounds.items():
                for i in range(*self.chi_layout[f"u:{u}"].indices(self.n_chi)):
                    bounds[i] = (lo, hi)
            if self.ocp.free_tf:
                i = self.chi_layout["tf"].start
                bounds[i] = (self.ocp.t0 + self.ocp.tf_min, None)
        return NlpProblem(
            objective=self.objective,
            eq_constraints=self.eq_constraints,
            ineq_constraints=self.ineq_constraints,
            n_chi=self.n_chi,
            chi_layout=dict(self.chi_layout),
            bounds=bounds,
            trivial_eq_indices=tuple(range(self._n_ic_rows)),
            affine_eq=self.ocp.affine_eq,
            affine_ineq=self.ocp.affine_ineq,
            affine_objective=self.ocp.affine_objective,
            eq_jac=self.eq_jacobian,
            ineq_jac=self.ineq_jacobian
            if self.ocp.ineq_depends is not None
            or self.ocp.ineq_jacobian is not None
            else None,
            objective_grad=self.objective_gradient
            if self.ocp.objective_depends is not None
            else None,
        )
