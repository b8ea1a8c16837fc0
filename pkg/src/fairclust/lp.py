"""Fair-assignment linear programs.

The canonical program has an assignment variable x[i, j] per candidate
center i and point j (restricted to edges within the threshold for the
radius objectives) and an opening variable y[i] per center:

    sum_i x[i, j] = 1                 every point fully assigned
    x[i, j] <= y[i]                   service only from open mass
    sum_i y[i] <= k                   opening budget
    lo_h * m(i) <= m_h(i) <= hi_h * m(i)   per-center color mass bounds,
                                      m(i) the total mass on center i
    0 <= x, 0 <= y <= 1

Color-bound rows are written with the rational bounds cleared to integer
coefficients.  The x upper bound of one is implied by the assignment rows
and is not materialized.  Objectives: none (feasibility) for the radius
objectives, summed service cost for k-median / k-means (whose instances
carry squared distances), plus opening costs for facility location.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InternalError, ParseError
from .instance import FairnessSpec, Instance, Objective
from .simplex import EQ, GE, LE, SimplexProgram, solve_dense

EDGE_TOL = 1e-12  # threshold edges are closed: d <= tau + EDGE_TOL
VIOLATION_TOL = 1e-9
CHECK_TOL = 1e-7
# row activation fires above the solver's own feasibility tolerance, else a
# sub-tolerance violation would re-activate the same satisfied row forever
ACTIVATION_TOL = 1e-6

MAX_ROUNDS = 200

_SCIPY_OK: bool | None = None


def _scipy_available() -> bool:
    global _SCIPY_OK
    if _SCIPY_OK is None:
        try:
            import scipy.optimize  # noqa: F401
            import scipy.sparse  # noqa: F401
            _SCIPY_OK = True
        except Exception:
            _SCIPY_OK = False
    return _SCIPY_OK


def default_engine() -> str:
    """LP engine used when a call does not pick one: the sparse scipy
    backend when importable, else the in-package dense simplex.  Override
    with FAIRCLUST_LP_ENGINE=native|scipy."""
    eng = os.environ.get("FAIRCLUST_LP_ENGINE", "").strip().lower()
    if eng in ("native", "scipy"):
        return eng
    if eng:
        raise ParseError(f"unknown LP engine {eng!r}")
    return "scipy" if _scipy_available() else "native"


# ---------------------------------------------------------------------------
# explicit LP objects


@dataclass(eq=False)
class LinearProgram:
    """Row-level LP with named variables; bounds are enforced through rows,
    the `lower`/`upper` arrays are descriptive."""

    n_vars: int
    var_names: list
    lower: np.ndarray
    upper: list
    rows: list  # (coeffs: dict var->float, rel, rhs, tag)
    objective: np.ndarray
    x_index: dict = field(default_factory=dict)  # (i, j) -> var
    y_index: dict = field(default_factory=dict)  # i -> var
    meta: dict = field(default_factory=dict)

    def dense_rows(self):
        A = np.zeros((len(self.rows), self.n_vars))
        rels, b = [], np.zeros(len(self.rows))
        for r, (coeffs, rel, rhs, _tag) in enumerate(self.rows):
            for v, cv in coeffs.items():
                A[r, v] = cv
            rels.append(rel)
            b[r] = rhs
        return A, rels, b


@dataclass(eq=False)
class LpSolution:
    status: str
    values: np.ndarray | None
    objective: float | None
    lp: LinearProgram
    pivots: int = 0

    def max_violation(self) -> float:
        """Largest constraint violation, for invariant checks."""
        if self.values is None:
            return 0.0
        A, rels, b = self.lp.dense_rows()
        lhs = A @ self.values
        worst = float(np.max(-self.values, initial=0.0))
        for r, rel in enumerate(rels):
            if rel == LE:
                worst = max(worst, lhs[r] - b[r])
            elif rel == GE:
                worst = max(worst, b[r] - lhs[r])
            else:
                worst = max(worst, abs(lhs[r] - b[r]))
        return worst

    def as_xy(self, instance: Instance):
        x = np.zeros((instance.m, instance.n))
        y = np.zeros(instance.m)
        for (i, j), v in self.lp.x_index.items():
            x[i, j] = self.values[v]
        for i, v in self.lp.y_index.items():
            y[i] = self.values[v]
        return x, y


def allowed_edges(instance: Instance, objective: Objective,
                  tau: float | None) -> np.ndarray:
    """(m, n) mask of the x variables that exist."""
    if objective.threshold_mode:
        if tau is None:
            raise ParseError("threshold objective requires tau")
        return instance.d_lp <= tau + EDGE_TOL
    return np.ones((instance.m, instance.n), dtype=bool)


def _fairness_coeffs(fairness: FairnessSpec, h: int):
    lo, hi = fairness.lower[h], fairness.upper[h]
    return (lo.numerator, lo.denominator), (hi.numerator, hi.denominator)


def build_fair_lp(instance: Instance, objective: Objective,
                  fairness: FairnessSpec, tau: float | None = None) -> LinearProgram:
    """Canonical fair LP; in threshold mode x variables exist only for
    center-point pairs within tau."""
    n, m, g = instance.n, instance.m, instance.n_colors
    allowed = allowed_edges(instance, objective, tau)
    var_names, lower, upper = [], [], []
    x_index, y_index = {}, {}
    for i in range(m):
        for j in range(n):
            if allowed[i, j]:
                x_index[(i, j)] = len(var_names)
                var_names.append(f"x_{i}_{j}")
                upper.append(None)  # <= 1 implied by the assignment row
    for i in range(m):
        y_index[i] = len(var_names)
        var_names.append(f"y_{i}")
        upper.append(1.0)
    nv = len(var_names)
    rows = []
    for j in range(n):
        coeffs = {x_index[(i, j)]: 1.0 for i in range(m) if allowed[i, j]}
        rows.append((coeffs, EQ, 1.0, ("assign", j)))
    for i in range(m):
        for j in range(n):
            if allowed[i, j]:
                rows.append((
                    {x_index[(i, j)]: 1.0, y_index[i]: -1.0},
                    LE, 0.0, ("open", i, j),
                ))
    rows.append(({y_index[i]: 1.0 for i in range(m)}, LE, float(instance.k),
                 ("card",)))
    for i in range(m):
        cols = [j for j in range(n) if allowed[i, j]]
        for h in range(g):
            (lo_n, lo_d), (hi_n, hi_d) = _fairness_coeffs(fairness, h)
            is_h = [instance.colors[j] == h for j in cols]
            lo_row = {}
            hi_row = {}
            for j, hj in zip(cols, is_h):
                v = x_index[(i, j)]
                lo_row[v] = lo_n - (lo_d if hj else 0)
                hi_row[v] = (hi_d if hj else 0) - hi_n
            rows.append((lo_row, LE, 0.0, ("fair_lo", i, h)))
            rows.append((hi_row, LE, 0.0, ("fair_hi", i, h)))
    for i in range(m):
        rows.append(({y_index[i]: 1.0}, LE, 1.0, ("ybound", i)))

    c = np.zeros(nv)
    if objective.separable:
        d = instance.d_lp
        for (i, j), v in x_index.items():
            c[v] = d[i, j]
        if objective.uses_open_costs:
            for i, v in y_index.items():
                c[v] = instance.open_costs[i]
    return LinearProgram(
        n_vars=nv, var_names=var_names, lower=np.zeros(nv), upper=upper,
        rows=rows, objective=c, x_index=x_index, y_index=y_index,
        meta={"kind": objective.kind, "tau": tau, "k": instance.k},
    )


def solve_lp(lp: LinearProgram, feasibility_only: bool = False,
             engine: str | None = None) -> LpSolution:
    if (engine or default_engine()) == "scipy":
        return _solve_lp_scipy(lp, feasibility_only)
    A, rels, b = lp.dense_rows()
    res = solve_dense(lp.objective, A, rels, b, feasibility_only=feasibility_only)
    if res.status != "optimal":
        return LpSolution(res.status, None, None, lp, res.pivots)
    obj = math.fsum(float(lp.objective[v]) * float(res.x[v])
                    for v in np.flatnonzero(lp.objective))
    return LpSolution("optimal", res.x, obj, lp, res.pivots)


def _solve_lp_scipy(lp: LinearProgram, feasibility_only: bool) -> LpSolution:
    """Sparse backend for explicit LPs.  Bound rows stay rows, so the two
    engines describe the identical polytope and differ only in arithmetic."""
    from scipy import sparse
    from scipy.optimize import linprog

    ub_data: list = []
    ub_idx: list = []
    b_ub: list = []
    eq_data: list = []
    eq_idx: list = []
    b_eq: list = []
    for coeffs, rel, rhs, _tag in lp.rows:
        if rel == EQ:
            r = len(b_eq)
            for v, cv in coeffs.items():
                eq_idx.append((r, v))
                eq_data.append(float(cv))
            b_eq.append(float(rhs))
        else:
            s = 1.0 if rel == LE else -1.0
            r = len(b_ub)
            for v, cv in coeffs.items():
                ub_idx.append((r, v))
                ub_data.append(s * float(cv))
            b_ub.append(s * float(rhs))

    def _mat(data, idx, nrows):
        if not nrows:
            return None
        rr = [p[0] for p in idx]
        cc = [p[1] for p in idx]
        return sparse.coo_matrix((data, (rr, cc)),
                                 shape=(nrows, lp.n_vars)).tocsr()

    c = (np.zeros(lp.n_vars) if feasibility_only
         else np.asarray(lp.objective, dtype=float))
    res = linprog(c,
                  A_ub=_mat(ub_data, ub_idx, len(b_ub)),
                  b_ub=np.asarray(b_ub) if b_ub else None,
                  A_eq=_mat(eq_data, eq_idx, len(b_eq)),
                  b_eq=np.asarray(b_eq) if b_eq else None,
                  bounds=(0, None), method="highs")
    if res.status == 2:
        return LpSolution("infeasible", None, None, lp)
    if res.status == 3:
        return LpSolution("unbounded", None, None, lp)
    if res.status != 0 or res.x is None:
        raise InternalError(f"sparse LP backend failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    obj = math.fsum(float(lp.objective[v]) * float(x[v])
                    for v in np.flatnonzero(lp.objective))
    return LpSolution("optimal", x, obj, lp, pivots=int(res.nit))


# ---------------------------------------------------------------------------
# threshold graphs


class ThresholdGraph:
    """Unit-hop graph at a distance threshold.  `kind` "points" connects
    point pairs within tau; "bipartite" connects points to locations within
    tau (vertices are points then locations).  power(t) holds exactly the
    vertex pairs at BFS hop distance between 1 and t."""

    def __init__(self, instance: Instance, tau: float, kind: str):
        self.tau = float(tau)
        self.kind = kind
        self.n_points = instance.n
        if kind == "points":
            adj = instance.d_pp <= tau + EDGE_TOL
            np.fill_diagonal(adj, False)
        elif kind == "bipartite":
            n, m = instance.n, instance.m
            adj = np.zeros((n + m, n + m), dtype=bool)
            within = instance.d_lp <= tau + EDGE_TOL  # (m, n)
            adj[:n, n:] = within.T
            adj[n:, :n] = within
        else:
            raise ParseError(f"unknown threshold graph kind {kind!r}")
        self.adj = adj
        self._hops = None

    def hops(self) -> np.ndarray:
        """All-pairs hop distances; unreachable pairs hold V+1."""
        if self._hops is None:
            V = self.adj.shape[0]
            sentinel = V + 1
            dist = np.full((V, V), sentinel, dtype=int)
            np.fill_diagonal(dist, 0)
            reach = np.eye(V, dtype=bool)
            frontier = np.eye(V, dtype=bool)
            d = 0
            a8 = self.adj.astype(np.uint8)
            while frontier.any():
                nxt = ((frontier.astype(np.uint8) @ a8) > 0) & ~reach
                d += 1
                dist[nxt] = d
                reach |= nxt
                frontier = nxt
            self._hops = dist
        return self._hops

    def power(self, t: int) -> np.ndarray:
        h = self.hops()
        out = (h >= 1) & (h <= t)
        return out

    def components(self) -> np.ndarray:
        """Component label per vertex (smallest member vertex index)."""
        h = self.hops()
        V = self.adj.shape[0]
        reach = h <= V
        labels = np.empty(V, dtype=int)
        for v in range(V):
            labels[v] = int(np.flatnonzero(reach[v])[0])
        return labels


def threshold_candidates(instance: Instance) -> np.ndarray:
    """Sorted distinct center-to-point distances, the only possible optimal
    radii."""
    return np.unique(instance.d_lp)


# ---------------------------------------------------------------------------
# fast canonical solves with row activation

@dataclass(eq=False)
class FairLpResult:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None = None  # (m, n)
    y: np.ndarray | None = None  # (m,)
    value: float | None = None
    tau: float | None = None
    rounds: int = 0
    pivots: int = 0
    active_cols: np.ndarray | None = None  # (m, n) columns the engine used


def _violated_families(instance, fairness, x, y, k, allowed, tol):
    """Canonical-row families violated by (x, y); returns (open, fair, ybound)
    index collections."""
    open_viol = np.argwhere((x > y[:, None] + tol) & allowed)
    mass = x.sum(axis=1)
    fair_viol = []
    for h in range(instance.n_colors):
        cm = x[:, instance.color_mask(h)].sum(axis=1)
        (lo_n, lo_d), (hi_n, hi_d) = _fairness_coeffs(fairness, h)
        lo_bad = lo_n * mass - lo_d * cm > tol * max(1.0, lo_d)
        hi_bad = hi_d * cm - hi_n * mass > tol * max(1.0, hi_d)
        for i in np.flatnonzero(lo_bad):
            fair_viol.append((int(i), h, "lo"))
        for i in np.flatnonzero(hi_bad):
            fair_viol.append((int(i), h, "hi"))
    ybound_viol = [int(i) for i in np.flatnonzero(y > 1.0 + tol)]
    return [(int(i), int(j)) for i, j in open_viol], fair_viol, ybound_viol


def _fair_coeff_table(fairness, g):
    """coeff[(h_row, side)] as a length-g vector over point colors."""
    table = {}
    for h in range(g):
        (lo_n, lo_d), (hi_n, hi_d) = _fairness_coeffs(fairness, h)
        ind = np.zeros(g)
        ind[h] = 1.0
        table[h, "lo"] = lo_n - lo_d * ind
        table[h, "hi"] = hi_d * ind - hi_n
    return table


def solve_fair_lp(instance: Instance, objective: Objective,
                  fairness: FairnessSpec, tau: float | None = None,
                  feasibility_only: bool | None = None,
                  engine: str | None = None) -> FairLpResult:
    """Solve the canonical fair LP.

    The sparse engine hands the complete program to a scipy backend in one
    call.  The native engine runs row activation over the in-package dense
    simplex: every allowed assignment column is materialized up front, while
    the per-column opening rows and the color-bound / y-bound rows activate
    only when the incumbent point violates them, with the basis kept warm
    across rounds.  Activated rows are a relaxation, so a point violating no
    canonical row is optimal for the full program, and with every column
    present an infeasible phase 1 certifies the full program infeasible.

    Both engines enforce the identical row set; results agree to solver
    tolerance and the test suite cross-checks them on small instances.
    """
    if feasibility_only is None:
        feasibility_only = objective.threshold_mode
    n, m, g = instance.n, instance.m, instance.n_colors
    allowed = allowed_edges(instance, objective, tau)
    if not np.all(allowed.any(axis=0)):
        return FairLpResult("infeasible", tau=tau)
    if (engine or default_engine()) == "scipy":
        return _solve_fair_scipy(instance, objective, fairness, tau,
                                 feasibility_only, allowed)
    d = instance.d_lp
    colors = instance.colors
    coeff_table = _fair_coeff_table(fairness, g)
    separable_cost = objective.separable and not feasibility_only

    y_cost = np.zeros(m)
    if separable_cost and objective.uses_open_costs:
        y_cost = np.asarray(instance.open_costs, dtype=float)

    fair_keys: list = []  # activated fairness families, in activation order
    ybound_done = np.zeros(m, dtype=bool)

    class _Master:
        """Native-engine working program: all allowed assignment columns
        over the activated subset of canonical rows."""

        def __init__(self):
            self.prog = SimplexProgram()
            self.y_of = self.prog.add_variables(y_cost,
                                                [{} for _ in range(m)])
            self.assign_row = np.asarray(self.prog.add_rows(
                [({}, EQ, 1.0) for _ in range(n)]))
            self.prog.add_rows([({self.y_of[i]: 1.0 for i in range(m)}, LE,
                                 float(instance.k))])
            self.colact = np.zeros((m, n), dtype=bool)
            self.xvar: dict = {}
            self.open_row_of: dict = {}  # (i, j) -> master row
            self.fair_row_of: dict = {}  # (i, h, side) -> master row
            self.fair_of_center: dict = {}  # i -> [((h, side), row)]
            for key in fair_keys:
                # columns arrive afterwards and wire their coefficients in
                i, h, side = key
                rid = self.prog.add_rows([({}, LE, 0.0)])[0]
                self.fair_row_of[key] = rid
                self.fair_of_center.setdefault(i, []).append(((h, side),
                                                              rid))
            for i in np.flatnonzero(ybound_done):
                self.prog.add_rows([({self.y_of[i]: 1.0}, LE, 1.0)])

        def enter(self, pairs, lazy_open=False):
            """Admit columns; unless deferred, each brings its opening row."""
            costs, entries, row_specs = [], [], []
            vid = self.prog.nv
            for (i, j) in pairs:
                ent = {self.assign_row[j]: 1.0}
                for (h, side), rid in self.fair_of_center.get(i, ()):
                    cf = float(coeff_table[h, side][colors[j]])
                    if cf != 0.0:
                        ent[rid] = cf
                costs.append(d[i, j] if separable_cost else 0.0)
                entries.append(ent)
                if not lazy_open:
                    row_specs.append(({vid: 1.0, self.y_of[i]: -1.0}, LE,
                                      0.0))
                self.xvar[(i, j)] = vid
                self.colact[i, j] = True
                vid += 1
            return self.prog.extend(costs, entries, row_specs)

        def open_specs(self, pairs):
            """Row specs coupling a deferred column back under its y."""
            specs = []
            rid_base = len(self.prog.rows)
            for (i, j) in pairs:
                self.open_row_of[(i, j)] = rid_base + len(specs)
                specs.append(({self.xvar[(i, j)]: 1.0,
                               self.y_of[i]: -1.0}, LE, 0.0))
            return specs

        def fair_specs(self, new_keys):
            """Row specs for newly violated fairness families."""
            specs = []
            rid_base = len(self.prog.rows)
            for (i, h, side) in new_keys:
                fair_keys.append((i, h, side))
                coeffs = {}
                for jj in np.flatnonzero(self.colact[i]):
                    cf = float(coeff_table[h, side][colors[jj]])
                    if cf != 0.0:
                        coeffs[self.xvar[(i, int(jj))]] = cf
                rid = rid_base + len(specs)
                self.fair_row_of[(i, h, side)] = rid
                self.fair_of_center.setdefault(i, []).append(((h, side),
                                                              rid))
                specs.append((coeffs, LE, 0.0))
            return specs

        def ybound_specs(self, idxs):
            specs = []
            for i in idxs:
                if not ybound_done[i]:
                    ybound_done[i] = True
                    specs.append(({self.y_of[i]: 1.0}, LE, 1.0))
            return specs

    M = _Master()
    res = M.enter([(int(i), int(j)) for i, j in np.argwhere(allowed)],
                  lazy_open=True)

    refreshed = False
    for round_no in range(1, MAX_ROUNDS + 1):
        if res.status == "infeasible":
            # every allowed column is present, so phase 1 certified the
            # full program infeasible, not just a restriction of it
            return FairLpResult("infeasible", tau=tau, rounds=round_no,
                                pivots=M.prog.pivots)
        if res.status != "optimal":
            # without every y <= 1 row the master can expose a zero-cost
            # ray; materialize the missing bounds and retry
            if not ybound_done.all():
                specs = M.ybound_specs(np.flatnonzero(~ybound_done))
                res = M.prog.extend([], [], specs)
                continue
            raise InternalError(f"fair LP reported {res.status}")

        x = np.zeros((m, n))
        for (i, j), v in M.xvar.items():
            x[i, j] = res.x[v]
        y = res.x[:m].copy()

        ov, fv, yv = _violated_families(instance, fairness, x, y, instance.k,
                                        allowed, ACTIVATION_TOL)
        specs = M.open_specs([p for p in ov if p not in M.open_row_of])
        specs += M.fair_specs([f for f in fv if f not in M.fair_row_of])
        specs += M.ybound_specs(yv)
        if specs:
            res = M.prog.extend([], [], specs)
            continue
        if ov and not refreshed:
            # coupling rows exist yet still violated: numerical drift, so
            # refresh the factorization once before accepting the point
            refreshed = True
            res = M.prog.solve()
            continue

        resid = float(np.abs(x.sum(axis=0) - 1.0).max())
        if resid > 1e-6 and not refreshed:
            # warm-chain drift; one fresh factorization before accepting
            refreshed = True
            res = M.prog.solve()
            continue
        if objective.threshold_mode:
            value = tau
        else:
            value = math.fsum(float(d[i, j]) * float(res.x[v])
                              for (i, j), v in M.xvar.items())
            if objective.uses_open_costs:
                value += math.fsum(float(instance.open_costs[i]) * float(y[i])
                                   for i in range(m))
        return FairLpResult("optimal", x, y, value, tau, round_no,
                            M.prog.pivots, active_cols=M.colact)
    raise InternalError(f"activation did not settle in {MAX_ROUNDS} rounds")


def _solve_fair_scipy(instance, objective, fairness, tau, feasibility_only,
                      allowed) -> FairLpResult:
    """One-shot canonical solve through the sparse backend."""
    lp = build_fair_lp(instance, objective, fairness, tau)
    sol = _solve_lp_scipy(lp, feasibility_only)
    if sol.status == "infeasible":
        return FairLpResult("infeasible", tau=tau, rounds=1,
                            pivots=sol.pivots)
    if sol.status != "optimal":
        raise InternalError(f"fair LP reported {sol.status}")
    x, y = sol.as_xy(instance)
    if objective.threshold_mode:
        value = tau
    else:
        d = instance.d_lp
        value = math.fsum(float(d[i, j]) * float(x[i, j])
                          for i, j in lp.x_index)
        if objective.uses_open_costs:
            value += math.fsum(float(instance.open_costs[i]) * float(y[i])
                               for i in range(instance.m))
    return FairLpResult("optimal", x, y, value, tau, rounds=1,
                        pivots=sol.pivots, active_cols=allowed)


def _packing_bound(instance: Instance) -> float:
    """Radius below which no k centers can cover all points: grow a
    farthest-first set of k+1 points; any center within tau of two of them
    needs them within 2*tau of each other, so tau* >= closest pair / 2."""
    d = instance.d_pp
    n, k = instance.n, instance.k
    if k + 1 > n:
        return 0.0
    picked = [0]
    near = d[0].copy()
    for _ in range(k):
        far = int(np.argmax(near))
        picked.append(far)
        np.minimum(near, d[far], out=near)
    sub = d[np.ix_(picked, picked)]
    closest = np.min(sub[np.triu_indices(len(picked), 1)])
    return float(closest) / 2.0


def min_feasible_threshold(instance: Instance, objective: Objective,
                           fairness: FairnessSpec,
                           engine: str | None = None):
    """Smallest candidate radius whose fair LP is feasible, by binary search
    over the sorted distinct center-point distances.

    Returns (tau_star, FairLpResult at tau_star).  Feasibility is monotone
    in tau (larger tau only adds variables); the probe log is checked for
    consistency with that.
    """
    cands = threshold_candidates(instance)
    probes = {}

    def probe(idx: int) -> FairLpResult:
        if idx not in probes:
            probes[idx] = solve_fair_lp(instance, objective, fairness,
                                        tau=float(cands[idx]),
                                        feasibility_only=True, engine=engine)
        return probes[idx]

    # no radius below the largest nearest-center distance can cover all
    # points, so the search starts there; a k+1 packing bound prunes more
    floor_tau = max(float(instance.d_lp.min(axis=0).max()),
                    _packing_bound(instance))
    lo = int(np.searchsorted(cands, floor_tau - 1e-12))
    hi = len(cands) - 1
    if probe(hi).status != "optimal":
        raise InternalError("fair LP infeasible at the maximum radius")
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(mid).status == "optimal":
            hi = mid
        else:
            lo = mid + 1
    feas = [cands[i] for i, r in probes.items() if r.status == "optimal"]
    infeas = [cands[i] for i, r in probes.items() if r.status != "optimal"]
    if infeas and feas and max(infeas) >= min(feas):
        raise InternalError("threshold feasibility is not monotone")
    sol = probe(hi)
    sol.value = float(cands[hi])
    return float(cands[hi]), sol


# ---------------------------------------------------------------------------
# fixed-centers LP with exact ratio rows (the 5- and 7-approximation core)


def build_exact_ratio_lp(instance: Instance, centers, graph: ThresholdGraph,
                         base: int, per_color) -> LinearProgram:
    """Fractional assignment onto fixed centers where every center's color
    masses sit in exact global proportion, with a minimum of per_color[h]
    mass arriving from within two hops.

    Support: x[i, j] exists when point j is within three hops of center i
    (four in the bipartite location setting).  Feasibility-only.
    """
    n, g = instance.n, instance.n_colors
    hops = graph.hops()
    near_t = 3 if graph.kind == "points" else 4
    close_t = 2
    var_names, x_index = [], {}
    centers = list(centers)
    for i in centers:
        for j in range(n):
            if 1 <= hops[i, j] <= near_t or i == j:
                x_index[(i, j)] = len(var_names)
                var_names.append(f"x_{i}_{j}")
    nv = len(var_names)
    rows = []
    for j in range(n):
        coeffs = {x_index[(i, j)]: 1.0 for i in centers if (i, j) in x_index}
        rows.append((coeffs, EQ, 1.0, ("assign", j)))
    for i in centers:
        served = [j for j in range(n) if (i, j) in x_index]
        for h in range(g):
            q_h = per_color[h]
            ratio_row = {}
            near_row = {}
            for j in served:
                v = x_index[(i, j)]
                hj = instance.colors[j] == h
                ratio_row[v] = (base if hj else 0) - q_h
                if hj and (hops[i, j] <= close_t):
                    near_row[v] = 1.0
            rows.append((ratio_row, EQ, 0.0, ("ratio", i, h)))
            rows.append((near_row, GE, float(q_h), ("near", i, h)))
    return LinearProgram(
        n_vars=nv, var_names=var_names, lower=np.zeros(nv),
        upper=[None] * nv, rows=rows, objective=np.zeros(nv),
        x_index=x_index, y_index={},
        meta={"kind": "exact_ratio", "tau": graph.tau, "centers": centers},
    )


# ---------------------------------------------------------------------------
# text dump


def lp_dump(lp: LinearProgram) -> str:
    """LP in the CPLEX text format."""

    def term(coeff, name, first):
        sign = "-" if coeff < 0 else ("" if first else "+")
        mag = abs(coeff)
        body = name if mag == 1 else f"{mag:.12g} {name}"
        return f"{sign} {body}" if sign and not first else (
            f"-{body}" if sign else body
        )

    out = ["Minimize", " obj:"]
    terms = []
    for v in np.flatnonzero(lp.objective):
        terms.append(term(float(lp.objective[v]), lp.var_names[v],
                          not terms))
    if terms:
        out[-1] = " obj: " + " ".join(terms)
    out.append("Subject To")
    for idx, (coeffs, rel, rhs, tag) in enumerate(lp.rows):
        name = "_".join(str(t) for t in tag) or f"r{idx}"
        terms = []
        for v in sorted(coeffs):
            if coeffs[v] != 0:
                terms.append(term(float(coeffs[v]), lp.var_names[v],
                                  not terms))
        lhs = " ".join(terms) if terms else "0 " + lp.var_names[0]
        out.append(f" {name}: {lhs} {rel} {rhs:.12g}")
    out.append("Bounds")
    for v, name in enumerate(lp.var_names):
        up = lp.upper[v]
        if up is None:
            out.append(f" 0 <= {name}")
        else:
            out.append(f" 0 <= {name} <= {up:.12g}")
    out.append("End")
    return "\n".join(out) + "\n"
