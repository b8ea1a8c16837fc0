"""Dense simplex with warm-started incremental extension.

SimplexProgram holds a linear program min c.x, A x {<=, >=, =} b, x >= 0
as mutable master data (rows as sparse coefficient dicts) plus, after a
solve, a dense tableau that later extensions reuse:

  * new variables append as priced-out tableau columns (B^-1 applied via
    the identity columns the tableau still carries);
  * new <= rows with nonnegative right-hand side append with their slack
    basic, followed by dual-simplex repair pivots, so the engine stays at
    an optimal basis without re-solving from scratch;
  * an infeasible program keeps its phase-1 tableau, so columns meant to
    shrink the infeasibility continue phase 1 instead of restarting it;
  * anything else (failed repair, pivot budgets, periodic refresh) falls
    back to a full two-phase solve of the master data.

Pricing is Dantzig (most negative reduced cost, lowest index on ties);
after BLAND_TRIGGER consecutive degenerate pivots the rule switches to
Bland's until the objective moves again, which breaks cycling.
Artificial columns never re-enter the basis once they leave.  Upper
bounds on variables are the caller's responsibility (add explicit rows).

Results carry row prices composed back through the internal row flips
and scaling, so that for any column a over the master rows, c_a -
duals . a is its reduced cost.  On "optimal" these are the optimal
prices; on "infeasible" they are phase-1 prices: duals . a > 0 marks
columns that could shrink the infeasibility, and none existing proves
the program infeasible under any column extension.

solve_dense is the one-shot wrapper around SimplexProgram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError, SimplexIterationError

LE, GE, EQ = "<=", ">=", "="

FEAS_TOL = 1e-7  # phase-1 residual below this counts as feasible
PIVOT_TOL = 1e-9
COST_TOL = 1e-9
PERT_EPS = 1e-10  # anti-degeneracy offset applied to zero right-hand sides
BLAND_TRIGGER = 500
MAX_PIVOTS = 10 ** 6
REFRESH_LIMIT = 120  # warm extensions between full refactorizing solves
DUAL_STEP_CAP = 5000

KIND_VAR, KIND_SLACK, KIND_ART = 0, 1, 2

STAGE_NONE, STAGE_PHASE1, STAGE_OPTIMAL = "none", "phase1", "optimal"


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    pivots: int = 0
    duals: np.ndarray | None = None


class SimplexProgram:
    """Incrementally extensible dense-tableau simplex program."""

    def __init__(self):
        self.nv = 0
        self.cost: list[float] = []
        self.rows: list = []  # (coeff dict var->float, rel, rhs)
        self.pert: list[float] = []  # per-row degenerate-rhs offset in [0,1)
        self._pert_rng = np.random.default_rng(2654435769)
        self.stage = STAGE_NONE  # which tableau the state holds, if any
        self.pivots = 0
        self._extensions = 0
        # tableau state (meaningful when stage != STAGE_NONE)
        self.T: np.ndarray | None = None
        self.basis: np.ndarray | None = None
        self.row_ids: np.ndarray | None = None
        self.col_var: np.ndarray | None = None  # var id per tableau col, -1 else
        self.col_kind: np.ndarray | None = None
        self.var_col: np.ndarray | None = None  # tableau col per var, -1 if none
        self.allowed: np.ndarray | None = None
        self.unit_col: dict = {}
        self.flip: list[float] = []
        self.scale: list[float] = []

    # -- master data -------------------------------------------------------

    def add_variables(self, costs, entries) -> list[int]:
        """Append variables; entries[k] maps master row index -> coefficient.
        Returns the new variable ids.  Use extend() to keep a solved
        tableau warm; calling this directly invalidates it."""
        ids = []
        for c_v, ent in zip(costs, entries):
            v = self.nv
            self.nv += 1
            self.cost.append(float(c_v))
            for r_idx, coeff in ent.items():
                self.rows[r_idx][0][v] = float(coeff)
            ids.append(v)
        if ids:
            self.stage = STAGE_NONE
        return ids

    def add_rows(self, specs) -> list[int]:
        """Append rows (coeffs dict, rel, rhs); returns master row indices.
        Use extend() to keep a solved tableau warm; calling this directly
        invalidates it."""
        ids = []
        for coeffs, rel, rhs in specs:
            self.rows.append(({int(v): float(cf) for v, cf in coeffs.items()},
                              rel, float(rhs)))
            self.pert.append(float(self._pert_rng.random()))
            ids.append(len(self.rows) - 1)
        if ids:
            self.stage = STAGE_NONE
        return ids

    # -- solving -----------------------------------------------------------

    def solve(self) -> SimplexResult:
        """Full two-phase solve of the master data from scratch."""
        return self._full_solve()

    def extend(self, var_costs, var_entries, row_specs) -> SimplexResult:
        """Add variables and <= rows, then re-optimize warm when possible.

        From an optimal tableau, new columns stay frozen while dual-simplex
        pivots absorb the new rows (the old column space was dual
        feasible), then unfreeze for the primal clean-up.  From a phase-1
        tableau left by an infeasible result, new columns join phase 1 and
        the feasibility search continues where it stopped.  Falls back to
        a full solve whenever warm conditions fail.
        """
        prior = self.stage
        warm = prior != STAGE_NONE and self._extensions < REFRESH_LIMIT
        warm = warm and all(
            rel == LE and rhs >= 0.0 for _c, rel, rhs in row_specs
        )
        new_vars = self.add_variables(var_costs, var_entries)
        new_rows = self.add_rows(row_specs)
        if not warm:
            return self._full_solve()
        self.stage = prior  # add_* cleared it; the tableau is still current
        self._extensions += 1
        phase1 = prior == STAGE_PHASE1
        new_cols = self._append_columns(new_vars, phase1=phase1)
        self._append_rows(new_rows)
        if not self._dual_repair():
            return self._full_solve()
        if new_cols:
            self.allowed[new_cols] = True
        budget = max(300, 2 * len(self.basis))
        status = self._primal_loop(budget=budget)
        if status == "budget":
            return self._full_solve()
        if phase1:
            return self._after_phase1(status)
        if status == "unbounded":
            self.stage = STAGE_NONE
            return SimplexResult("unbounded", pivots=self.pivots)
        return self._state_result()

    # -- tableau construction ---------------------------------------------

    def _full_solve(self) -> SimplexResult:
        self.stage = STAGE_NONE
        self._extensions = 0
        R, nv = len(self.rows), self.nv
        if R == 0:
            raise InternalError("a simplex program needs at least one row")
        A = np.zeros((R, nv))
        b = np.empty(R)
        rels = []
        for r, (coeffs, rel, rhs) in enumerate(self.rows):
            for v, cf in coeffs.items():
                A[r, v] = cf
            b[r] = rhs
            rels.append(rel)
        flip = np.ones(R)
        for r in range(R):
            if b[r] < 0 or (b[r] == 0 and rels[r] == GE):
                A[r] *= -1.0
                b[r] *= -1.0
                flip[r] = -1.0
                rels[r] = {LE: GE, GE: LE, EQ: EQ}[rels[r]]
        # row equilibration keeps tolerances meaningful across scales
        norms = np.maximum(1.0, np.abs(A).max(axis=1) if nv else np.ones(R))
        A /= norms[:, None]
        b /= norms
        # zero right-hand sides stall the ratio test in a degenerate vertex
        # cloud; a fixed per-row offset far below every decision tolerance
        # makes the minimum ratio essentially unique
        zero = b == 0.0
        if zero.any():
            b[zero] = PERT_EPS * (0.5 + np.asarray(self.pert)[zero])
        self.flip = list(flip)
        self.scale = list(norms)

        n_slack = sum(1 for r in rels if r != EQ)
        n_art = sum(1 for r in rels if r != LE)
        cols = nv + n_slack + n_art
        art_start = nv + n_slack
        T = np.zeros((R + 1, cols + 1))
        T[:R, :nv] = A
        T[:R, -1] = b
        basis = np.empty(R, dtype=int)
        unit = {}
        col_var = np.full(cols, -1, dtype=int)
        col_var[:nv] = np.arange(nv)
        col_kind = np.full(cols, KIND_VAR, dtype=np.int8)
        col_kind[nv:art_start] = KIND_SLACK
        col_kind[art_start:] = KIND_ART
        s = nv
        a = art_start
        for r, rel in enumerate(rels):
            if rel == LE:
                T[r, s] = 1.0
                basis[r] = s
                unit[r] = s
                s += 1
            elif rel == GE:
                T[r, s] = -1.0
                T[r, a] = 1.0
                basis[r] = a
                unit[r] = a
                s += 1
                a += 1
            else:
                T[r, a] = 1.0
                basis[r] = a
                unit[r] = a
                a += 1
        self.T = T
        self.basis = basis
        self.row_ids = np.arange(R)
        self.unit_col = unit
        self.col_var = col_var
        self.col_kind = col_kind
        self.var_col = np.arange(nv)
        self.allowed = np.ones(cols, dtype=bool)

        if n_art:
            # phase 1: minimize the artificial total
            T[-1, :] = 0.0
            for r in range(R):
                if basis[r] >= art_start:
                    T[-1] -= T[r]
            T[-1, art_start:cols] += 1.0
            status = self._primal_loop()
            return self._after_phase1(status)
        return self._enter_phase2()

    def _after_phase1(self, status: str) -> SimplexResult:
        infeas = -self.T[-1, -1]
        if status != "optimal" or infeas > FEAS_TOL:
            duals = self._read_duals(phase1=True)
            self.stage = STAGE_PHASE1  # keep the tableau for warm retries
            return SimplexResult("infeasible", pivots=self.pivots,
                                 duals=duals)
        self._drive_out_artificials()
        self.allowed[self.col_kind == KIND_ART] = False
        return self._enter_phase2()

    def _rhs_floor(self) -> np.ndarray:
        """Per-tableau-row lower clamp: structurally zero rows keep their
        anti-degeneracy offset, everything else floors at zero."""
        floor = np.zeros(len(self.basis))
        for r, master in enumerate(self.row_ids):
            if self.rows[master][2] == 0.0:
                floor[r] = PERT_EPS * (0.5 + self.pert[master])
        return floor

    def _enter_phase2(self) -> SimplexResult:
        T = self.T
        Rt = len(self.basis)
        T[:Rt, -1] = np.maximum(T[:Rt, -1], self._rhs_floor())
        T[-1, :] = 0.0
        cost = np.asarray(self.cost)
        if self.nv:
            valid = self.var_col >= 0
            T[-1, self.var_col[valid]] = cost[np.flatnonzero(valid)]
        for r in range(Rt):
            v = self.col_var[self.basis[r]]
            if v >= 0 and cost[v] != 0.0:
                T[-1] -= cost[v] * T[r]
        status = self._primal_loop()
        if status == "unbounded":
            self.stage = STAGE_NONE
            return SimplexResult("unbounded", pivots=self.pivots)
        self.stage = STAGE_OPTIMAL
        return self._state_result()

    def _drive_out_artificials(self):
        drop = []
        for r in range(len(self.basis)):
            if self.col_kind[self.basis[r]] != KIND_ART:
                continue
            row = self.T[r, :-1]
            cand = np.flatnonzero((np.abs(row) > PIVOT_TOL)
                                  & (self.col_kind != KIND_ART))
            if cand.size == 0:
                drop.append(r)  # redundant row
                continue
            self._pivot(r, int(cand[0]))
        if drop:
            self.T = np.delete(self.T, drop, axis=0)
            self.basis = np.delete(self.basis, drop)
            self.row_ids = np.delete(self.row_ids, drop)

    # -- pivoting ----------------------------------------------------------

    def _pivot(self, p: int, q: int):
        T = self.T
        piv = T[p, q]
        T[p] /= piv
        colv = T[:, q].copy()
        colv[p] = 0.0
        T -= np.outer(colv, T[p])
        T[:, q] = 0.0
        T[p, q] = 1.0
        leaving = self.basis[p]
        self.basis[p] = q
        if self.col_kind[leaving] == KIND_ART:
            self.allowed[leaving] = False

    def _primal_loop(self, budget: int | None = None) -> str:
        degen = 0
        bland = False
        steps = 0
        while True:
            T, allowed = self.T, self.allowed
            nrows = len(self.basis)
            obj = T[-1, :-1]
            if bland:
                neg = np.flatnonzero((obj < -COST_TOL) & allowed)
                if neg.size == 0:
                    return "optimal"
                q = int(neg[0])
            else:
                masked = np.where(allowed, obj, np.inf)
                q = int(np.argmin(masked))
                if masked[q] >= -COST_TOL:
                    return "optimal"
            col = T[:nrows, q]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(nrows, np.inf)
            ratios[pos] = T[:nrows, -1][pos] / col[pos]
            rmin = ratios.min()
            cand = np.flatnonzero(ratios <= rmin + 1e-12 + 1e-9 * abs(rmin))
            if bland:
                p = int(cand[np.argmin(self.basis[cand])])
            else:
                # largest pivot element among the ties; small pivots breed
                # roundoff that compounds across thousands of updates
                p = int(cand[np.argmax(col[cand])])
            steps += 1
            if budget is not None and steps > budget:
                return "budget"
            self.pivots += 1
            if self.pivots > MAX_PIVOTS:
                raise SimplexIterationError(f"pivot cap {MAX_PIVOTS} exceeded")
            self._pivot(p, q)
            if rmin <= 1e-12:
                degen += 1
                if degen >= BLAND_TRIGGER:
                    bland = True
            else:
                degen = 0
                bland = False

    def _dual_repair(self) -> bool:
        """Restore primal feasibility by dual-simplex pivots; requires a
        dual-feasible objective row over the allowed columns."""
        steps = 0
        while True:
            T = self.T
            nrows = len(self.basis)
            rhs = T[:nrows, -1]
            p = int(np.argmin(rhs))
            if rhs[p] >= -FEAS_TOL:
                T[:nrows, -1] = np.maximum(rhs, self._rhs_floor())
                return True
            row = T[p, :-1]
            elig = np.flatnonzero(self.allowed & (row < -PIVOT_TOL))
            if elig.size == 0:
                self.stage = STAGE_NONE  # primal infeasible at this row
                return False
            steps += 1
            if steps > DUAL_STEP_CAP:
                self.stage = STAGE_NONE
                return False
            obj = T[-1, :-1]
            ratios = obj[elig] / (-row[elig])
            rmin = float(ratios.min())
            tie = np.flatnonzero(ratios <= rmin + 1e-12 + 1e-9 * abs(rmin))
            # favor the largest pivot magnitude among the tied columns
            q = int(elig[tie[np.argmax(-row[elig[tie]])]])
            self.pivots += 1
            if self.pivots > MAX_PIVOTS:
                raise SimplexIterationError(f"pivot cap {MAX_PIVOTS} exceeded")
            self._pivot(p, q)

    # -- warm extensions ---------------------------------------------------

    def _append_columns(self, var_ids, phase1: bool = False) -> list[int]:
        """Append priced-out tableau columns for the given variables; they
        start frozen (allowed False) until row repair finishes.  In a
        phase-1 tableau the objective row prices against the artificial
        costs (variables cost zero there)."""
        if not var_ids:
            return []
        T = self.T
        Rt = len(self.basis)
        K = len(var_ids)
        raw = np.zeros((Rt, K))
        pos_of_var = {v: kk for kk, v in enumerate(var_ids)}
        for r in range(Rt):
            master = int(self.row_ids[r])
            coeffs = self.rows[master][0]
            f_s = self.flip[master] / self.scale[master]
            for v, kk in pos_of_var.items():
                cf = coeffs.get(v)
                if cf is not None:
                    raw[r, kk] = cf * f_s
        binv = T[:Rt, [self.unit_col[int(m)] for m in self.row_ids]]
        tab_cols = binv @ raw
        if phase1:
            cost_b = (self.col_kind[self.basis] == KIND_ART).astype(float)
            own = np.zeros(K)
        else:
            cost_arr = np.asarray(self.cost)
            bvars = self.col_var[self.basis]
            cost_b = np.where(bvars >= 0, cost_arr[np.maximum(bvars, 0)], 0.0)
            own = cost_arr[list(var_ids)]
        reduced = own - cost_b @ tab_cols
        block = np.vstack([tab_cols, reduced[None, :]])
        c0 = T.shape[1] - 1
        self.T = np.hstack([T[:, :c0], block, T[:, c0:]])
        new_cols = list(range(c0, c0 + K))
        self.col_var = np.append(self.col_var,
                                 np.asarray(var_ids, dtype=int))
        self.col_kind = np.append(self.col_kind,
                                  np.full(K, KIND_VAR, dtype=np.int8))
        grow = self.nv - len(self.var_col)
        if grow > 0:
            self.var_col = np.append(self.var_col,
                                     np.full(grow, -1, dtype=int))
        self.var_col[np.asarray(var_ids, dtype=int)] = np.asarray(
            new_cols, dtype=int)
        self.allowed = np.append(self.allowed, np.zeros(K, dtype=bool))
        return new_cols

    def _append_rows(self, row_ids):
        """Append <= rows with nonnegative rhs; each arrives with its
        slack basic, negative tableau rhs left to _dual_repair."""
        if not row_ids:
            return
        T = self.T
        Rt = len(self.basis)
        c0 = T.shape[1] - 1
        K = len(row_ids)
        a_ext = np.zeros((K, c0))
        rhs = np.empty(K)
        for kk, master in enumerate(row_ids):
            coeffs, _rel, b_r = self.rows[master]
            s = max(1.0, max((abs(cf) for cf in coeffs.values()),
                             default=1.0))
            self.flip.append(1.0)
            self.scale.append(s)
            for v, cf in coeffs.items():
                col = self.var_col[v]
                if col < 0:
                    raise InternalError(
                        "row references a variable missing from the tableau")
                a_ext[kk, col] = cf / s
            rhs[kk] = b_r / s
            if rhs[kk] == 0.0:
                rhs[kk] = PERT_EPS * (0.5 + self.pert[master])
        a_basic = a_ext[:, self.basis]  # (K, Rt)
        t_rows = a_ext - a_basic @ T[:Rt, :c0]
        t_rhs = rhs - a_basic @ T[:Rt, -1]
        new_T = np.zeros((Rt + K + 1, c0 + K + 1))
        new_T[:Rt, :c0] = T[:Rt, :c0]
        new_T[:Rt, -1] = T[:Rt, -1]
        new_T[Rt:Rt + K, :c0] = t_rows
        new_T[Rt:Rt + K, c0:c0 + K] = np.eye(K)
        new_T[Rt:Rt + K, -1] = t_rhs
        new_T[-1, :c0] = T[-1, :c0]
        new_T[-1, -1] = T[-1, -1]
        self.T = new_T
        for kk, master in enumerate(row_ids):
            col = c0 + kk
            self.basis = np.append(self.basis, col)
            self.row_ids = np.append(self.row_ids, master)
            self.unit_col[int(master)] = col
        self.col_var = np.append(self.col_var, np.full(K, -1, dtype=int))
        self.col_kind = np.append(self.col_kind,
                                  np.full(K, KIND_SLACK, dtype=np.int8))
        self.allowed = np.append(self.allowed, np.ones(K, dtype=bool))

    # -- result extraction -------------------------------------------------

    def _read_duals(self, phase1: bool = False) -> np.ndarray:
        y = np.zeros(len(self.rows))
        for r in range(len(self.basis)):
            master = int(self.row_ids[r])
            u = self.unit_col[master]
            base_cost = 1.0 if (phase1
                                and self.col_kind[u] == KIND_ART) else 0.0
            y[master] = ((base_cost - self.T[-1, u])
                         * self.flip[master] / self.scale[master])
        return y

    def _state_result(self) -> SimplexResult:
        x = np.zeros(self.nv)
        for r in range(len(self.basis)):
            v = self.col_var[self.basis[r]]
            if v >= 0:
                x[v] = self.T[r, -1]
        obj = float(np.dot(np.asarray(self.cost), x))
        return SimplexResult("optimal", x, obj, self.pivots,
                             self._read_duals())


def solve_dense(c, A, rels, b, feasibility_only: bool = False,
                max_pivots: int = MAX_PIVOTS,
                want_duals: bool = False) -> SimplexResult:
    """Solve min c.x, A x (rels) b, x >= 0.  `A` is (R, n) dense, `rels` a
    sequence drawn from {"<=", ">=", "="}.  With feasibility_only the
    objective is ignored and any feasible point is returned."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if A.ndim != 2:
        A = A.reshape((0, len(c)))
    R = A.shape[0]
    n = len(c)
    if R == 0:
        if feasibility_only or np.all(c >= -COST_TOL):
            return SimplexResult("optimal", np.zeros(n), 0.0, 0,
                                 np.zeros(0) if want_duals else None)
        return SimplexResult("unbounded")
    prog = SimplexProgram()
    prog.add_variables(np.zeros(n) if feasibility_only else c,
                       [{} for _ in range(n)])
    prog.add_rows([
        ({int(v): float(A[r, v]) for v in np.flatnonzero(A[r])},
         rels[r], float(b[r]))
        for r in range(R)
    ])
    res = prog.solve()
    if res.status == "optimal":
        res.objective = 0.0 if feasibility_only else float(c @ res.x)
    if not want_duals:
        res.duals = None
    if res.pivots > max_pivots:
        raise SimplexIterationError(f"pivot cap {max_pivots} exceeded")
    return res
