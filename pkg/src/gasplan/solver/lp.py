"""Dense bounded-variable dual simplex.

Every row gets a slack whose box is implied by the variable bounds, so any
basis can be made dual feasible by parking each nonbasic variable at the bound
matching the sign of its reduced cost. The solver therefore only needs the
dual simplex: start from the slack basis (or a parent basis in branch and
bound) and pivot until the basic values fit their boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# variables with an infinite bound are boxed at this magnitude; an optimum
# sitting on such a box is reported as unbounded
_BIG = 1e7


@dataclass
class LpProblem:
    """``min c^T x  s.t.  A x (senses) b,  lb <= x <= ub``."""

    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, len(self.c))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.asarray(self.ub, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        m, n = self.A.shape
        if len(self.b) != m or len(self.senses) != m:
            raise ValueError("A, b and senses disagree on the number of rows")
        if len(self.lb) != n or len(self.ub) != n:
            raise ValueError("bounds must have one entry per variable")
        if any(s not in ("L", "G", "E") for s in self.senses):
            raise ValueError("senses must be 'L', 'G' or 'E'")


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float = float("nan")
    iterations: int = 0
    basis: "Basis | None" = None


@dataclass
class Basis:
    columns: np.ndarray
    at_upper: np.ndarray = field(repr=False)


def _scaled(prob: LpProblem) -> LpProblem:
    """Copy of ``prob`` with rows and columns equilibrated by their largest entries.

    Rows are divided by their max, then columns, then rows again. Column
    ``j`` of the copy works in units ``x_j * col_scale[j]``.
    """
    A = prob.A
    if not A.size:
        out = LpProblem(prob.c, A, prob.senses, prob.b, prob.lb, prob.ub)
        out.row_scale, out.col_scale = np.ones(len(prob.b)), np.ones(len(prob.c))
        return out

    def maxabs(M, axis):
        norms = np.max(np.abs(M), axis=axis)
        return np.where(norms > 0, norms, 1.0)

    r1 = maxabs(A, 1)
    A = A / r1[:, None]
    col = maxabs(A, 0)
    A = A / col
    r2 = maxabs(A, 1)
    A = A / r2[:, None]
    rows = r1 * r2
    out = LpProblem(prob.c / col, A, prob.senses, prob.b / rows, prob.lb * col, prob.ub * col)
    out.row_scale, out.col_scale = rows, col
    return out


def _slack_bounds(A, senses, b, lb, ub, tol):
    pos = np.clip(A, 0, None)
    neg = np.clip(A, None, 0)
    min_act = pos @ lb + neg @ ub
    max_act = pos @ ub + neg @ lb
    m = len(b)
    slo = np.zeros(m)
    sup = np.zeros(m)
    for i, s in enumerate(senses):
        if s == "L":
            sup[i] = b[i] - min_act[i]
        elif s == "G":
            slo[i] = b[i] - max_act[i]
    # rows that cannot be met even at the extreme of the box
    bad = (sup < -tol * (1 + np.abs(b))) | (slo > tol * (1 + np.abs(b)))
    sup = np.maximum(sup, 0.0)
    slo = np.minimum(slo, 0.0)
    return slo, sup, bad


class _Revised:
    """Bounded-variable simplex state with an explicit dense basis inverse."""

    def __init__(self, prob: LpProblem, tol: float):
        self.tol = tol
        A = prob.A
        m, n = A.shape
        self.m, self.n = m, n
        lb = prob.lb.copy()
        ub = prob.ub.copy()
        self.artificial = np.zeros(n + m, dtype=bool)
        self.artificial[:n] = ~np.isfinite(lb) | ~np.isfinite(ub)
        lb[~np.isfinite(lb)] = -_BIG
        ub[~np.isfinite(ub)] = _BIG
        slo, sup, bad = _slack_bounds(A, prob.senses, prob.b, lb, ub, tol)
        self.row_infeasible = bool(np.any(bad))
        self.lo = np.r_[lb, slo]
        self.up = np.r_[ub, sup]
        self.fixed = self.up - self.lo <= 0.0
        self.A = A
        self.b = prob.b.copy()
        self.cost = np.r_[prob.c, np.zeros(m)]

    def column(self, q):
        if q < self.n:
            return self.A[:, q]
        e = np.zeros(self.m)
        e[q - self.n] = 1.0
        return e

    def row_of(self, r):
        """Row ``r`` of ``B^-1 [A I]``."""
        rho = self.Binv[r]
        return np.r_[rho @ self.A, rho]

    def _repair(self, basis):
        """Swap dependent structural columns for slacks until the basis is regular."""
        from scipy.linalg import qr

        n, m = self.n, self.m
        S = basis[basis < n]
        slack_rows = basis[basis >= n] - n
        free_rows = np.setdiff1d(np.arange(m), slack_rows)
        block = self.A[np.ix_(free_rows, S)]
        _, R, cols = qr(block, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-9 * max(1.0, diag[0] if len(diag) else 1.0)))
        keep = S[np.sort(cols[:rank])]
        _, R2, rows = qr(self.A[np.ix_(free_rows, keep)].T, mode="economic", pivoting=True)
        covered = free_rows[rows[:rank]]
        new_slacks = np.setdiff1d(free_rows, covered) + n
        return np.r_[keep, slack_rows + n, new_slacks].astype(int)

    def factor(self, basis_cols, at_upper, repair: bool = True):
        basis = np.array(basis_cols, dtype=int)
        m, n = self.m, self.n
        if len(basis) != m or len(np.unique(basis)) != m:
            raise np.linalg.LinAlgError("not a basis")
        structural = basis < n
        S = basis[structural]
        slack_rows = basis[~structural] - n
        free_rows = np.setdiff1d(np.arange(m), slack_rows)
        # B has identity columns for the slack rows, so only the block of
        # structural columns on the remaining rows needs inverting
        try:
            K = np.linalg.inv(self.A[np.ix_(free_rows, S)]) if len(S) else np.zeros((0, 0))
            if not np.all(np.isfinite(K)):
                raise np.linalg.LinAlgError("singular basis")
        except np.linalg.LinAlgError:
            if not repair:
                raise
            return self.factor(self._repair(basis), at_upper, repair=False)
        Binv = np.zeros((m, m))
        pos_struct = np.flatnonzero(structural)
        pos_slack = np.flatnonzero(~structural)
        Binv[np.ix_(pos_struct, free_rows)] = K
        Binv[pos_slack, slack_rows] = 1.0
        if len(S):
            Binv[np.ix_(pos_slack, free_rows)] = -(self.A[np.ix_(slack_rows, S)] @ K)
        self.Binv = Binv
        self.basis = basis
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[basis] = True
        y = self.cost[basis] @ Binv
        self.d = self.cost - np.r_[self.A.T @ y, y]
        self.d[basis] = 0.0
        self.at_upper = np.array(at_upper, dtype=bool)
        # dual feasibility by bound choice
        self.at_upper[self.d < -self.tol] = True
        self.at_upper[self.d > self.tol] = False
        self.at_upper[self.is_basic] = False

    def nonbasic_values(self):
        x = np.where(self.at_upper, self.up, self.lo)
        x[self.is_basic] = 0.0
        return x

    def basic_values(self, xn=None):
        xn = self.nonbasic_values() if xn is None else xn
        return self.Binv @ (self.b - self.A @ xn[: self.n] - xn[self.n :])

    def full_solution(self):
        x = self.nonbasic_values()
        x[self.basis] = self.basic_values(x)
        return x

    def duals(self):
        return self.cost[self.basis] @ self.Binv

    def pivot(self, r, q, alpha, check: bool = True):
        """Exchange basis position ``r`` for column ``q``; returns the leaving column.

        ``self.drift`` records the mismatch between the pivot element seen by
        the row and by the column computation, a cheap accuracy signal.
        """
        col = self.Binv @ self.column(q)
        piv = col[r]
        self.drift = abs(piv - alpha[q]) / max(1.0, abs(piv))
        if check and (abs(piv) < 1e-11 or self.drift > 1e-3):
            return None  # row and column disagree: caller refactors first
        self.Binv[r] /= piv
        col[r] = 0.0
        self.Binv -= np.outer(col, self.Binv[r])
        self.d -= (self.d[q] / alpha[q]) * alpha
        self.d[q] = 0.0
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.at_upper[q] = False
        return leaving


def solve_lp(
    prob: LpProblem,
    basis: Basis | None = None,
    *,
    tol: float = 1e-9,
    max_iter: int = 50_000,
    refactor_every: int = 100,
    _restarts: int = 0,
) -> LpResult:
    """Solve an LP by the bounded dual simplex; optionally warm-start from ``basis``.

    Pivot choice: the most infeasible basic variable leaves and the entering
    variable comes from a two-pass Harris ratio test: among candidates whose
    ratio is within ``tol`` of the smallest, the largest pivot wins. After a
    run of pivots without dual progress the rule switches to Bland's (lowest
    indices) until progress resumes.
    """
    scaled = _scaled(prob)
    tab = _Revised(scaled, tol)
    if tab.row_infeasible:
        return LpResult("infeasible")
    m, n = tab.m, tab.n
    if basis is None:
        cols = np.arange(n, n + m)
        at_upper = np.zeros(n + m, dtype=bool)
    else:
        cols, at_upper = basis.columns, basis.at_upper
    try:
        tab.factor(cols, at_upper)
    except np.linalg.LinAlgError:
        tab.factor(np.arange(n, n + m), np.zeros(n + m, dtype=bool))

    piv_tol = 1e-7
    stall = 0
    bland = False
    last_obj = -np.inf
    since_factor = 0
    it = 0
    for it in range(1, max_iter + 1):
        xB = tab.basic_values()
        lo_B = tab.lo[tab.basis]
        up_B = tab.up[tab.basis]
        scale = 1.0 + np.abs(xB)
        below = (lo_B - xB) / scale
        above = (xB - up_B) / scale
        viol = np.maximum(below, above)
        if np.max(viol, initial=0.0) <= tol:
            break
        if bland:
            r = int(np.argmin(np.where(viol > tol, tab.basis, n + m + 1)))
        else:
            r = int(np.argmax(viol))
        row = tab.row_of(r)
        increase = below[r] > tol
        eligible = ~tab.is_basic & ~tab.fixed
        if increase:
            cand = eligible & ((~tab.at_upper & (row < -piv_tol)) | (tab.at_upper & (row > piv_tol)))
        else:
            cand = eligible & ((~tab.at_upper & (row > piv_tol)) | (tab.at_upper & (row < -piv_tol)))
        idx = np.flatnonzero(cand)
        if len(idx) == 0:
            if since_factor:
                # confirm on a fresh factorization before declaring infeasibility
                tab.factor(tab.basis, tab.at_upper)
                since_factor = 0
                continue
            tiny = eligible & (np.abs(row) > 1e-11)
            if increase:
                tiny &= (~tab.at_upper & (row < 0)) | (tab.at_upper & (row > 0))
            else:
                tiny &= (~tab.at_upper & (row > 0)) | (tab.at_upper & (row < 0))
            idx = np.flatnonzero(tiny)
            if len(idx) == 0:
                return LpResult("infeasible", iterations=it)
        alpha = np.abs(row[idx])
        dj = np.abs(tab.d[idx])
        if bland:
            ratios = dj / alpha
            best = ratios.min()
            q = int(idx[ratios <= best + 1e-12].min())
        else:
            # Harris two-pass test: relax the bound by the dual tolerance,
            # then take the largest pivot among the admissible candidates
            bound = np.min((dj + tol) / alpha)
            ok = dj / alpha <= bound
            q = int(idx[ok][np.argmax(alpha[ok])])
        leave_upper = not increase
        leaving = tab.pivot(r, q, row, check=since_factor > 0)
        if leaving is None:
            tab.factor(tab.basis, tab.at_upper)
            since_factor = 0
            continue
        tab.at_upper[leaving] = leave_upper

        since_factor += 1
        if since_factor >= refactor_every or tab.drift > 1e-7:
            tab.factor(tab.basis, tab.at_upper)
            since_factor = 0
        obj = tab.cost @ tab.full_solution()
        if obj > last_obj + 1e-12 * (1 + abs(obj)):
            stall = 0
            bland = False
            last_obj = obj
        else:
            stall += 1
            if stall > 50:
                bland = True
    else:
        return LpResult("iteration_limit", iterations=it)

    # clean refactor before reporting
    tab.factor(tab.basis, tab.at_upper)
    xB = tab.basic_values()
    viol = np.maximum(tab.lo[tab.basis] - xB, xB - tab.up[tab.basis]) / (1.0 + np.abs(xB))
    if np.max(viol, initial=0.0) > 10 * tol:
        # lost feasibility on refactor: continue from the fresh factorization
        if it >= max_iter:
            return LpResult("iteration_limit", iterations=it)
        if _restarts >= 2:
            # the warm path keeps landing on an ill-conditioned basis: start cold
            if basis is None or _restarts >= 3:
                return LpResult("iteration_limit", iterations=it)
            return solve_lp(prob, None, tol=tol, max_iter=max_iter - it, refactor_every=refactor_every, _restarts=3)
        return solve_lp(prob, Basis(tab.basis.copy(), tab.at_upper.copy()), tol=tol, max_iter=max_iter - it, refactor_every=refactor_every, _restarts=_restarts + 1)
    x_full = tab.full_solution()
    on_artificial = tab.artificial[:n] & (np.abs(np.abs(x_full[:n]) - _BIG) < 1.0)
    if np.any(on_artificial):
        return LpResult("unbounded", iterations=it)
    x = x_full[:n] / scaled.col_scale
    # nonbasic columns sit exactly on their original bounds
    nonbasic = ~tab.is_basic[:n]
    up_side = nonbasic & tab.at_upper[:n] & np.isfinite(prob.ub)
    lo_side = nonbasic & ~tab.at_upper[:n] & np.isfinite(prob.lb)
    x[up_side] = prob.ub[up_side]
    x[lo_side] = prob.lb[lo_side]

    y = tab.duals() / scaled.row_scale
    red = prob.c - prob.A.T @ y
    col, row = scaled.col_scale, scaled.row_scale
    lo = np.r_[tab.lo[:n] / col, tab.lo[n:] * row]
    up = np.r_[tab.up[:n] / col, tab.up[n:] * row]
    dual_obj = float(prob.b @ y)
    dual_obj += float(np.sum(np.minimum(red * lo[:n], red * up[:n])))
    dual_obj += float(np.sum(np.minimum(-y * lo[n:], -y * up[n:])))
    return LpResult(
        status="optimal",
        x=x,
        objective=float(prob.c @ x),
        duals=y,
        reduced_costs=red,
        dual_objective=dual_obj,
        iterations=it,
        basis=Basis(tab.basis.copy(), tab.at_upper.copy()),
    )
