"""Dense-tableau primal simplex for LPs with bounded variables.

Solves  min c.x  s.t.  A x (<=, >=, ==) b,  lb <= x <= ub.
Nonbasic columns sit at one of their bounds; a two-phase scheme with
artificial columns finds the first feasible basis. Dantzig pricing is used
until a run of degenerate pivots is seen, then Bland's rule takes over
until the objective moves again.

``BoundedLP`` is a dual simplex for the case where every structural
variable has finite bounds (always true for ``MilpModel``). Its all-slack
starting basis is dual feasible, and an optimal basis can be handed back in
after bounds change, which is what branch-and-bound does at every node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
DCOST_TOL = 1e-9
WEAK_PIVOT = 1e-10
DEGENERATE_RUN = 30
REFACTOR_EVERY = 100


@dataclass
class LPResult:
    x: np.ndarray | None
    value: float | None
    status: str  # optimal | infeasible | unbounded | numerical
    iterations: int = 0
    weak_pivot: bool = False
    basis: np.ndarray | None = None
    at_upper: np.ndarray | None = None
    tableau: object = None  # final tableau, reusable by a child LP


class _Tableau:
    def __init__(self, A, b, lo, hi, basis, at_upper):
        self.A = A  # original columns, kept for refactorization
        self.b = b
        self.lo = lo
        self.hi = hi
        self.basis = basis
        self.at_upper = at_upper
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0
        self.weak_pivot = False
        self.since_refactor = 0
        self.refactor()

    def nonbasic_values(self):
        x = np.where(self.at_upper, self.hi, self.lo)
        x[self.is_basic] = 0.0
        return x

    def refactor(self):
        Binv = np.linalg.inv(self.A[:, self.basis])
        rhs = self.b - self.A @ self.nonbasic_values()
        self.T = Binv @ self.A
        self.beta = Binv @ rhs
        self.since_refactor = 0

    def values(self):
        x = self.nonbasic_values()
        x[self.basis] = self.beta
        return x

    def run(self, cost, max_iter):
        T = self.T
        d = cost - cost[self.basis] @ T
        degenerate = 0
        bland = False
        since_refactor = 0
        while True:
            if self.iterations >= max_iter:
                return "numerical"
            cand = ~self.is_basic & (((~self.at_upper) & (d < -DCOST_TOL)) | (self.at_upper & (d > DCOST_TOL)))
            cand &= self.hi > self.lo
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            j = idx[0] if bland else idx[np.argmax(np.abs(d[idx]))]
            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = direction * T[:, j]
            beta = self.beta
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]

            ratios = np.full(alpha.shape, np.inf)
            dec = alpha > PIVOT_TOL
            inc = alpha < -PIVOT_TOL
            ratios[dec] = np.maximum(beta[dec] - lo_b[dec], 0.0) / alpha[dec]
            with np.errstate(invalid="ignore"):
                ratios[inc] = np.maximum(hi_b[inc] - beta[inc], 0.0) / -alpha[inc]
            t_row = ratios.min() if ratios.size else np.inf
            t_flip = self.hi[j] - self.lo[j]
            self.iterations += 1

            if t_flip <= t_row:
                if not np.isfinite(t_flip):
                    return "unbounded"
                self.beta = beta - t_flip * alpha
                self.at_upper[j] = not self.at_upper[j]
                degenerate = 0
                bland = False
                continue
            if not np.isfinite(t_row):
                return "unbounded"

            ties = np.flatnonzero(ratios <= t_row + 1e-12)
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(np.abs(alpha[ties]))]
            piv = T[r, j]
            if abs(piv) < WEAK_PIVOT:
                self.weak_pivot = True

            leaving = self.basis[r]
            entering_value = (self.hi[j] if self.at_upper[j] else self.lo[j]) + direction * t_row
            self.beta = beta - t_row * alpha
            self.beta[r] = entering_value
            self.at_upper[leaving] = alpha[r] < 0
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[r] = j

            row = T[r] / piv
            col = T[:, j].copy()
            col[r] = 0.0
            T -= np.outer(col, row)
            T[r] = row
            d = d - d[j] * row

            if t_row <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                T = self.T
                d = cost - cost[self.basis] @ T
                since_refactor = 0


    def dual_run(self, cost, max_iter, tol):
        """Dual simplex iterations from a dual-feasible basis; returns a status."""
        T = self.T
        d = cost - cost[self.basis] @ T
        lo, hi = self.lo, self.hi
        movable = hi > lo
        while True:
            if self.iterations >= max_iter:
                return "numerical"
            lo_b = lo[self.basis]
            hi_b = hi[self.basis]
            scale = tol * (1.0 + np.abs(self.beta))
            below = lo_b - self.beta
            above = self.beta - hi_b
            viol = np.maximum(below, above) - scale
            r = int(np.argmax(viol))
            if viol[r] <= 0.0:
                return "optimal"
            row = T[r]
            free = movable & ~self.is_basic
            up = below[r] > above[r]
            if up:
                elig = free & ((~self.at_upper & (row < -PIVOT_TOL)) | (self.at_upper & (row > PIVOT_TOL)))
                target = lo_b[r]
            else:
                elig = free & ((~self.at_upper & (row > PIVOT_TOL)) | (self.at_upper & (row < -PIVOT_TOL)))
                target = hi_b[r]
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return "infeasible"
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            tmin = ratios.min()
            ties = idx[ratios <= tmin + 1e-12]
            j = ties[np.argmax(np.abs(row[ties]))]
            piv = row[j]
            if abs(piv) < WEAK_PIVOT:
                self.weak_pivot = True
            self.iterations += 1
            delta = (self.beta[r] - target) / piv
            entering_value = (hi[j] if self.at_upper[j] else lo[j]) + delta
            leaving = self.basis[r]
            col = T[:, j].copy()
            self.beta = self.beta - col * delta
            self.beta[r] = entering_value
            self.at_upper[leaving] = not up
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[r] = j
            prow = row / piv
            col[r] = 0.0
            T -= np.outer(col, prow)
            T[r] = prow
            d = d - d[j] * prow
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
                T = self.T
                d = cost - cost[self.basis] @ T


class BoundedLP:
    """min c.x  s.t.  A x + s = b, lb <= x <= ub, slack bounds from the row senses."""

    def __init__(self, c, A, senses, b, tol=1e-9):
        c = np.asarray(c, dtype=float)
        A = np.asarray(A, dtype=float).reshape(-1, c.size)
        m, n = A.shape
        self.n, self.m = n, m
        self.c = c
        self.A_full = np.hstack([A, np.eye(m)])
        self.cost = np.concatenate([c, np.zeros(m)])
        self.b = np.asarray(b, dtype=float)
        senses = np.asarray(senses, dtype=object)
        self.slo = np.where(senses == ">=", -np.inf, 0.0)
        self.shi = np.where(senses == "<=", np.inf, 0.0)
        self.ge = senses == ">="
        self.tol = tol

    def initial_basis(self):
        at_upper = np.concatenate([self.c < 0, self.ge])
        return np.arange(self.n, self.n + self.m), at_upper

    def solve(self, lb, ub, basis=None, at_upper=None, max_iter=None, tableau=None) -> LPResult:
        """Optimal LP over the box [lb, ub].

        Warm starts: ``basis``/``at_upper`` from an earlier solve, or that
        solve's ``tableau`` itself, which is then updated in place.
        """
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if np.any(lb > ub + 1e-9):
            return LPResult(None, None, "infeasible")
        if self.m == 0:
            x = np.where(self.c < 0, ub, lb)
            return LPResult(x, float(self.c @ x), "optimal")
        if basis is None:
            basis, at_upper = self.initial_basis()
        lo = np.concatenate([lb, self.slo])
        hi = np.concatenate([np.maximum(ub, lb), self.shi])
        if max_iter is None:
            max_iter = 20 * (self.m + self.n) + 200
        if tableau is not None:
            tab = tableau
            old = tab.nonbasic_values()
            tab.lo, tab.hi = lo, hi
            tab.iterations = 0
            tab.beta = tab.beta - tab.T @ (tab.nonbasic_values() - old)
        else:
            try:
                tab = _Tableau(self.A_full, self.b, lo, hi, np.array(basis), np.array(at_upper))
            except np.linalg.LinAlgError:
                return LPResult(None, None, "numerical")
        status = "numerical"
        for _ in range(3):
            status = tab.dual_run(self.cost, max_iter, self.tol)
            if status != "optimal":
                break
            # primal cleanup of small dual infeasibilities, then confirm after a refactor
            status = tab.run(self.cost, max_iter)
            if status != "optimal":
                break
            if tab.since_refactor > 20:
                tab.refactor()
            lo_b, hi_b = lo[tab.basis], hi[tab.basis]
            slack = 1e-7 * (1.0 + np.abs(tab.beta))
            if np.all(tab.beta >= lo_b - slack) and np.all(tab.beta <= hi_b + slack):
                break
            status = "numerical"
        if status != "optimal":
            return LPResult(None, None, status, tab.iterations, tab.weak_pivot)
        x = np.clip(tab.values()[: self.n], lb, ub)
        return LPResult(x, float(self.c @ x), "optimal", tab.iterations, tab.weak_pivot,
                        tab.basis.copy(), tab.at_upper.copy(), tab)


def solve_lp_arrays(c, A, senses, b, lb, ub, feas_tol=1e-7, max_iter=None) -> LPResult:
    """Minimize c.x over the box-bounded polyhedron; see module docstring."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return LPResult(np.zeros(0), 0.0, "optimal")
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(lb > ub + feas_tol):
        return LPResult(None, None, "infeasible")
    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, lb))
        return LPResult(x, float(c @ x), "optimal")

    x0 = lb.copy()
    resid = b - A @ x0

    # Column layout: structurals | one slack per inequality row | artificials.
    ineq = [i for i in range(m) if senses[i] != "=="]
    n_slack = len(ineq)
    slack_col = {}
    S = np.zeros((m, n_slack))
    for k, i in enumerate(ineq):
        S[i, k] = 1.0 if senses[i] == "<=" else -1.0
        slack_col[i] = n + k

    basis = np.empty(m, dtype=int)
    art_rows = []
    for i in range(m):
        if senses[i] == "<=" and resid[i] >= 0:
            basis[i] = slack_col[i]
        elif senses[i] == ">=" and resid[i] <= 0:
            basis[i] = slack_col[i]
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    R = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        R[i, k] = 1.0 if resid[i] >= 0 else -1.0
        basis[i] = n + n_slack + k

    A_full = np.hstack([A, S, R])
    N = A_full.shape[1]
    lo = np.concatenate([lb, np.zeros(n_slack), np.zeros(n_art)])
    hi = np.concatenate([ub, np.full(n_slack, np.inf), np.full(n_art, np.inf)])
    at_upper = np.zeros(N, dtype=bool)
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000

    tab = _Tableau(A_full, b, lo, hi, basis, at_upper)
    art_start = n + n_slack

    if n_art:
        cost1 = np.zeros(N)
        cost1[art_start:] = 1.0
        status = tab.run(cost1, max_iter)
        if status != "optimal":
            return LPResult(None, None, "numerical", tab.iterations, tab.weak_pivot)
        infeas = float(tab.values()[art_start:].sum())
        scale = 1.0 + float(np.abs(b).max(initial=0.0))
        if infeas > feas_tol * scale:
            return LPResult(None, None, "infeasible", tab.iterations, tab.weak_pivot)
        # Drive remaining artificials out of the basis, dropping redundant rows.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] < art_start:
                continue
            row = tab.T[r, :art_start]
            cand = np.flatnonzero((np.abs(row) > 1e-7) & ~tab.is_basic[:art_start])
            if cand.size == 0:
                keep[r] = False
                continue
            j = cand[np.argmax(np.abs(row[cand]))]
            leaving = tab.basis[r]
            piv = tab.T[r, j]
            prow = tab.T[r] / piv
            col = tab.T[:, j].copy()
            col[r] = 0.0
            tab.T -= np.outer(col, prow)
            tab.T[r] = prow
            # Degenerate pivot: entering keeps its bound value.
            val = tab.hi[j] if tab.at_upper[j] else tab.lo[j]
            tab.beta[r] = val
            tab.is_basic[leaving] = False
            tab.is_basic[j] = True
            tab.basis[r] = j
        rows = np.flatnonzero(keep)
        tab = _Tableau(A_full[np.ix_(rows, np.arange(art_start))], b[rows], lo[:art_start], hi[:art_start],
                       tab.basis[rows].copy(), tab.at_upper[:art_start].copy())
        tab.iterations = 0

    cost2 = np.zeros(tab.A.shape[1])
    cost2[:n] = c
    status = tab.run(cost2, max_iter)
    if status == "unbounded":
        return LPResult(None, None, "unbounded", tab.iterations, tab.weak_pivot)
    if status != "optimal":
        return LPResult(None, None, "numerical", tab.iterations, tab.weak_pivot)
    tab.refactor()
    x = tab.values()[:n]
    x = np.clip(x, lb, ub)
    return LPResult(x, float(c @ x), "optimal", tab.iterations, tab.weak_pivot)
