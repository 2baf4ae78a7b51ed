"""Branch-and-bound over the bounded simplex, plus checking utilities."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MilpModel, MilpSolution, SolveConfig
from .simplex import BoundedLP, LPResult, solve_lp_arrays

log = logging.getLogger(__name__)


def _lp_with_fixings(c, A, senses, b, lb, ub, feas_tol):
    """LP over the free columns only; fixed columns are moved to the rhs."""
    free = lb < ub
    x = lb.copy()
    if not free.all():
        b = b - A[:, ~free] @ lb[~free]
        A = A[:, free]
    nz = np.any(A != 0.0, axis=1)
    if not nz.all():
        for i in np.flatnonzero(~nz):
            s, r = senses[i], b[i]
            if (s == "<=" and r < -feas_tol) or (s == ">=" and r > feas_tol) or (s == "==" and abs(r) > feas_tol):
                return LPResult(None, None, "infeasible")
        A, b, senses = A[nz], b[nz], senses[nz]
    res = solve_lp_arrays(c[free], A, senses, b, lb[free], ub[free], feas_tol=feas_tol * 0.1)
    if res.x is None:
        return res
    x[free] = res.x
    return LPResult(x, float(c @ x), res.status, res.iterations, res.weak_pivot)


def solve_lp(model: MilpModel, feas_tol: float = 1e-6) -> LPResult:
    """LP relaxation of ``model`` (integrality dropped), value in the model's sense."""
    c, A, senses, b, lb, ub, _ = model.to_arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    res = _lp_with_fixings(sign * c, A, senses, b, lb, ub, feas_tol)
    if res.x is None:
        return res
    value = float(c @ res.x) + model.objective.constant
    status = "numerical" if res.weak_pivot and res.status == "optimal" else res.status
    if status == "numerical":
        log.warning("LP solved with a pivot below 1e-10; precision may be degraded")
    return LPResult(res.x, value, status, res.iterations, res.weak_pivot)


def _most_fractional(x, integer, int_tol, priority=None):
    frac = np.abs(x - np.round(x))
    cand = integer & (frac > int_tol)
    if not cand.any():
        return None
    if priority is not None:
        cand &= priority == priority[cand].max()
    dist = np.where(cand, np.minimum(x - np.floor(x), np.ceil(x) - x), -1.0)
    return int(np.argmax(dist))  # argmax returns the lowest index on ties


def solve(model: MilpModel, cfg: SolveConfig | None = None) -> MilpSolution:
    """Best-bound branch-and-bound with a depth-first plunge on the floor child."""
    cfg = cfg or SolveConfig()
    start = time.perf_counter()
    c, A, senses, b, lb0, ub0, integer = model.to_arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    cmin = sign * c
    lb0 = lb0.copy()
    ub0 = ub0.copy()
    lb0[integer] = np.ceil(lb0[integer] - cfg.int_tol)
    ub0[integer] = np.floor(ub0[integer] + cfg.int_tol)

    prio = np.array(model.priority, dtype=float) if any(model.priority) else None
    prop = _Propagator(A, senses, b, integer) if cfg.propagate else None
    lp = BoundedLP(cmin, A, senses, b)

    def node_lp(lb, ub, warm):
        if isinstance(warm, tuple):
            res = lp.solve(lb, ub, *warm)
        else:
            res = lp.solve(lb, ub, tableau=warm)
        if res.status == "numerical":
            # cold two-phase solve as a fallback
            res = _lp_with_fixings(cmin, A, senses, b, lb, ub, cfg.feas_tol)
        return res

    incumbent = None
    inc_val = math.inf
    heap = []
    seq = 0
    nodes = 0
    status = None
    dive = (lb0, ub0, None)
    best_open = -math.inf

    while True:
        if dive is None:
            while heap and heap[0][0] >= inc_val - cfg.gap_tol:
                heapq.heappop(heap)
            if not heap:
                break
            best_open, _, lb, ub, warm = heapq.heappop(heap)
        else:
            lb, ub, warm = dive
            dive = None
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            status = "node-limit"
            break
        if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
            status = "time-limit"
            break
        nodes += 1
        if prop is not None:
            cut = (cmin, inc_val - cfg.gap_tol) if incumbent is not None else None
            lb, ub, ok = prop.run(lb, ub, cutoff=cut)
            if not ok:
                continue
        res = node_lp(lb, ub, warm)
        if res.x is None:
            if res.status == "numerical":
                log.warning("node LP failed numerically; node discarded")
            continue
        if res.value >= inc_val - cfg.gap_tol:
            continue
        x = res.x
        j = _most_fractional(x, integer, cfg.int_tol, prio)
        if j is None:
            cand = _polish(node_lp, cmin, lb, ub, integer, x, res)
            val = float(cmin @ cand)
            if val < inc_val:
                incumbent, inc_val = cand, val
            continue
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        seq += 1
        warm = (res.basis, res.at_upper) if res.basis is not None else None
        heapq.heappush(heap, (res.value, seq, up_lb, ub, warm))
        dive = (lb, down_ub, res.tableau)

    wall = time.perf_counter() - start
    if status is None:
        status = "optimal" if incumbent is not None else "infeasible"
    if incumbent is None:
        return MilpSolution(None, None, status, nodes, wall)
    obj = float(c @ incumbent) + model.objective.constant
    if status == "optimal":
        bound = obj
    else:
        open_bounds = [h[0] for h in heap] + [best_open]
        bound = sign * min(min(open_bounds), inc_val) + model.objective.constant
    return MilpSolution(incumbent, obj, status, nodes, wall, bound)


def _polish(node_lp, cmin, lb, ub, integer, x, res):
    """Snap integer columns and re-solve the continuous part for a clean point."""
    snapped = x.copy()
    snapped[integer] = np.round(x[integer])
    if not (~integer).any():
        return snapped
    lb2, ub2 = lb.copy(), ub.copy()
    lb2[integer] = ub2[integer] = snapped[integer]
    warm = (res.basis, res.at_upper) if res.basis is not None else None
    out = node_lp(lb2, ub2, warm)
    return out.x if out.x is not None else snapped


@dataclass
class Violation:
    kind: str  # bound | constraint | integrality
    name: str
    magnitude: float


def check(model: MilpModel, assignment, feas_tol: float = 1e-6, int_tol: float = 1e-6) -> list:
    """Every bound, row and integrality violation of ``assignment`` beyond tolerance."""
    x = np.asarray(assignment, dtype=float)
    out = []
    for i, name in enumerate(model.names):
        if x[i] < model.lb[i] - feas_tol:
            out.append(Violation("bound", name, model.lb[i] - x[i]))
        elif x[i] > model.ub[i] + feas_tol:
            out.append(Violation("bound", name, x[i] - model.ub[i]))
        if model.integer[i] and abs(x[i] - round(x[i])) > int_tol:
            out.append(Violation("integrality", name, abs(x[i] - round(x[i]))))
    for con in model.constraints:
        act = sum(v * x[k] for k, v in con.coefs.items())
        if con.sense == "<=":
            viol = act - con.rhs
        elif con.sense == ">=":
            viol = con.rhs - act
        else:
            viol = abs(act - con.rhs)
        if viol > feas_tol:
            out.append(Violation("constraint", con.name, viol))
    return out


class _Propagator:
    """Activity-based bound tightening over all rows at once."""

    def __init__(self, A, senses, b, integer):
        le, ge, eq = senses == "<=", senses == ">=", senses == "=="
        self.R = np.vstack([A[le], -A[ge], A[eq], -A[eq]])
        self.r = np.concatenate([b[le], -b[ge], b[eq], -b[eq]])
        self.integer = integer

    def run(self, lb, ub, tol=1e-9, max_passes=200, cutoff=None):
        R, r = self.R, self.r
        if cutoff is not None:
            R = np.vstack([R, cutoff[0][None, :]])
            r = np.append(r, cutoff[1])
        pos = R > 0
        neg = R < 0
        zero = ~(pos | neg)
        lb, ub = lb.copy(), ub.copy()
        integer = self.integer
        for _ in range(max_passes):
            lo_t = np.where(pos, R * lb, R * ub)
            lo_t[zero] = 0.0
            minact = lo_t.sum(axis=1)
            if np.any(minact > r + 1e-7 * (1 + np.abs(r))):
                return lb, ub, False
            resid = (r - minact)[:, None] + lo_t
            with np.errstate(divide="ignore", invalid="ignore"):
                implied = resid / R
            new_ub = np.where(pos, implied, np.inf).min(axis=0, initial=np.inf)
            new_lb = np.where(neg, implied, -np.inf).max(axis=0, initial=-np.inf)
            new_ub[integer] = np.floor(new_ub[integer] + 1e-7)
            new_lb[integer] = np.ceil(new_lb[integer] - 1e-7)
            tighter_ub = new_ub < ub - max(tol, 1e-9)
            tighter_lb = new_lb > lb + max(tol, 1e-9)
            # continuous bounds only move on meaningful progress
            tighter_ub &= integer | (new_ub < ub - 1e-6 * (1 + np.abs(ub)))
            tighter_lb &= integer | (new_lb > lb + 1e-6 * (1 + np.abs(lb)))
            if not (tighter_ub.any() or tighter_lb.any()):
                break
            ub = np.where(tighter_ub, new_ub, ub)
            lb = np.where(tighter_lb, new_lb, lb)
            if np.any(lb > ub + 1e-7):
                return lb, ub, False
            # clean up crossings within tolerance
            cross = lb > ub
            lb[cross] = ub[cross]
        return lb, ub, True


def propagate(model: MilpModel, lb=None, ub=None, tol: float = 1e-9, max_passes: int = 200):
    """Activity-based bound tightening with integer rounding.

    Returns ``(lb, ub, feasible)``. All rows are processed together in each
    pass, so chains of implications need one pass per link.
    """
    _, A, senses, b, lb0, ub0, integer = model.to_arrays()
    lb = lb0 if lb is None else np.asarray(lb, dtype=float)
    ub = ub0 if ub is None else np.asarray(ub, dtype=float)
    return _Propagator(A, senses, b, integer).run(lb, ub, tol, max_passes)


def write_lp(model: MilpModel) -> str:
    """CPLEX-LP text, coefficients printed with 17 significant digits."""

    def term(v, name, first):
        sign = "-" if v < 0 else ("" if first else "+")
        return f"{sign} {abs(v):.17g} {name}".strip()

    def expr(coefs):
        parts = [term(v, model.names[k], i == 0) for i, (k, v) in enumerate(sorted(coefs.items()))]
        return " ".join(parts) if parts else "0 " + (model.names[0] if model.names else "")

    lines = ["\\ " + model.name]
    lines.append("Minimize" if model.sense == "min" else "Maximize")
    obj = expr({k: v for k, v in model.objective.terms.items() if v != 0.0})
    if model.objective.constant:
        obj += f" + {model.objective.constant:.17g} __const"
    lines.append(" obj: " + obj)
    lines.append("Subject To")
    ops = {"<=": "<=", ">=": ">=", "==": "="}
    for con in model.constraints:
        lines.append(f" {con.name}: {expr(con.coefs)} {ops[con.sense]} {con.rhs:.17g}")
    if model.objective.constant:
        lines.append(" __fixconst: __const = 1")
    lines.append("Bounds")
    for i, name in enumerate(model.names):
        lines.append(f" {model.lb[i]:.17g} <= {name} <= {model.ub[i]:.17g}")
    gens = [n for i, n in enumerate(model.names) if model.integer[i]]
    if gens:
        lines.append("Generals")
        lines.append(" " + " ".join(gens))
    lines.append("End")
    return "\n".join(lines) + "\n"
