"""Exact follower solvers, the greedy knapsack heuristic, bilevel-feasibility
repair, and a brute-force bilevel solver for small instances."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import problems as P
from .formulation import add_follower_block, read_follower
from .milp import MilpModel, SolveConfig, solve


class OracleError(RuntimeError):
    pass


class FollowerInfeasible(OracleError):
    pass


class SizeError(ValueError):
    pass


@dataclass
class FollowerSolution:
    y: np.ndarray
    value: float
    optimal: bool = True
    y0: float = 0.0


@dataclass
class BilevelSolution:
    x: np.ndarray | None
    y: np.ndarray | None
    leader_value: float | None
    follower_value: float | None
    status: str  # optimal | grid-optimal | heuristic | infeasible | no-solution
    wall_time: float = 0.0
    y0: float = 0.0
    timings: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)


def knapsack_dp(values, weights, capacity):
    """0/1 knapsack by dynamic programming over integer capacities.

    Returns ``(best value, 0/1 selection)``. Items are only taken on strict
    improvement, so the reconstruction is deterministic.
    """
    values = np.asarray(values)
    n = len(values)
    cap = int(capacity)
    dp = np.zeros(cap + 1, dtype=values.dtype)
    take = np.zeros((n, cap + 1), dtype=bool)
    for i in range(n):
        w = int(weights[i])
        v = values[i]
        if w > cap or v <= 0:
            continue
        cand = dp[: cap + 1 - w] + v
        better = cand > dp[w:]
        take[i, w:] = better
        dp[w:] = np.where(better, cand, dp[w:])
    y = np.zeros(n)
    c = cap
    for i in range(n - 1, -1, -1):
        if take[i, c]:
            y[i] = 1.0
            c -= int(weights[i])
    return dp[cap], y


def _check_integral(weights, capacity):
    arr = np.asarray(weights, dtype=float)
    if np.any(arr != np.round(arr)) or float(capacity) != round(float(capacity)):
        raise OracleError("dynamic programming oracle needs integer weights and capacity")


def _as_decision(inst, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"decision has shape {x.shape}, expected ({inst.n},)")
    return x


def cnp_gains(inst, x):
    pa = np.asarray(inst.pa, dtype=float)
    gain = pa * ((1.0 + inst.gamma) * (1.0 - x) + (1.0 - inst.eta) * x)
    const = -inst.gamma * float(np.dot(pa, 1.0 - x))
    return gain, const


def _milp_follower(inst, x):
    m = MilpModel("follower")
    block = add_follower_block(m, inst, x)
    m.set_objective(block.follower_obj, "max")
    sol = solve(m, SolveConfig())
    if sol.status == "infeasible":
        raise FollowerInfeasible(f"follower problem infeasible for x={list(x)}")
    if sol.status != "optimal":
        raise OracleError(f"follower MILP ended with status {sol.status}")
    y, y0 = read_follower(sol, block)
    return FollowerSolution(y, P.follower_objective(inst, x, y, y0), True, y0)


def solve_follower(inst, x) -> FollowerSolution:
    """Optimal follower response and value Phi(x)."""
    x = _as_decision(inst, x)
    if inst.kind == "kip":
        _check_integral(inst.a, inst.b)
        avail = np.asarray(inst.p, dtype=np.int64) * (x < 0.5)
        _, y = knapsack_dp(avail, inst.a, inst.b)
        return FollowerSolution(y, P.follower_objective(inst, x, y))
    if inst.kind == "cnp":
        _check_integral(inst.a, inst.A)
        gain, _ = cnp_gains(inst, x)
        _, y = knapsack_dp(gain, inst.a, inst.A)
        return FollowerSolution(y, P.follower_objective(inst, x, y))
    return _milp_follower(inst, x)


def greedy_knapsack(inst, x) -> FollowerSolution:
    """Follower greedy: best profit/weight first, skipping interdicted items."""
    x = _as_decision(inst, x)
    y = np.zeros(inst.n)
    rem = inst.b
    for i in P.greedy_order(inst):
        if x[i] < 0.5 and inst.a[i] <= rem:
            y[i] = 1.0
            rem -= inst.a[i]
    return FollowerSolution(y, float(np.dot(inst.p, y)), optimal=False)


def repair(inst, x, follower: FollowerSolution | None = None) -> BilevelSolution:
    """Turn a leader decision into an optimistic bilevel-feasible pair.

    Step 1 computes Phi(x); step 2 picks, among follower optima, one that is
    best for the leader. ``follower`` may pass in a precomputed step 1.
    """
    start = time.perf_counter()
    x = _as_decision(inst, x)
    if not P.leader_feasible(inst, x):
        return BilevelSolution(x, None, None, None, "infeasible", time.perf_counter() - start)
    try:
        fs = follower if follower is not None else solve_follower(inst, x)
    except FollowerInfeasible:
        return BilevelSolution(x, None, None, None, "infeasible", time.perf_counter() - start)
    if inst.kind == "kip":
        y, y0 = fs.y, 0.0
    else:
        m = MilpModel("optimistic")
        block = add_follower_block(m, inst, x)
        tol = 1e-7 * max(1.0, abs(fs.value))
        m.add_constr(block.follower_obj, ">=", fs.value - tol, name="value_function")
        m.set_objective(block.leader_obj, P.leader_sense(inst))
        sol = solve(m, SolveConfig())
        if sol.status != "optimal":
            raise OracleError(f"optimistic selection failed with status {sol.status}")
        y, y0 = read_follower(sol, block)
        if P.follower_objective(inst, x, y, y0) < fs.value - 10 * tol:
            y, y0 = fs.y, fs.y0
    F = P.leader_objective(inst, x, y, y0)
    f = P.follower_objective(inst, x, y, y0)
    return BilevelSolution(x, y, F, f, "heuristic", time.perf_counter() - start, y0)


def kip_values_batch(inst, X, chunk: int = 2048) -> np.ndarray:
    """Phi(x) for every row of the 0/1 matrix ``X`` (KIP only)."""
    X = np.asarray(X, dtype=bool)
    cap = int(inst.b)
    out = np.empty(len(X), dtype=np.int64)
    for s in range(0, len(X), chunk):
        blk = X[s: s + chunk]
        dp = np.zeros((len(blk), cap + 1), dtype=np.int64)
        for i in range(inst.n):
            w = int(inst.a[i])
            if w > cap:
                continue
            cand = dp[:, : cap + 1 - w] + int(inst.p[i])
            upd = np.maximum(dp[:, w:], cand)
            avail = ~blk[:, i]
            dp[avail, w:] = upd[avail]
        out[s: s + chunk] = dp[:, cap]
    return out


def _subsets(n, sizes):
    for r in sizes:
        for comb in itertools.combinations(range(n), r):
            x = np.zeros(n)
            x[list(comb)] = 1.0
            yield x


def enumerate_leader(inst, maximal_only: bool = False, grid=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """All leader-feasible decisions (a grid for the continuous DRP leader).

    With ``maximal_only`` KIP enumerates only interdictions of exactly
    min(k, n) items, which dominate smaller ones because Phi can only drop
    when more items are removed.
    """
    n = inst.n
    if inst.kind == "kip":
        sizes = [min(inst.k, n)] if maximal_only else range(0, inst.k + 1)
        return list(_subsets(n, sizes))
    if inst.kind == "drp":
        pts = (np.array(t) for t in itertools.product(grid, repeat=n))
        return [x for x in pts if P.leader_feasible(inst, x)]
    pts = (np.array(t, dtype=float) for t in itertools.product((0.0, 1.0), repeat=n))
    return [x for x in pts if P.leader_feasible(inst, x)]


def count_leader(inst, maximal_only: bool = False, grid_size: int = 5) -> int:
    n = inst.n
    if inst.kind == "kip":
        if maximal_only:
            return math.comb(n, min(inst.k, n))
        return sum(math.comb(n, j) for j in range(inst.k + 1))
    return (grid_size if inst.kind == "drp" else 2) ** n


def solve_bruteforce(inst, cap: int = 200_000, maximal_only: bool = True) -> BilevelSolution:
    """Exact optimum by enumerating leader decisions and repairing each.

    Raises ``SizeError`` when more than ``cap`` decisions would be visited.
    """
    start = time.perf_counter()
    total = count_leader(inst, maximal_only)
    if total > cap:
        raise SizeError(f"{total} leader decisions exceed the enumeration cap {cap}")
    X = enumerate_leader(inst, maximal_only)
    sense = P.leader_sense(inst)
    if inst.kind == "kip":
        vals = kip_values_batch(inst, np.array(X).reshape(len(X), inst.n))
        best = int(np.argmin(vals))
        sol = repair(inst, X[best])
    else:
        sol = None
        for x in X:
            cand = repair(inst, x)
            if cand.status == "infeasible":
                continue
            if sol is None or (cand.leader_value < sol.leader_value - 1e-9 if sense == "min"
                               else cand.leader_value > sol.leader_value + 1e-9):
                sol = cand
        if sol is None:
            return BilevelSolution(None, None, None, None, "infeasible", time.perf_counter() - start)
    sol.status = "grid-optimal" if inst.kind == "drp" else "optimal"
    sol.wall_time = time.perf_counter() - start
    sol.info["enumerated"] = len(X)
    return sol
