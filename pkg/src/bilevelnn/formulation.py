"""MILP building blocks shared by the oracle and the surrogates: leader
variables with their budget row, and the follower's variables, constraints
and both objectives for a given leader decision (variables or numbers)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import linearize_product
from .milp import LinExpr, MilpModel, Var, quicksum


@dataclass
class FollowerBlock:
    y: list
    y0: Var | None
    leader_obj: LinExpr
    follower_obj: LinExpr


def add_leader_vars(model: MilpModel, inst, budget: bool = True) -> list:
    if inst.kind == "drp":
        x = [model.add_var(f"x{i}", 0.0, 1.0) for i in range(inst.n)]
    else:
        x = [model.add_binary(f"x{i}", priority=1) for i in range(inst.n)]
    if budget:
        if inst.kind == "kip":
            model.add_constr(quicksum(x), "<=", inst.k, name="leader_budget")
        elif inst.kind == "cnp":
            model.add_constr(quicksum(d * xi for d, xi in zip(inst.d, x)), "<=", inst.D, name="leader_budget")
        elif inst.kind == "drp":
            model.add_constr(quicksum(c * xi for c, xi in zip(inst.c, x)), "<=", inst.Bd, name="leader_budget")
    return x


def _product(model, xi, yi, name):
    # x_i * y_i with y_i binary: a number when x is fixed, else an exact linearization.
    if isinstance(xi, Var):
        return linearize_product(model, xi, yi, name=name)
    return float(xi) * yi


def add_follower_block(model: MilpModel, inst, x) -> FollowerBlock:
    """Follower variables and constraints g(x, y) >= 0 under leader decision ``x``."""
    n = inst.n
    fixed = not isinstance(x[0], Var)
    if fixed:
        x = [float(v) for v in np.asarray(x, dtype=float)]
    y = [model.add_binary(f"y{i}") for i in range(n)]
    y0 = None
    if inst.kind == "kip":
        for i in range(n):
            model.add_constr(y[i] + x[i], "<=", 1.0, name=f"interdict{i}")
        model.add_constr(quicksum(a * yi for a, yi in zip(inst.a, y)), "<=", inst.b, name="follower_budget")
        obj = quicksum(p * yi for p, yi in zip(inst.p, y))
        return FollowerBlock(y, None, obj, obj.copy())
    if inst.kind == "cnp":
        model.add_constr(quicksum(a * yi for a, yi in zip(inst.a, y)), "<=", inst.A, name="follower_budget")
        z = [_product(model, x[i], y[i], f"xy{i}") for i in range(n)]
        g, eta, eps, dl = inst.gamma, inst.eta, inst.epsilon, inst.delta
        F = quicksum(pd * (1.0 + (eps - 1.0) * x[i] + (dl - 1.0) * y[i] + (1.0 + eta - eps - dl) * z[i])
                     for i, pd in enumerate(inst.pd))
        f = quicksum(pa * (-g + g * x[i] + (1.0 + g) * y[i] - (g + eta) * z[i])
                     for i, pa in enumerate(inst.pa))
        return FollowerBlock(y, None, F, f)
    if inst.kind == "drp":
        y0 = model.add_var("y0", 0.0, 1.0)
        z = [_product(model, x[i], y[i], f"xy{i}") for i in range(n)]
        cost = quicksum(c * y[i] - c * z[i] for i, c in enumerate(inst.c)) + inst.c0 * y0
        model.add_constr(cost, "<=", inst.Br, name="follower_budget")
        F = quicksum(w * yi for w, yi in zip(inst.w, y))
        f = quicksum(v * yi for v, yi in zip(inst.v, y)) + inst.v0 * y0
        return FollowerBlock(y, y0, F, f)
    model.add_constr(2.0 * x[0] + y[0], "<=", 1.0, name="follower_row")
    obj = 1.0 * y[0]
    return FollowerBlock(y, None, obj, obj.copy())


def read_follower(sol, block: FollowerBlock):
    y = np.array([round(sol[v]) for v in block.y], dtype=float) + 0.0
    y0 = float(sol[block.y0]) if block.y0 is not None else 0.0
    return y, y0
