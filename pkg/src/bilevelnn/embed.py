"""MILP encodings: ReLU networks (big-M with interval bounds), the set
network's value head, the follower's greedy heuristic, products of a
[0,1] variable with a binary, and table predictors over enumerated
decisions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .milp import LinExpr, MilpModel, Var, as_expr, quicksum


class EncodingError(ValueError):
    pass


def _var_bounds(model, var):
    return model.lb[var.index], model.ub[var.index]


def expr_bounds(model: MilpModel, expr) -> tuple:
    """Interval of an affine expression over the variable bounds."""
    e = as_expr(expr)
    lo = hi = e.constant
    for k, c in e.terms.items():
        a, b = model.lb[k], model.ub[k]
        if not (np.isfinite(a) and np.isfinite(b)):
            raise EncodingError(f"variable {model.names[k]} is unbounded")
        lo += min(c * a, c * b)
        hi += max(c * a, c * b)
    return lo, hi


def linearize_product(model: MilpModel, u: Var, v: Var, name: str | None = None) -> Var:
    """z = u * v for u in [0,1] and binary v."""
    lu, uu = _var_bounds(model, u)
    if not (np.isfinite(lu) and np.isfinite(uu)) or lu < 0 or uu > 1:
        raise EncodingError(f"product needs u within [0, 1], got [{lu}, {uu}]")
    if not model.integer[v.index] or _var_bounds(model, v) != (0.0, 1.0):
        raise EncodingError("second factor of a product must be binary")
    z = model.add_var(name, 0.0, 1.0)
    model.add_constr(z - u, "<=", 0.0, name=f"{z.name}_u")
    model.add_constr(z - v, "<=", 0.0, name=f"{z.name}_v")
    model.add_constr(z - u - v, ">=", -1.0, name=f"{z.name}_uv")
    return z


@dataclass
class BoundsTable:
    lower: list  # per layer, pre-activation
    upper: list

    @property
    def m_minus(self):
        return [np.maximum(0.0, -lo) for lo in self.lower]

    @property
    def m_plus(self):
        return [np.maximum(0.0, hi) for hi in self.upper]


def propagate_bounds(layers, lo, hi) -> BoundsTable:
    """Interval arithmetic through ``layers`` [(W, b), ...]; ReLU after all but the last."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise EncodingError("input box must be finite")
    if np.any(lo > hi):
        raise EncodingError("input box has lower > upper")
    lows, highs = [], []
    for j, (W, b) in enumerate(layers):
        Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
        plo = Wp @ lo + Wn @ hi + b
        phi = Wp @ hi + Wn @ lo + b
        lows.append(plo)
        highs.append(phi)
        lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
    return BoundsTable(lows, highs)


@dataclass
class EncodingStats:
    binaries: int = 0
    fixed_inactive: int = 0
    fixed_active: int = 0


def _affine(W, b, inputs):
    return [quicksum(float(w) * e for w, e in zip(row, inputs) if w != 0.0) + float(bj)
            for row, bj in zip(W, b)]


def encode_relu_network(model: MilpModel, layers, inputs, name: str = "nn", stats: EncodingStats | None = None):
    """Big-M encoding of a feed-forward ReLU network; returns the output expressions.

    ``inputs`` are affine expressions in model variables. Bounds come from
    interval propagation over the box those expressions can reach.
    """
    inputs = [as_expr(e) for e in inputs]
    box = np.array([expr_bounds(model, e) for e in inputs]).reshape(len(inputs), 2)
    table = propagate_bounds(layers, box[:, 0], box[:, 1])
    stats = stats if stats is not None else EncodingStats()
    cur = inputs
    for li, (W, b) in enumerate(layers):
        pre = _affine(W, b, cur)
        if li == len(layers) - 1:
            return pre
        lo, hi = table.lower[li], table.upper[li]
        nxt = []
        for j, e in enumerate(pre):
            if hi[j] <= 0.0:
                stats.fixed_inactive += 1
                nxt.append(LinExpr())
            elif lo[j] >= 0.0:
                stats.fixed_active += 1
                nxt.append(e)
            else:
                h = model.add_var(f"{name}_h{li}_{j}", 0.0, float(hi[j]))
                z = model.add_binary(f"{name}_z{li}_{j}")
                model.add_constr(h - e, ">=", 0.0, name=f"{name}_ge{li}_{j}")
                model.add_constr(h - e + float(-lo[j]) * z, "<=", float(-lo[j]), name=f"{name}_act{li}_{j}")
                model.add_constr(h - float(hi[j]) * z, "<=", 0.0, name=f"{name}_off{li}_{j}")
                stats.binaries += 1
                nxt.append(1.0 * h)
        cur = nxt
    return cur


def encode_greedy(model: MilpModel, inst, x):
    """Follower greedy heuristic as linear constraints.

    Returns ``(yg, value)`` with ``yg`` indexed like the items. Valid for
    integer weights and capacity: y_j = 1 exactly when x_j = 0 and the
    remaining capacity r_j is at least a_j.

    Branching priorities follow the greedy order (item by item, y^g_j and
    x_j together), which settles the remaining capacity early.
    """
    from .problems import greedy_order

    a = np.asarray(inst.a, dtype=float)
    if np.any(a != np.round(a)) or float(inst.b) != round(float(inst.b)):
        raise EncodingError("greedy encoding needs integer weights and capacity")
    yg = [None] * inst.n
    r = LinExpr(constant=float(inst.b))
    for t, j in enumerate(greedy_order(inst)):
        prio = 1 + inst.n - t
        y = model.add_binary(f"yg{j}", priority=prio)
        if isinstance(x[j], Var):
            model.priority[x[j].index] = max(model.priority[x[j].index], prio)
        aj = float(inst.a[j])
        model.add_constr(y + x[j], "<=", 1.0, name=f"greedy_mask{j}")
        model.add_constr(aj * y - r, "<=", 0.0, name=f"greedy_fit{j}")
        # r_j <= b, so b - a_j + 1 is the smallest valid big-M here
        big = max(float(inst.b) - aj + 1.0, 0.0)
        model.add_constr(r - big * y - big * as_expr(x[j]), "<=", aj - 1.0, name=f"greedy_take{j}")
        r = r - aj * y
        yg[j] = y
    value = quicksum(float(p) * y for p, y in zip(inst.p, yg))
    return yg, value


# ----------------------------------------------------------------------------
# predictors


@dataclass
class TablePredictor:
    """Prediction given by a lookup table over enumerated binary decisions.

    Encoding restricts x to the listed patterns, so the table should cover
    every feasible decision.
    """

    patterns: np.ndarray  # (P, n) 0/1
    values: np.ndarray  # (P,)
    target: str = "lower"

    @classmethod
    def from_function(cls, inst, fn, decisions=None, target="lower"):
        if decisions is None:
            decisions = [np.array(t, dtype=float) for t in itertools.product((0.0, 1.0), repeat=inst.n)]
        pats = np.array(decisions, dtype=float).reshape(len(decisions), inst.n)
        return cls(pats, np.array([float(fn(x)) for x in pats]), target)

    def lookup(self, x) -> float:
        x = np.asarray(x, dtype=float)
        hit = np.flatnonzero(np.all(np.abs(self.patterns - x) < 1e-6, axis=1))
        if hit.size == 0:
            raise KeyError(f"decision {x.tolist()} not in table")
        return float(self.values[hit[0]])


def encode_table(model: MilpModel, pred: TablePredictor, x, name: str = "tab"):
    w = [model.add_binary(f"{name}_w{p}") for p in range(len(pred.values))]
    model.add_constr(quicksum(w), "==", 1.0, name=f"{name}_one")
    for i, xi in enumerate(x):
        model.add_constr(as_expr(xi) - quicksum(float(pred.patterns[p, i]) * w[p] for p in range(len(w))),
                         "==", 0.0, name=f"{name}_x{i}")
    return quicksum(float(v) * wp for v, wp in zip(pred.values, w))


def _net_parts(net, inst):
    from . import dataset
    from .mlp import instance_embedding

    cfg = dataset.FeatureConfig.from_dict(net.feature_config)
    static = cfg.normalize(dataset.features_static(inst, cfg.use_greedy_features))
    if static.shape[1] != net.static_dim:
        raise EncodingError("instance features do not match the network")
    emb = instance_embedding(net, static)
    coeffs = dataset.objective_coefficients(inst, net.target)
    return cfg, static, emb, coeffs


def encode_set_network(model: MilpModel, net, inst, x, yg=None, mode: str = "auto",
                       stats: EncodingStats | None = None) -> LinExpr:
    """Encoded prediction of ``net`` for leader variables ``x``.

    The instance embedding is a constant for a fixed instance, so only the
    value head depends on x. ``mode`` is ``bigm`` (ReLU encoding per
    variable), ``tabulate`` (the head sees finitely many inputs per variable
    when x and y^g are binary, so its outputs are tabulated and combined
    linearly, exact and binary-free) or ``auto`` (tabulate when possible).
    """
    from .mlp import value_head

    if net.kind != inst.kind:
        raise EncodingError(f"network for {net.kind} applied to a {inst.kind} instance")
    cfg, static, emb, coeffs = _net_parts(net, inst)
    greedy = cfg.use_greedy_features
    if greedy and yg is None:
        raise EncodingError("network uses greedy features; pass the encoded y^g")
    if mode == "auto":
        mode = "tabulate" if inst.kind in ("kip", "cnp") else "bigm"
    stats = stats if stats is not None else EncodingStats()
    n = inst.n
    outs = []
    if mode == "tabulate":
        if inst.kind not in ("kip", "cnp"):
            raise EncodingError("tabulation needs binary leader variables")
        from .dataset import decision_columns

        for i in range(n):
            def head(xv, ygv=0.0):
                xx = np.zeros(n)
                xx[i] = xv
                cols = decision_columns(inst, xx, False)[i]
                if greedy:
                    cols = np.array([xv, ygv])
                v = np.concatenate([static[i], cols, emb])
                if net.mask:
                    v = v * (1.0 - xv)
                return float(value_head(net, v))

            if inst.kind == "kip" and greedy:
                o_x, o_0, o_1 = head(1.0), head(0.0, 0.0), head(0.0, 1.0)
                outs.append(o_x * x[i] + o_0 * (1.0 - as_expr(x[i]) - yg[i]) + o_1 * yg[i])
            else:
                o_0, o_1 = head(0.0), head(1.0)
                outs.append(o_0 + (o_1 - o_0) * as_expr(x[i]))
    elif mode == "bigm":
        layers = net.psi_layers("v")
        for i in range(n):
            xi = as_expr(x[i])
            if inst.kind == "kip":
                # masked input (f_i, x_i, y^g_i, emb) * (1 - x_i) for binary x_i
                keep = 1.0 - xi
                inp = [float(s) * keep for s in static[i]] + [LinExpr()]
                if greedy:
                    inp.append(as_expr(yg[i]))
                inp += [float(e) * keep for e in emb]
            elif inst.kind == "cnp":
                inp = [LinExpr(constant=float(s)) for s in static[i]]
                inp += [xi, -inst.gamma * (1.0 - xi), 1.0 - xi, (1.0 - inst.eta) * xi]
                inp += [LinExpr(constant=float(e)) for e in emb]
            else:
                inp = [LinExpr(constant=float(s)) for s in static[i]] + [xi]
                inp += [LinExpr(constant=float(e)) for e in emb]
            outs.append(encode_relu_network(model, layers, inp, name=f"nn{i}", stats=stats)[0])
    else:
        raise EncodingError(f"unknown encoding mode {mode!r}")
    raw = quicksum(float(c) * o for c, o in zip(coeffs, outs))
    return net.label_offset + net.label_scale * raw


def predict(predictor, inst, x) -> float:
    """Prediction of a set network or table predictor at decision ``x``."""
    from .mlp import SetNetwork, forward

    if isinstance(predictor, TablePredictor):
        return predictor.lookup(x)
    if isinstance(predictor, SetNetwork):
        from .dataset import decision_columns

        cfg, static, _, coeffs = _net_parts(predictor, inst)
        return forward(predictor, static, decision_columns(inst, x, cfg.use_greedy_features), coeffs)
    if callable(predictor):
        return float(predictor(x))
    raise TypeError(f"unsupported predictor {type(predictor).__name__}")


def needs_greedy(predictor) -> bool:
    return bool(getattr(predictor, "feature_config", {}).get("use_greedy_features", False))


def encode_prediction(model: MilpModel, predictor, inst, x, yg=None, mode: str = "auto",
                      stats: EncodingStats | None = None) -> LinExpr:
    if isinstance(predictor, TablePredictor):
        return encode_table(model, predictor, x)
    return encode_set_network(model, predictor, inst, x, yg, mode, stats)


def predict_batch(predictor, inst, X) -> np.ndarray:
    """Predictions for every row of ``X``."""
    from .mlp import ArrayData, SetNetwork, predict as mlp_predict

    X = np.asarray(X, dtype=float).reshape(-1, inst.n)
    if isinstance(predictor, SetNetwork):
        from .dataset import decision_columns

        cfg, static, _, coeffs = _net_parts(predictor, inst)
        dec = np.stack([decision_columns(inst, x, cfg.use_greedy_features) for x in X])
        data = ArrayData(static[None], coeffs[None], np.zeros(len(X), dtype=int), dec, np.zeros(len(X)))
        return mlp_predict(predictor, data)
    return np.array([predict(predictor, inst, x) for x in X])
