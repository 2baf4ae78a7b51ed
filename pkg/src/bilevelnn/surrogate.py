"""Single-level surrogates of a bilevel instance and the solve-then-repair loop.

``upper``: optimize a learned estimate of the leader's value over leader
constraints only. ``lower``: keep the follower's constraints and require
f(x, y) >= NN(x) - s with a penalized slack s. ``gvfa``: the same with the
follower's greedy value in place of the network.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from . import problems as P
from .embed import EncodingStats, encode_greedy, encode_prediction, expr_bounds, needs_greedy
from .formulation import add_follower_block, add_leader_vars, read_follower
from .milp import MilpModel, SolveConfig, solve


class ConfigError(ValueError):
    pass


@dataclass
class SurrogateConfig:
    approx: str = "lower"  # upper | lower | gvfa
    lam: float = 1.0
    slack: str = "slack"  # slack | none | dampened
    dampening: float | None = None
    encoding: str = "auto"  # auto | tabulate | bigm
    milp: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if self.approx not in ("upper", "lower", "gvfa"):
            raise ConfigError(f"unknown approximation {self.approx!r}")
        if self.slack not in ("slack", "none", "dampened"):
            raise ConfigError(f"unknown slack mode {self.slack!r}")
        if self.lam < 0:
            raise ConfigError("slack penalty must be nonnegative")
        if self.slack == "dampened" and (self.dampening is None or self.dampening < 0):
            raise ConfigError("dampened mode needs a nonnegative dampening constant")


def _check_target(inst, predictor, target):
    kind = getattr(predictor, "kind", inst.kind)
    if kind != inst.kind:
        raise ConfigError(f"predictor for {kind} applied to a {inst.kind} instance")
    pt = getattr(predictor, "target", target)
    # interdiction shares one model for both levels since F = f
    if pt != target and inst.kind != "kip":
        raise ConfigError(f"{target} surrogate needs a {target}-level predictor, got {pt}")


def _prediction(model, predictor, inst, x, cfg):
    yg = None
    if needs_greedy(predictor):
        yg, _ = encode_greedy(model, inst, x)
    stats = EncodingStats()
    pred = encode_prediction(model, predictor, inst, x, yg, cfg.encoding, stats)
    model.tags["encoding"] = stats
    return pred


def build_upper(inst, predictor, cfg: SurrogateConfig | None = None) -> MilpModel:
    """Leader constraints plus the encoded estimate of the leader's value as objective."""
    cfg = cfg or SurrogateConfig(approx="upper")
    _check_target(inst, predictor, "upper")
    model = MilpModel(f"upper_{inst.kind}")
    x = add_leader_vars(model, inst)
    pred = _prediction(model, predictor, inst, x, cfg)
    model.set_objective(pred, P.leader_sense(inst))
    model.tags.update(x=x, prediction=pred, block=None, slack=None)
    return model


def _lower_common(inst, name):
    model = MilpModel(name)
    x = add_leader_vars(model, inst)
    block = add_follower_block(model, inst, x)
    return model, x, block


def build_lower(inst, predictor, cfg: SurrogateConfig | None = None) -> MilpModel:
    """Value-function surrogate: f(x, y) >= NN(x) - s, penalty lam * s on the leader."""
    cfg = cfg or SurrogateConfig()
    _check_target(inst, predictor, "lower")
    model, x, block = _lower_common(inst, f"lower_{inst.kind}")
    pred = _prediction(model, predictor, inst, x, cfg)
    s = None
    if cfg.slack == "slack":
        _, hi = expr_bounds(model, pred - block.follower_obj)
        s = model.add_var("slack", 0.0, max(0.0, hi) + 1.0)
        model.add_constr(block.follower_obj - pred + s, ">=", 0.0, name="value_function")
    elif cfg.slack == "none":
        model.add_constr(block.follower_obj - pred, ">=", 0.0, name="value_function")
    else:
        model.add_constr(block.follower_obj - pred, ">=", -cfg.dampening, name="value_function")
    sense = P.leader_sense(inst)
    obj = block.leader_obj
    if s is not None:
        obj = obj + cfg.lam * s if sense == "min" else obj - cfg.lam * s
    model.set_objective(obj, sense)
    model.tags.update(x=x, prediction=pred, block=block, slack=s)
    return model


def build_gvfa(inst, cfg: SurrogateConfig | None = None) -> MilpModel:
    """Value-function surrogate with the greedy follower value as the estimate."""
    if inst.kind != "kip":
        raise ConfigError("the greedy value-function baseline is defined for KIP only")
    model, x, block = _lower_common(inst, "gvfa_kip")
    _, gval = encode_greedy(model, inst, x)
    model.add_constr(block.follower_obj - gval, ">=", 0.0, name="value_function")
    model.set_objective(block.leader_obj, P.leader_sense(inst))
    model.tags.update(x=x, prediction=gval, block=block, slack=None)
    return model


def build(inst, predictor, cfg: SurrogateConfig) -> MilpModel:
    if cfg.approx == "upper":
        return build_upper(inst, predictor, cfg)
    if cfg.approx == "lower":
        return build_lower(inst, predictor, cfg)
    return build_gvfa(inst, cfg)


def extract_x(inst, model: MilpModel, sol) -> np.ndarray:
    x = np.array([sol[v] for v in model.tags["x"]], dtype=float)
    if inst.kind == "drp":
        x = np.clip(x, 0.0, 1.0)
        cost = float(np.dot(inst.c, x))
        if cost > inst.Bd:
            x *= inst.Bd / cost
        return x + 0.0
    return np.round(x) + 0.0


def solve_end_to_end(inst, predictor, cfg: SurrogateConfig | None = None) -> oracle.BilevelSolution:
    """Build and solve the surrogate, then repair its leader decision."""
    cfg = cfg or SurrogateConfig()
    t0 = time.perf_counter()
    model = build(inst, predictor, cfg)
    sol = solve(model, cfg.milp)
    t_sur = time.perf_counter() - t0
    info = {"nodes": sol.nodes, "binaries": model.num_binaries(), "milp_status": sol.status}
    if not sol.has_solution:
        return oracle.BilevelSolution(None, None, None, None, "no-solution", t_sur,
                                      timings={"surrogate": t_sur, "repair": 0.0}, info=info)
    x = extract_x(inst, model, sol)
    info["surrogate_objective"] = sol.objective
    info["prediction"] = sol.value(model.tags["prediction"])
    if model.tags["slack"] is not None:
        info["slack"] = sol[model.tags["slack"]]
    t1 = time.perf_counter()
    res = oracle.repair(inst, x)
    t_rep = time.perf_counter() - t1
    res.timings = {"surrogate": t_sur, "repair": t_rep}
    res.wall_time = t_sur + t_rep
    res.info.update(info)
    return res


@dataclass
class FixedResponse:
    y: np.ndarray
    follower_value: float
    slack: float | None
    prediction: float
    objective: float


def solve_fixed(inst, predictor, x, cfg: SurrogateConfig | None = None, y=None) -> FixedResponse:
    """Solve the lower surrogate with the leader (and optionally the follower) fixed."""
    cfg = cfg or SurrogateConfig()
    model = build_lower(inst, predictor, cfg)
    for v, val in zip(model.tags["x"], np.asarray(x, dtype=float)):
        model.fix(v, float(val))
    block = model.tags["block"]
    if y is not None:
        for v, val in zip(block.y, np.asarray(y, dtype=float)):
            model.fix(v, float(val))
    sol = solve(model, cfg.milp)
    if not sol.has_solution:
        raise oracle.OracleError(f"fixed surrogate ended with status {sol.status}")
    yy, y0 = read_follower(sol, block)
    s = model.tags["slack"]
    return FixedResponse(yy, P.follower_objective(inst, x, yy, y0), None if s is None else sol[s],
                         sol.value(model.tags["prediction"]), sol.objective)
