"""Evaluation of surrogate methods against brute force, and empirical checks of
the slack-penalty guarantees on enumerable interdiction instances."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from . import oracle
from . import problems as P
from .embed import predict_batch
from .milp import SolveConfig
from .surrogate import SurrogateConfig, solve_end_to_end, solve_fixed

METHODS = ("NN_l", "NN_u", "GVFA", "bruteforce")
CSV_COLUMNS = ("instance_id", "method", "objective", "mre_pct", "surrogate_time_s", "repair_time_s", "status")
DELTA_MAX_N = 12
UNDEFINED = "undefined"


class VerificationError(ValueError):
    pass


def relative_error(obj: float, best: float) -> float | None:
    """Percent error ``100 |obj - best| / |best|``; ``None`` when undefined (best = 0, obj != 0)."""
    if best == 0:
        return 0.0 if obj == 0 else None
    return 100.0 * abs(obj - best) / abs(best)


@dataclass
class MethodResult:
    instance_id: str
    method: str
    objective: float | None
    mre_pct: float | None
    surrogate_time_s: float
    repair_time_s: float
    status: str
    nodes: int = 0
    group: str = ""


@dataclass
class EvalConfig:
    lam: float = 1.0
    slack: str = "slack"
    milp: SolveConfig = field(default_factory=SolveConfig)
    bruteforce_cap: int = 200_000
    reproducible: bool = False  # zero wall-clock fields so outputs are byte-stable


@dataclass
class ResultsTable:
    rows: list
    aggregates: dict  # (group, method) -> {"mre": .., "time": .., "count": .., "undefined": ..}

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def format(self) -> str:
        return format_table(self.aggregates)


def group_of(inst) -> str:
    if inst.kind == "kip":
        return f"n={inst.n},k={inst.k}"
    return f"n={inst.n}"


def _method_config(method, cfg: EvalConfig) -> SurrogateConfig:
    approx = {"NN_l": "lower", "NN_u": "upper", "GVFA": "gvfa"}[method]
    return SurrogateConfig(approx=approx, lam=cfg.lam, slack=cfg.slack, milp=cfg.milp)


def _run_method(inst, method, predictors, cfg: EvalConfig):
    if method == "bruteforce":
        sol = oracle.solve_bruteforce(inst, cap=cfg.bruteforce_cap)
        return sol, sol.wall_time, 0.0, 0
    if method != "GVFA" and predictors.get(method) is None:
        raise ValueError(f"no predictor given for {method}")
    sol = solve_end_to_end(inst, predictors.get(method), _method_config(method, cfg))
    return sol, sol.timings.get("surrogate", 0.0), sol.timings.get("repair", 0.0), sol.info.get("nodes", 0)


def _better(a, b, sense):
    return a < b if sense == "min" else a > b


def evaluate(instances, methods, predictors: dict | None = None, cfg: EvalConfig | None = None) -> ResultsTable:
    """Run every method on every ``(instance_id, instance)`` pair.

    ``predictors`` maps method tags (NN_l, NN_u) to trained predictors. The
    reference value is brute force when it finishes, otherwise the best value
    among the methods. Failures are recorded per row.
    """
    cfg = cfg or EvalConfig()
    predictors = predictors or {}
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    rows = []
    for iid, inst in instances:
        sense = P.leader_sense(inst)
        group = group_of(inst)
        found = []
        for m in methods:
            try:
                sol, t_s, t_r, nodes = _run_method(inst, m, predictors, cfg)
                obj = None if sol.status in ("infeasible", "no-solution") else sol.leader_value
                status = sol.status
            except (oracle.OracleError, oracle.SizeError, ValueError) as e:
                obj, t_s, t_r, nodes, status = None, 0.0, 0.0, 0, f"error: {type(e).__name__}"
            if cfg.reproducible:
                t_s = t_r = 0.0
            found.append(MethodResult(str(iid), m, obj, None, t_s, t_r, status, nodes, group))
        exact = [r for r in found if r.method == "bruteforce" and r.status in ("optimal", "grid-optimal")]
        if exact:
            best = exact[0].objective
        else:
            best = None
            for r in found:
                if r.objective is not None and (best is None or _better(r.objective, best, sense)):
                    best = r.objective
        for r in found:
            if r.objective is not None and best is not None:
                r.mre_pct = relative_error(r.objective, best)
        rows.extend(found)
    return ResultsTable(rows, aggregate(rows, methods))


def aggregate(rows, methods=METHODS) -> dict:
    order = {m: i for i, m in enumerate(methods)}
    out = {}
    groups = list(dict.fromkeys(r.group for r in rows))
    for g in groups:
        for m in sorted({r.method for r in rows if r.group == g}, key=lambda m: order.get(m, len(order))):
            rs = [r for r in rows if r.group == g and r.method == m]
            mres = [r.mre_pct for r in rs if r.mre_pct is not None]
            out[(g, m)] = {
                "mre": float(np.mean(mres)) if mres else None,
                "time": float(np.mean([r.surrogate_time_s + r.repair_time_s for r in rs])),
                "count": len(rs),
                "undefined": len(rs) - len(mres),
            }
    return out


def format_table(aggregates: dict) -> str:
    """Plain-text table: one line per group, MRE and time per method."""
    groups = list(dict.fromkeys(g for g, _ in aggregates))
    methods = list(dict.fromkeys(m for _, m in aggregates))
    w = max([12] + [len(m) + 7 for m in methods])
    head = "group".ljust(14) + "".join(f"{m + ' MRE':>{w}}{m + ' Time':>{w}}" for m in methods)
    lines = [head]
    for g in groups:
        line = g.ljust(14)
        for m in methods:
            a = aggregates.get((g, m))
            mre = "-" if a is None or a["mre"] is None else f"{a['mre']:.2f}"
            t = "-" if a is None else f"{a['time']:.2f}"
            line += f"{mre:>{w}}{t:>{w}}"
        lines.append(line)
    return "\n".join(lines)


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        mre = UNDEFINED if r.mre_pct is None and r.objective is not None else _fmt(r.mre_pct)
        w.writerow([r.instance_id, r.method, _fmt(r.objective), mre, _fmt(r.surrogate_time_s),
                    _fmt(r.repair_time_s), r.status])
    return buf.getvalue()


def read_csv(text: str) -> list:
    """Parse rows written by :func:`rows_to_csv` (group and nodes are not stored)."""
    def num(s):
        return None if s in ("", UNDEFINED) else float(s)

    out = []
    for d in csv.DictReader(io.StringIO(text)):
        out.append(MethodResult(d["instance_id"], d["method"], num(d["objective"]), num(d["mre_pct"]),
                                float(d["surrogate_time_s"]), float(d["repair_time_s"]), d["status"]))
    return out


# ---------------------------------------------------------------------------
# guarantee checks


@dataclass
class BoundReport:
    instance_id: str
    alpha: float
    delta: float
    opt: float
    achieved: float
    bound: float
    lam: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _feasible_leaders(inst, cap):
    if oracle.count_leader(inst) > cap:
        raise oracle.SizeError(f"more than {cap} leader decisions")
    return np.array(oracle.enumerate_leader(inst), dtype=float)


def _all_follower_sets(n):
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def gap_delta(inst, X=None, cap: int = 20_000) -> float:
    """Largest gap between consecutive achievable follower values, over leader decisions ``X``."""
    if inst.kind != "kip":
        raise VerificationError("gap enumeration is implemented for interdiction instances")
    if inst.n > DELTA_MAX_N:
        raise oracle.SizeError(f"gap enumeration needs n <= {DELTA_MAX_N}")
    X = _feasible_leaders(inst, cap) if X is None else np.asarray(X, dtype=float)
    Y = _all_follower_sets(inst.n)
    vals = Y @ np.asarray(inst.p, dtype=float)
    fits = Y @ np.asarray(inst.a, dtype=float) <= inst.b
    blocked = Y @ X.T > 0  # (sets, leaders)
    delta = 0.0
    for j in range(len(X)):
        v = np.unique(vals[fits & ~blocked[:, j]])
        if len(v) > 1:
            delta = max(delta, float(np.max(np.diff(v))))
    return delta


def prediction_error(inst, predictor, X=None, cap: int = 20_000):
    """``(alpha, predictions, values)``: worst absolute error over leader decisions."""
    X = _feasible_leaders(inst, cap) if X is None else np.asarray(X, dtype=float)
    pred = predict_batch(predictor, inst, X)
    phi = oracle.kip_values_batch(inst, X)
    return float(np.max(np.abs(pred - phi))), pred, phi


def _check_lam(lam):
    if not lam > 1:
        raise VerificationError("the guarantees need a slack penalty above 1")


def verify_theorem1(inst, predictor, lam: float = 2.0, instance_id: str = "", cap: int = 20_000,
                    milp: SolveConfig | None = None) -> BoundReport:
    _check_lam(lam)
    X = _feasible_leaders(inst, cap)
    alpha, _, _ = prediction_error(inst, predictor, X)
    delta = gap_delta(inst, X)
    opt = oracle.solve_bruteforce(inst, cap=cap).leader_value
    cfg = SurrogateConfig(approx="lower", lam=lam, milp=milp or SolveConfig())
    sol = solve_end_to_end(inst, predictor, cfg)
    if sol.leader_value is None:
        raise VerificationError(f"lower surrogate ended with status {sol.status}")
    bound = opt + 3 * alpha + 2 * delta / lam
    return BoundReport(str(instance_id), alpha, delta, float(opt), float(sol.leader_value), float(bound),
                       lam, bool(sol.leader_value <= bound + 1e-6))


@dataclass
class LemmaCase:
    x: list
    case: int  # 1: prediction >= follower optimum, 2: below
    prediction: float
    phi: float
    response: float
    holds: bool


@dataclass
class LemmaReport:
    instance_id: str
    delta: float
    lam: float
    cases: list
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_lemma1(inst, predictor, lam: float = 2.0, instance_id: str = "", cap: int = 20_000,
                  milp: SolveConfig | None = None, tol: float = 1e-6) -> LemmaReport:
    """Fix each feasible leader decision and check the surrogate's follower response."""
    _check_lam(lam)
    X = _feasible_leaders(inst, cap)
    delta = gap_delta(inst, X)
    _, pred, phi = prediction_error(inst, predictor, X)
    cfg = SurrogateConfig(approx="lower", lam=lam, milp=milp or SolveConfig())
    cases = []
    for x, nn, ph in zip(X, pred, phi):
        f = solve_fixed(inst, predictor, x, cfg).follower_value
        if nn >= ph:
            case, ok = 1, abs(f - ph) <= tol
        else:
            case, ok = 2, nn - delta / lam - tol <= f <= ph + tol
        cases.append(LemmaCase(x.tolist(), case, float(nn), float(ph), float(f), bool(ok)))
    return LemmaReport(str(instance_id), delta, lam, cases, all(c.holds for c in cases))


@dataclass
class SlackProbe:
    x: list
    y: list
    prediction: float
    follower_value: float
    slack: float
    expected: float
    holds: bool


def verify_observation1(inst, predictor, n_probes: int = 10, seed: int = 0, lam: float = 1.0,
                        milp: SolveConfig | None = None, tol: float = 1e-6) -> list:
    """With leader and follower fixed, the optimal slack is max(0, NN - f)."""
    from .dataset import sample_decision

    rng = np.random.default_rng(seed)
    cfg = SurrogateConfig(approx="lower", lam=lam, milp=milp or SolveConfig())
    out = []
    for _ in range(n_probes):
        x = sample_decision(inst, rng)
        y = _random_follower(inst, x, rng)
        r = solve_fixed(inst, predictor, x, cfg, y=y)
        expected = max(0.0, r.prediction - r.follower_value)
        out.append(SlackProbe(x.tolist(), y.tolist(), r.prediction, r.follower_value, r.slack, expected,
                              bool(abs(r.slack - expected) <= tol)))
    return out


def _random_follower(inst, x, rng):
    """A random follower-feasible binary response (greedy fill in random order)."""
    y = np.zeros(inst.n)
    for j in rng.permutation(inst.n):
        if rng.random() < 0.5:
            y[j] = 1.0
            if not P.follower_feasible(inst, x, y):
                y[j] = 0.0
    return y
