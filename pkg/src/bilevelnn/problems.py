"""Benchmark bilevel problem families: knapsack interdiction (KIP), critical
node (CNP) and donor-recipient (DRP), plus the one-variable toy problem used
to contrast the upper- and lower-level surrogates.

Follower decisions are 0/1 arrays of length ``n``. DRP additionally has the
continuous external-project share ``y0``, passed separately.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import dataclass, field, fields

import numpy as np

KINDS = ("kip", "cnp", "drp", "toy")
TOL = 1e-9


@dataclass(frozen=True)
class KipInstance:
    p: tuple
    a: tuple
    b: int
    k: int
    seed: int | None = None
    kind: str = field(default="kip", init=False)

    @property
    def n(self) -> int:
        return len(self.p)

    def __post_init__(self):
        if self.n < 1 or len(self.a) != self.n:
            raise ValueError("KIP needs n >= 1 items with matching weights")
        if min(self.p) < 1 or min(self.a) < 1:
            raise ValueError("KIP profits and weights must be >= 1")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"interdiction budget k={self.k} outside [0, n]")
        if not 0 <= self.b < sum(self.a):
            raise ValueError("knapsack capacity must satisfy 0 <= b < sum(a)")


@dataclass(frozen=True)
class CnpInstance:
    pd: tuple
    pa: tuple
    d: tuple
    a: tuple
    D: int
    A: int
    gamma: float
    eta: float
    epsilon: float
    delta: float
    seed: int | None = None
    kind: str = field(default="cnp", init=False)

    @property
    def n(self) -> int:
        return len(self.pd)

    def __post_init__(self):
        if self.n < 1 or not (len(self.pa) == len(self.d) == len(self.a) == self.n):
            raise ValueError("CNP arrays must all have length n >= 1")
        if min(self.pd) <= 0 or min(self.pa) <= 0 or min(self.d) <= 0 or min(self.a) <= 0:
            raise ValueError("CNP profits and costs must be positive")
        for name in ("gamma", "eta", "epsilon", "delta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        # generated budgets stay strictly below the totals; equality is accepted
        if not (0 <= self.D <= sum(self.d) and 0 <= self.A <= sum(self.a)):
            raise ValueError("CNP budgets must lie in [0, total cost]")


@dataclass(frozen=True)
class DrpInstance:
    w: tuple
    v: tuple
    c: tuple
    v0: float
    c0: float
    Bd: float
    Br: float
    seed: int | None = None
    kind: str = field(default="drp", init=False)

    @property
    def n(self) -> int:
        return len(self.w)

    def __post_init__(self):
        if self.n < 1 or not (len(self.v) == len(self.c) == self.n):
            raise ValueError("DRP arrays must all have length n >= 1")
        if min(self.c) <= 0 or self.Bd <= 0 or self.Br <= 0:
            raise ValueError("DRP costs and budgets must be positive")
        if self.v0 < 0 or self.c0 < 0:
            raise ValueError("DRP external project data must be nonnegative")


@dataclass(frozen=True)
class ToyInstance:
    """min y  s.t.  y in argmax{y : 2x + y <= 1, y binary}, x binary."""

    seed: int | None = None
    kind: str = field(default="toy", init=False)

    @property
    def n(self) -> int:
        return 1


Instance = KipInstance | CnpInstance | DrpInstance | ToyInstance

_CLASSES = {"kip": KipInstance, "cnp": CnpInstance, "drp": DrpInstance, "toy": ToyInstance}


def leader_sense(inst) -> str:
    return "min" if inst.kind in ("kip", "toy") else "max"


def _vec(x, n, name="decision"):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({n},)")
    return x


def _is_binary(x):
    return bool(np.all((np.abs(x) < TOL) | (np.abs(x - 1) < TOL)))


def leader_feasible(inst, x) -> bool:
    x = _vec(x, inst.n)
    if inst.kind == "drp":
        if np.any(x < -TOL) or np.any(x > 1 + TOL):
            return False
        return float(np.dot(inst.c, x)) <= inst.Bd + TOL
    if not _is_binary(x):
        return False
    if inst.kind == "kip":
        return x.sum() <= inst.k + TOL
    if inst.kind == "cnp":
        return float(np.dot(inst.d, x)) <= inst.D + TOL
    return True


def follower_feasible(inst, x, y, y0: float = 0.0) -> bool:
    x = _vec(x, inst.n)
    y = _vec(y, inst.n, "follower decision")
    if not _is_binary(y):
        return False
    if inst.kind == "kip":
        return float(np.dot(inst.a, y)) <= inst.b + TOL and bool(np.all(x + y <= 1 + TOL))
    if inst.kind == "cnp":
        return float(np.dot(inst.a, y)) <= inst.A + TOL
    if inst.kind == "drp":
        if not -TOL <= y0 <= 1 + TOL:
            return False
        c = np.asarray(inst.c)
        cost = float(np.dot(c - c * x, y)) + inst.c0 * y0
        return cost <= inst.Br + 1e-7 * max(1.0, inst.Br)
    return 2 * x[0] + y[0] <= 1 + TOL


def leader_objective(inst, x, y, y0: float = 0.0) -> float:
    x = _vec(x, inst.n)
    y = _vec(y, inst.n, "follower decision")
    if inst.kind == "kip":
        return float(np.dot(inst.p, y))
    if inst.kind == "cnp":
        pd = np.asarray(inst.pd, dtype=float)
        per = ((1 - x) * (1 - y) + inst.eta * x * y + inst.epsilon * x * (1 - y)
               + inst.delta * (1 - x) * y)
        return float(np.dot(pd, per))
    if inst.kind == "drp":
        return float(np.dot(inst.w, y))
    return float(y[0])


def follower_objective(inst, x, y, y0: float = 0.0) -> float:
    x = _vec(x, inst.n)
    y = _vec(y, inst.n, "follower decision")
    if inst.kind == "kip":
        return float(np.dot(inst.p, y))
    if inst.kind == "cnp":
        pa = np.asarray(inst.pa, dtype=float)
        per = -inst.gamma * (1 - x) * (1 - y) + (1 - x) * y + (1 - inst.eta) * x * y
        return float(np.dot(pa, per))
    if inst.kind == "drp":
        return float(np.dot(inst.v, y)) + inst.v0 * y0
    return float(y[0])


def greedy_order(inst: KipInstance) -> list:
    """Item indices by strictly decreasing p/a, lower index first on ties."""
    return sorted(range(inst.n), key=lambda i: (-Fraction(inst.p[i], inst.a[i]), i))


def budget_triple(n: int) -> tuple:
    return (math.ceil(n / 4), math.ceil(n / 2), math.ceil(3 * n / 4))


def generate_instance(kind: str, n: int, seed: int, k: int | None = None):
    """Random instance of ``kind`` with ``n`` items/nodes/projects.

    For KIP, ``k`` defaults to a seeded pick from ``budget_triple(n)``.
    """
    if kind not in ("kip", "cnp", "drp"):
        raise ValueError(f"cannot generate instances of kind {kind!r}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    if kind == "kip":
        p = rng.integers(1, 101, n)
        a = rng.integers(1, 101, n)
        if k is None:
            k = int(rng.choice(budget_triple(n)))
        if not 0 <= k <= n:
            raise ValueError(f"k={k} outside [0, n]")
        total = int(a.sum())
        b = min(int(round(0.5 * total)), total - 1)
        return KipInstance(tuple(int(v) for v in p), tuple(int(v) for v in a), b, int(k), seed)
    if kind == "cnp":
        d = rng.integers(1, 26, n)
        a = rng.integers(1, 26, n)
        pd = rng.integers(1, 101, n).astype(float)
        pa = rng.integers(1, 101, n).astype(float)
        D = min(int(round(0.3 * d.sum())), int(d.sum()) - 1)
        A = min(int(round(0.3 * a.sum())), int(a.sum()) - 1)
        g, e, eps, dl = (float(v) for v in rng.uniform(0.05, 0.95, 4))
        return CnpInstance(tuple(float(v) for v in pd), tuple(float(v) for v in pa),
                           tuple(int(v) for v in d), tuple(int(v) for v in a),
                           D, A, g, e, eps, dl, seed)
    w = rng.integers(1, 101, n).astype(float)
    v = rng.integers(1, 101, n).astype(float)
    c = rng.integers(1, 51, n).astype(float)
    return DrpInstance(tuple(float(t) for t in w), tuple(float(t) for t in v),
                       tuple(float(t) for t in c), float(v.mean() / 2), float(c.mean()),
                       float(0.3 * c.sum()), float(0.5 * c.sum()), seed)


def to_dict(inst) -> dict:
    d = {"kind": inst.kind, "n": inst.n}
    for f in fields(inst):
        if f.name == "kind":
            continue
        val = getattr(inst, f.name)
        d[f.name] = list(val) if isinstance(val, tuple) else val
    return d


def from_dict(d: dict):
    cls = _CLASSES[d["kind"]]
    kw = {}
    for f in fields(cls):
        if f.name == "kind" or f.name not in d:
            continue
        val = d[f.name]
        kw[f.name] = tuple(val) if isinstance(val, list) else val
    return cls(**kw)


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path):
    with open(path) as fh:
        return from_dict(json.load(fh))


__all__ = [
    "KINDS", "KipInstance", "CnpInstance", "DrpInstance", "ToyInstance", "Instance",
    "leader_sense", "leader_feasible", "follower_feasible", "leader_objective",
    "follower_objective", "greedy_order", "budget_triple", "generate_instance", "to_dict", "from_dict",
    "save_instance", "load_instance",
]
