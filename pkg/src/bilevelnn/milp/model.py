"""Model representation for small mixed-integer linear programs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SENSES = ("<=", ">=", "==")


class Var:
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name

    def __repr__(self):
        return f"Var({self.name})"

    def _expr(self):
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-self._expr()) + other

    def __mul__(self, other):
        return self._expr() * other

    __rmul__ = __mul__

    def __neg__(self):
        return -self._expr()


class LinExpr:
    """Affine expression: sum of coef * var plus a constant."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: dict | None = None, constant: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.constant = float(constant)

    def copy(self):
        return LinExpr(self.terms, self.constant)

    def __repr__(self):
        return f"LinExpr({self.terms}, {self.constant})"

    def __add__(self, other):
        out = self.copy()
        other = as_expr(other)
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + v
        out.constant += other.constant
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        if isinstance(scalar, (LinExpr, Var)):
            raise TypeError("products of expressions are not linear")
        s = float(scalar)
        return LinExpr({k: v * s for k, v in self.terms.items()}, self.constant * s)

    __rmul__ = __mul__

    def value(self, assignment) -> float:
        total = self.constant
        for k, v in self.terms.items():
            total += v * float(assignment[k])
        return total

    def is_constant(self) -> bool:
        return all(v == 0.0 for v in self.terms.values())


def as_expr(obj) -> LinExpr:
    if isinstance(obj, LinExpr):
        return obj
    if isinstance(obj, Var):
        return obj._expr()
    return LinExpr(constant=float(obj))


def quicksum(items) -> LinExpr:
    out = LinExpr()
    for it in items:
        it = as_expr(it)
        for k, v in it.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + v
        out.constant += it.constant
    return out


@dataclass
class Constraint:
    coefs: dict
    sense: str
    rhs: float
    name: str


@dataclass
class MilpModel:
    name: str = "model"
    names: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    integer: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    sense: str = "min"
    tags: dict = field(default_factory=dict)
    priority: list = field(default_factory=list)  # branch on higher values first

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_var(self, name=None, lb=0.0, ub=1.0, integer=False, priority: int = 0) -> Var:
        if not (np.isfinite(lb) and np.isfinite(ub)):
            raise ValueError(f"variable {name!r} needs finite bounds")
        if lb > ub:
            raise ValueError(f"variable {name!r} has lb > ub")
        idx = len(self.names)
        self.names.append(name if name is not None else f"v{idx}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.priority.append(int(priority))
        return Var(idx, self.names[-1])

    def add_binary(self, name=None, priority: int = 0) -> Var:
        return self.add_var(name, 0.0, 1.0, integer=True, priority=priority)

    def var(self, index: int) -> Var:
        return Var(index, self.names[index])

    def add_constr(self, lhs, sense: str, rhs=0.0, name=None) -> Constraint:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        expr = as_expr(lhs) - as_expr(rhs)
        coefs = {k: v for k, v in expr.terms.items() if v != 0.0}
        if not all(np.isfinite(v) for v in coefs.values()) or not np.isfinite(expr.constant):
            raise ValueError("constraint coefficients must be finite")
        con = Constraint(coefs, sense, -expr.constant,
                         name if name is not None else f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def set_objective(self, expr, sense="min"):
        if sense not in ("min", "max"):
            raise ValueError(f"unknown objective sense {sense!r}")
        self.objective = as_expr(expr).copy()
        self.sense = sense

    def fix(self, var, value: float):
        i = var.index if isinstance(var, Var) else int(var)
        self.lb[i] = self.ub[i] = float(value)

    def copy(self) -> "MilpModel":
        return MilpModel(
            self.name, list(self.names), list(self.lb), list(self.ub), list(self.integer),
            [Constraint(dict(c.coefs), c.sense, c.rhs, c.name) for c in self.constraints],
            self.objective.copy(), self.sense, dict(self.tags), list(self.priority))

    def to_arrays(self):
        """Dense (c, A, senses, b, lb, ub, integer) arrays; c in the model's own sense."""
        n = self.num_vars
        A = np.zeros((len(self.constraints), n))
        b = np.zeros(len(self.constraints))
        senses = []
        for i, con in enumerate(self.constraints):
            for k, v in con.coefs.items():
                A[i, k] += v
            b[i] = con.rhs
            senses.append(con.sense)
        c = np.zeros(n)
        for k, v in self.objective.terms.items():
            c[k] += v
        return (c, A, np.array(senses, dtype=object), b, np.array(self.lb, dtype=float),
                np.array(self.ub, dtype=float), np.array(self.integer, dtype=bool))

    def num_binaries(self) -> int:
        return sum(1 for i in range(self.num_vars)
                   if self.integer[i] and self.lb[i] == 0.0 and self.ub[i] == 1.0)


@dataclass
class SolveConfig:
    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    gap_tol: float = 1e-9
    node_limit: int | None = None
    time_limit: float | None = None
    propagate: bool = True  # bound tightening at every node

    def __post_init__(self):
        if min(self.feas_tol, self.int_tol, self.gap_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class MilpSolution:
    values: np.ndarray | None
    objective: float | None
    status: str
    nodes: int = 0
    wall_time: float = 0.0
    bound: float | None = None

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    def __getitem__(self, var) -> float:
        if self.values is None:
            raise ValueError(f"no solution ({self.status})")
        return float(self.values[var.index if isinstance(var, Var) else var])

    def value(self, expr) -> float:
        if self.values is None:
            raise ValueError(f"no solution ({self.status})")
        return as_expr(expr).value(self.values)
