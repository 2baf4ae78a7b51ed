"""Small mixed-integer linear programming core."""

from .model import Constraint, LinExpr, MilpModel, MilpSolution, SolveConfig, Var, as_expr, quicksum
from .simplex import BoundedLP, LPResult, solve_lp_arrays
from .solver import Violation, check, propagate, solve, solve_lp, write_lp

__all__ = [
    "Constraint", "LinExpr", "MilpModel", "MilpSolution", "SolveConfig", "Var", "as_expr", "quicksum",
    "BoundedLP", "LPResult", "solve_lp_arrays", "Violation", "check", "propagate", "solve", "solve_lp", "write_lp",
]
