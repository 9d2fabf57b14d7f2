"""Bounded-variable linear programming.

:func:`solve` maximizes an :class:`LpProblem`.  The default route hands the
sparse problem to HiGHS through :func:`scipy.optimize.linprog`; the
``"simplex"`` route runs the dense revised simplex in
:mod:`esskit.lp.simplex`.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .problem import (
    INF,
    Constraint,
    LpProblem,
    LpSolution,
    Status,
    add_abs_penalty,
    residuals,
)
from .simplex import solve_dense

__all__ = [
    "INF",
    "Constraint",
    "LpProblem",
    "LpSolution",
    "Status",
    "add_abs_penalty",
    "residuals",
    "solve",
]

METHODS = ("highs", "simplex")


def solve(p: LpProblem, method: str = "highs") -> LpSolution:
    p.validate()
    if method == "highs":
        return _solve_highs(p)
    if method == "simplex":
        return _solve_simplex(p)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _empty(status: Status) -> LpSolution:
    return LpSolution(status, np.empty(0), np.empty(0), math.nan)


def _solve_simplex(p: LpProblem) -> LpSolution:
    A = p.matrix().toarray()
    rel = [c.relation for c in p.constraints]
    b = [c.rhs for c in p.constraints]
    lo = [bd[0] for bd in p.var_bounds]
    hi = [bd[1] for bd in p.var_bounds]
    res = solve_dense(p.objective, A, rel, b, lo, hi)
    if res.status != "Optimal":
        return _empty(Status(res.status))
    return LpSolution(Status.OPTIMAL, res.x, res.y, res.obj, res.d, res.iterations)


def _solve_highs(p: LpProblem) -> LpSolution:
    n = p.num_vars
    c = -np.asarray(p.objective, dtype=float)
    A = p.matrix()
    rel = np.array([con.relation for con in p.constraints])
    b = np.array([con.rhs for con in p.constraints], dtype=float)
    le = np.flatnonzero(rel == "<=")
    ge = np.flatnonzero(rel == ">=")
    eq = np.flatnonzero(rel == "==")
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if len(ub_rows) else None
    b_ub = np.concatenate([b[le], -b[ge]]) if len(ub_rows) else None
    A_eq = A[eq] if len(eq) else None
    b_eq = b[eq] if len(eq) else None
    bounds = [(None if lo == -INF else lo, None if hi == INF else hi) for lo, hi in p.var_bounds]
    if n == 0:
        return _solve_simplex(p)
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
            "presolve": True,
        },
    )
    if res.status == 2:
        return _empty(Status.INFEASIBLE)
    if res.status == 3:
        return _empty(Status.UNBOUNDED)
    if res.status == 4 and "infeasible or unbounded" in (res.message or "").lower():
        return _resolve_ambiguous(p)
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")

    x = np.asarray(res.x, dtype=float)
    y = np.zeros(p.num_constraints)
    if len(ub_rows):
        m_ub = np.asarray(res.ineqlin.marginals)
        y[le] = -m_ub[: len(le)]
        y[ge] = m_ub[len(le):]
    if len(eq):
        y[eq] = -np.asarray(res.eqlin.marginals)
    d = np.asarray(p.objective) - A.T @ y
    return LpSolution(Status.OPTIMAL, x, y, float(np.dot(p.objective, x)), d, int(res.nit))


def _resolve_ambiguous(p: LpProblem) -> LpSolution:
    # feasibility check with a zero objective decides between the two
    probe = LpProblem([0.0] * p.num_vars, list(p.var_bounds), p.constraints, list(p.names))
    res = _solve_highs(probe)
    if res.status is Status.INFEASIBLE:
        return res
    return _empty(Status.UNBOUNDED)
