"""Linear program container: maximize c.x over bounded variables and sparse rows."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf
RELATIONS = ("<=", "==", ">=")


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class Constraint:
    coeffs: dict[int, float]
    relation: str
    rhs: float


@dataclass
class LpProblem:
    """A maximization problem built incrementally.

    Variables are added with :meth:`add_var` and rows with
    :meth:`add_constraint`; both return the new index.
    """

    objective: list[float] = field(default_factory=list)
    var_bounds: list[tuple[float, float]] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    names: list[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str = "", lower: float = 0.0, upper: float = INF, objective: float = 0.0) -> int:
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower bound {lower} exceeds upper bound {upper}")
        self.objective.append(float(objective))
        self.var_bounds.append((float(lower), float(upper)))
        self.names.append(name or f"x{len(self.objective) - 1}")
        return len(self.objective) - 1

    def add_constraint(self, coeffs: Mapping[int, float], relation: str, rhs: float) -> int:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        row: dict[int, float] = {}
        for j, a in coeffs.items():
            if not 0 <= j < self.num_vars:
                raise IndexError(f"constraint references variable {j}, have {self.num_vars}")
            if a != 0.0:
                row[int(j)] = row.get(int(j), 0.0) + float(a)
        self.constraints.append(Constraint(row, relation, float(rhs)))
        return len(self.constraints) - 1

    def set_bounds(self, j: int, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"variable {self.names[j]!r}: lower bound {lower} exceeds upper bound {upper}")
        self.var_bounds[j] = (float(lower), float(upper))

    def validate(self) -> None:
        n = self.num_vars
        if len(self.var_bounds) != n or len(self.names) != n:
            raise ValueError("objective, bounds and names must have one entry per variable")
        for j, (lo, hi) in enumerate(self.var_bounds):
            if lo > hi:
                raise ValueError(f"variable {j}: lower bound exceeds upper bound")
            if lo == INF or hi == -INF:
                raise ValueError(f"variable {j}: infinite bound on the wrong side")
        for i, con in enumerate(self.constraints):
            if con.relation not in RELATIONS:
                raise ValueError(f"row {i}: unknown relation {con.relation!r}")
            for j in con.coeffs:
                if not 0 <= j < n:
                    raise IndexError(f"row {i} references variable {j}, have {n}")

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.num_constraints, self.num_vars))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def dump(self, path) -> None:
        """Write a plain-text listing for cross-checking with other solvers.

        Layout: ``max`` line with the objective as ``j:c`` pairs, one
        ``bound j lo hi`` line per variable, then one line per row of
        ``j:a`` pairs, relation and right-hand side.
        """
        lines = [f"vars {self.num_vars}", f"rows {self.num_constraints}"]
        lines.append("max " + " ".join(f"{j}:{c!r}" for j, c in enumerate(self.objective) if c != 0.0))
        for j, (lo, hi) in enumerate(self.var_bounds):
            lines.append(f"bound {j} {lo!r} {hi!r} {self.names[j]}")
        for con in self.constraints:
            terms = " ".join(f"{j}:{a!r}" for j, a in sorted(con.coeffs.items()))
            lines.append(f"{terms} {con.relation} {con.rhs!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "LpProblem":
        p = cls()
        lines = Path(path).read_text().splitlines()
        n = int(lines[0].split()[1])
        m = int(lines[1].split()[1])
        obj = dict(_pair(tok) for tok in lines[2].split()[1:])
        for k in range(n):
            parts = lines[3 + k].split(maxsplit=4)
            j, lo, hi = int(parts[1]), float(parts[2]), float(parts[3])
            name = parts[4] if len(parts) > 4 else ""
            if j != k:
                raise ValueError(f"bound lines out of order at line {4 + k}")
            p.add_var(name, lo, hi, obj.get(j, 0.0))
        for k in range(m):
            toks = lines[3 + n + k].split()
            coeffs = dict(_pair(tok) for tok in toks[:-2])
            p.add_constraint(coeffs, toks[-2], float(toks[-1]))
        return p


def _pair(tok: str) -> tuple[int, float]:
    j, a = tok.split(":")
    return int(j), float(a)


@dataclass
class LpSolution:
    """Solver result.

    ``duals`` holds one value per row: the rate of change of the optimal
    objective with respect to that row's right-hand side.  ``reduced_costs``
    are ``c - A^T y`` per variable.
    """

    status: Status
    primal: np.ndarray
    duals: np.ndarray
    objective_value: float
    reduced_costs: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def add_abs_penalty(p: LpProblem, expr: Mapping[int, float], weight: float, name: str = "", constant: float = 0.0) -> int:
    """Append ``s >= |expr + constant|`` and charge ``weight * s`` to the objective."""
    if weight < 0:
        raise ValueError("penalty weight must be non-negative")
    s = p.add_var(name or f"abs{p.num_vars}", 0.0, INF, -weight)
    # s - expr >= constant ; s + expr >= -constant
    pos = {s: 1.0}
    neg = {s: 1.0}
    for j, a in expr.items():
        pos[j] = pos.get(j, 0.0) - a
        neg[j] = neg.get(j, 0.0) + a
    p.add_constraint(pos, ">=", constant)
    p.add_constraint(neg, ">=", -constant)
    return s


def residuals(p: LpProblem, x: np.ndarray) -> tuple[float, float]:
    """Largest row violation and largest bound violation of ``x``."""
    row_viol = 0.0
    if p.num_constraints:
        ax = p.matrix() @ x
        for i, con in enumerate(p.constraints):
            diff = ax[i] - con.rhs
            if con.relation == "<=":
                v = max(diff, 0.0)
            elif con.relation == ">=":
                v = max(-diff, 0.0)
            else:
                v = abs(diff)
            row_viol = max(row_viol, v)
    lo = np.array([b[0] for b in p.var_bounds])
    hi = np.array([b[1] for b in p.var_bounds])
    bound_viol = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
    return float(row_viol), bound_viol
