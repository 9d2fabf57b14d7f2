"""Dense bounded-variable revised simplex.

Every row gets a slack so the system reads ``A x + s = b`` with slack
bounds encoding the relation.  Phase one starts from an artificial basis
and minimizes the artificial sum; phase two then optimizes the real
objective with the artificials pinned at zero.  Dantzig pricing is used
until ``5 * n`` consecutive degenerate pivots, after which Bland's rule
takes over for the rest of the solve.

Intended for small and medium problems (tests, cross-checks); the
sparse production path is :func:`esskit.lp.solve` with ``method="highs"``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg as la

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-7


class _Unbounded(Exception):
    pass


class SimplexResult:
    def __init__(self, status, x, y, d, obj, iterations):
        self.status = status
        self.x = x
        self.y = y
        self.d = d
        self.obj = obj
        self.iterations = iterations


class _Tableau:
    """Working state: column matrix, bounds, basis and nonbasic values."""

    def __init__(self, M, b, lo, hi, basis, x):
        self.M = M
        self.b = b
        self.lo = lo
        self.hi = hi
        self.basis = basis
        self.x = x
        self.iterations = 0

    def factor(self):
        return la.lu_factor(self.M[:, self.basis])

    def basic_values(self, lu):
        nonbasic = np.ones(self.M.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = la.lu_solve(lu, rhs)

    def run(self, c, frozen, max_iter):
        """Optimize ``c.x`` (maximize); ``frozen`` columns never enter."""
        m, ncol = self.M.shape
        degenerate = 0
        bland = False
        nbasic_mask = np.ones(ncol, dtype=bool)
        while True:
            if self.iterations >= max_iter:
                raise RuntimeError("simplex iteration limit reached")
            lu = self.factor()
            self.basic_values(lu)
            y = la.lu_solve(lu, c[self.basis], trans=1)
            d = c - self.M.T @ y
            nbasic_mask[:] = True
            nbasic_mask[self.basis] = False
            can_up = nbasic_mask & ~frozen & (d > OPT_TOL) & (self.x < self.hi - FEAS_TOL)
            can_dn = nbasic_mask & ~frozen & (d < -OPT_TOL) & (self.x > self.lo + FEAS_TOL)
            cand = np.flatnonzero(can_up | can_dn)
            if cand.size == 0:
                return y, d
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[j] > 0 else -1.0
            alpha = la.lu_solve(lu, self.M[:, j])
            step, leave, leave_to = self._ratio_test(j, direction, alpha, bland)
            if math.isinf(step):
                raise _Unbounded()
            self.iterations += 1
            if step <= 1e-12:
                degenerate += 1
                if degenerate > 5 * ncol:
                    bland = True
            else:
                degenerate = 0
            self.x[self.basis] -= step * direction * alpha
            self.x[j] += step * direction
            if leave is None:
                # bound flip of the entering variable
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
                continue
            out = self.basis[leave]
            self.x[out] = leave_to
            self.basis[leave] = j

    def _ratio_test(self, j, direction, alpha, bland):
        best = self.hi[j] - self.lo[j]
        leave, leave_to = None, None
        best_piv = 0.0
        rate = -direction * alpha
        xb = self.x[self.basis]
        for i in range(len(self.basis)):
            ri = rate[i]
            if abs(ri) <= PIVOT_TOL:
                continue
            k = self.basis[i]
            if ri < 0:
                if self.lo[k] == -math.inf:
                    continue
                t = max(xb[i] - self.lo[k], 0.0) / -ri
                bound = self.lo[k]
            else:
                if self.hi[k] == math.inf:
                    continue
                t = max(self.hi[k] - xb[i], 0.0) / ri
                bound = self.hi[k]
            if t < best - 1e-12:
                best, leave, leave_to, best_piv = t, i, bound, abs(ri)
            elif leave is not None and abs(t - best) <= 1e-12:
                if bland:
                    if k < self.basis[leave]:
                        leave, leave_to, best_piv = i, bound, abs(ri)
                elif abs(ri) > best_piv:
                    leave, leave_to, best_piv = i, bound, abs(ri)
        return best, leave, leave_to


def _home(lo, hi):
    if lo > -math.inf:
        return lo
    if hi < math.inf:
        return hi
    return 0.0


def solve_dense(c, A, relations, b, lo, hi, max_iter=None) -> SimplexResult:
    """Maximize ``c.x`` s.t. ``A x (rel) b`` and ``lo <= x <= hi``.

    ``relations`` holds one of ``"<=", "==", ">="`` per row.
    Returns status ``"Optimal"``, ``"Infeasible"`` or ``"Unbounded"``.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(b), len(c))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (n + 2 * m) + 1000

    slack_lo = np.array([0.0 if r == "<=" else (-math.inf if r == ">=" else 0.0) for r in relations])
    slack_hi = np.array([math.inf if r == "<=" else 0.0 for r in relations])
    lo_s = np.concatenate([np.asarray(lo, float), slack_lo])
    hi_s = np.concatenate([np.asarray(hi, float), slack_hi])
    x = np.array([_home(l, h) for l, h in zip(lo_s, hi_s)])

    residual = b - A @ x[:n] - x[n:]
    sign = np.where(residual >= 0, 1.0, -1.0)
    M = np.hstack([A, np.eye(m), np.diag(sign)])
    lo_all = np.concatenate([lo_s, np.zeros(m)])
    hi_all = np.concatenate([hi_s, np.full(m, math.inf)])
    x_all = np.concatenate([x, np.abs(residual)])
    basis = np.arange(n + m, n + 2 * m)
    tab = _Tableau(M, b, lo_all, hi_all, basis, x_all)
    art = np.zeros(n + 2 * m, dtype=bool)
    art[n + m:] = True

    if m:
        c1 = np.where(art, -1.0, 0.0)
        tab.run(c1, np.zeros_like(art), max_iter)
        if -c1 @ tab.x > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return SimplexResult("Infeasible", None, None, None, None, tab.iterations)
        _drive_out_artificials(tab, art)
        tab.hi[art] = 0.0
        tab.x[art] = 0.0

    c2 = np.concatenate([c, np.zeros(2 * m)])
    try:
        y, d = tab.run(c2, art, max_iter) if m else _no_rows(tab, c2)
    except _Unbounded:
        return SimplexResult("Unbounded", None, None, None, None, tab.iterations)
    xs = tab.x[:n].copy()
    return SimplexResult("Optimal", xs, y, d[:n], float(c @ xs), tab.iterations)


def _no_rows(tab, c):
    # no constraints: every variable sits at its best bound
    for j, cj in enumerate(c):
        if cj > OPT_TOL:
            if tab.hi[j] == math.inf:
                raise _Unbounded()
            tab.x[j] = tab.hi[j]
        elif cj < -OPT_TOL:
            if tab.lo[j] == -math.inf:
                raise _Unbounded()
            tab.x[j] = tab.lo[j]
    return np.zeros(0), c.copy()


def _drive_out_artificials(tab, art):
    """Pivot zero-valued artificials out of the basis where a real column allows it."""
    lu = tab.factor()
    for i in range(len(tab.basis)):
        if not art[tab.basis[i]]:
            continue
        e = np.zeros(len(tab.basis))
        e[i] = 1.0
        row = la.lu_solve(lu, e, trans=1) @ tab.M
        cand = np.flatnonzero((np.abs(row) > 1e-7) & ~art)
        basic = set(tab.basis.tolist())
        cand = [j for j in cand if j not in basic]
        if not cand:
            continue  # redundant row; artificial stays basic at zero
        j = max(cand, key=lambda k: abs(row[k]))
        tab.x[tab.basis[i]] = 0.0
        tab.basis[i] = j
        lu = tab.factor()
        tab.basic_values(lu)
