"""Dense two-phase primal simplex for equality-form LPs with box bounds.

Solves ``max c.x  s.t.  A x = b,  0 <= x <= u`` where ``u`` may be infinite.
Nonbasic variables sit at either bound, so a bounded variable can move from
0 to ``u`` in one step without entering the basis (a bound flip). Entering
and leaving choices follow Bland's smallest-index rule, which rules out
cycling on degenerate vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"
UNBOUNDED = "unbounded"


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    basis: np.ndarray


class _Tableau:
    def __init__(self, T, xB, basis, upper, at_upper, tol):
        self.T = T
        self.xB = xB
        self.basis = basis
        self.upper = upper
        self.at_upper = at_upper
        self.tol = tol
        self.is_basic = np.zeros(T.shape[1], dtype=bool)
        self.is_basic[basis] = True

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    def pivot(self, r, j, d):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        d -= d[j] * T[r]
        self.is_basic[self.basis[r]] = False
        self.is_basic[j] = True
        self.basis[r] = j

    def run(self, cost, allowed, budget):
        """Iterate to optimality; returns (status, iterations used)."""
        tol = self.tol
        d = self.reduced_costs(cost)
        it = 0
        while True:
            cand = allowed & ~self.is_basic & (
                (~self.at_upper & (d > tol)) | (self.at_upper & (d < -tol)))
            if not cand.any():
                return OPTIMAL, it
            if it >= budget:
                return ITERATION_LIMIT, it
            it += 1
            j = int(np.argmax(cand))                 # smallest eligible index
            s = -1.0 if self.at_upper[j] else 1.0
            alpha = s * self.T[:, j]                 # xB(t) = xB - t * alpha
            ub = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                lim_low = np.where(alpha > tol, np.maximum(self.xB, 0.0) / alpha, np.inf)
                lim_up = np.where((alpha < -tol) & np.isfinite(ub),
                                  np.maximum(ub - self.xB, 0.0) / -alpha, np.inf)
            lim = np.minimum(lim_low, lim_up)
            t_row = lim.min() if len(lim) else np.inf
            t_flip = self.upper[j]
            if not np.isfinite(t_row) and not np.isfinite(t_flip):
                return UNBOUNDED, it
            if t_flip <= t_row:
                self.xB -= t_flip * alpha
                self.at_upper[j] = not self.at_upper[j]
                continue
            ties = np.flatnonzero(lim <= t_row + 1e-12 * max(1.0, t_row))
            r = int(ties[np.argmin(self.basis[ties])])
            leaving = self.basis[r]
            hits_upper = lim_up[r] <= lim_low[r]
            entering_value = (self.upper[j] if self.at_upper[j] else 0.0) + s * t_row
            self.xB -= t_row * alpha
            self.xB[r] = entering_value
            self.at_upper[leaving] = bool(hits_upper)
            self.at_upper[j] = False
            self.pivot(r, j, d)

    def values(self, n_total):
        x = np.where(self.at_upper, self.upper, 0.0)
        x[self.basis] = self.xB
        return x[:n_total]


def solve_bounded_lp(c, A, b, upper, max_iter: int, tol: float = 1e-9,
                     feas_tol: float = 1e-7) -> SimplexResult:
    """Maximize ``c.x`` subject to ``A x = b`` and ``0 <= x <= upper``.

    ``max_iter`` caps pivots plus bound flips over both phases.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # Phase I: one artificial per row, minimize their sum
    T = np.hstack([A, np.eye(m)])
    up = np.concatenate([upper, np.full(m, np.inf)])
    tab = _Tableau(T, b.copy(), np.arange(n, n + m), up, np.zeros(n + m, dtype=bool), tol)
    allowed = np.ones(n + m, dtype=bool)
    cost1 = np.concatenate([np.zeros(n), -np.ones(m)])
    status, used = tab.run(cost1, allowed, max_iter)
    if status == ITERATION_LIMIT:
        return SimplexResult(tab.values(n), float("nan"), ITERATION_LIMIT, used, tab.basis.copy())
    artificial_sum = float(np.sum(tab.xB[tab.basis >= n]))
    if artificial_sum > feas_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return SimplexResult(tab.values(n), float("nan"), INFEASIBLE, used, tab.basis.copy())

    # drive zero-valued artificials out of the basis where a real column allows it
    for r in np.flatnonzero(tab.basis >= n):
        row = tab.T[r, :n]
        cand = np.flatnonzero((np.abs(row) > tol) & ~tab.is_basic[:n])
        if len(cand):
            j = int(cand[0])
            value = tab.upper[j] if tab.at_upper[j] else 0.0
            tab.xB[r] = value
            tab.at_upper[j] = False
            tab.pivot(r, j, np.zeros(n + m))
        # otherwise the row is redundant and its artificial stays at zero

    allowed[n:] = False
    cost2 = np.concatenate([c, np.zeros(m)])
    status, used2 = tab.run(cost2, allowed, max_iter - used)
    # refresh basic values from the final basis to shed accumulated drift
    full = np.hstack([A, np.eye(m)])
    nonbasic_up = tab.at_upper & ~tab.is_basic
    rhs = b - full[:, nonbasic_up] @ tab.upper[nonbasic_up]
    try:
        tab.xB = np.linalg.solve(full[:, tab.basis], rhs)
    except np.linalg.LinAlgError:
        pass
    x = tab.values(n)
    x = np.clip(x, 0.0, upper)
    # values within the pivot tolerance of a bound are that bound
    x[x <= tol] = 0.0
    near_up = np.isfinite(upper) & (np.abs(x - upper) <= tol)
    x[near_up] = upper[near_up]
    return SimplexResult(x, float(c @ x), status, used + used2, tab.basis.copy())
