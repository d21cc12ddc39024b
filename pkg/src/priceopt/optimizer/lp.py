"""One-price-per-product revenue maximization as a multiple-choice LP.

Each product contributes three columns (its ladder entries in ascending
discount order). Rows ``0..n-1`` force the selection weights of a product to
sum to one; the last row fixes the sum of selected prices to the budget ``c``.
Prices are in paise, revenues in rupees.
"""
from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import DomainError, format_inr
from ..elasticity import PriceLadder
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, solve_bounded_lp

log = logging.getLogger(__name__)

K = 3
TIE_ORDER = (1, 0, 2)           # base first, then the lower discount
FRACTIONAL_TOL = 1e-7
BRUTE_FORCE_MAX_N = 12


class LpInfeasibleError(DomainError):
    """Budget outside the range reachable by any selection."""


@dataclass
class LpInstance:
    product_ids: list[str]
    prices: np.ndarray          # (n, 3) paise
    demands: np.ndarray         # (n, 3)
    c: float                    # paise
    r: np.ndarray = field(init=False)
    A: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.product_ids)
        self.r = (self.prices / 100.0 * self.demands).reshape(-1)
        A = np.zeros((n + 1, K * n))
        for i in range(n):
            A[i, K * i:K * i + K] = 1.0
        A[n] = self.prices.reshape(-1)
        self.A = A
        self.b = np.concatenate([np.ones(n), [float(self.c)]])

    @property
    def n(self) -> int:
        return len(self.product_ids)

    @property
    def k(self) -> int:
        return K

    @property
    def c_min(self) -> int:
        return int(self.prices.min(axis=1).sum())

    @property
    def c_max(self) -> int:
        return int(self.prices.max(axis=1).sum())


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    n_fractional_products: int
    iterations: int = 0


@dataclass
class PriceAssignment:
    product_ids: list[str]
    choices: list[int]
    prices: list[int]           # chosen prices, paise
    demands: list[float]
    discounts: list[float]

    @property
    def total_price(self) -> int:
        return int(sum(self.prices))

    @property
    def expected_revenue(self) -> float:
        return float(sum(p / 100.0 * d for p, d in zip(self.prices, self.demands)))


def _ladder_arrays(ladders: Sequence[PriceLadder]):
    if not ladders:
        raise DomainError("no ladders to optimize")
    prices = np.array([l.prices for l in ladders], dtype=np.int64)
    demands = np.array([l.demands for l in ladders], dtype=float)
    if prices.shape[1] != K:
        raise DomainError("each ladder needs exactly three entries")
    return prices, demands


def price_range(ladders: Sequence[PriceLadder]) -> tuple[int, int]:
    prices, _ = _ladder_arrays(ladders)
    return int(prices.min(axis=1).sum()), int(prices.max(axis=1).sum())


def build_lp_instance(ladders: Sequence[PriceLadder], c: float) -> LpInstance:
    prices, _demands = _ladder_arrays(ladders)
    lo, hi = int(prices.min(axis=1).sum()), int(prices.max(axis=1).sum())
    if not lo - 1e-9 <= c <= hi + 1e-9:
        raise LpInfeasibleError(f"budget {c} outside [{lo}, {hi}]")
    return LpInstance([l.product_id for l in ladders], prices, _demands, float(c))


def count_fractional(x: np.ndarray, n: int, tol: float = FRACTIONAL_TOL) -> int:
    X = np.asarray(x).reshape(n, K)
    frac = ~((np.abs(X) <= tol) | (np.abs(X - 1) <= tol))
    return int(frac.any(axis=1).sum())


def solve_lp(inst: LpInstance, tol: float = 1e-9) -> LpSolution:
    """Maximize ``r.x`` over the relaxation ``Ax = b, 0 <= x <= 1``."""
    n = inst.n
    A = inst.A.copy()
    b = inst.b.copy()
    # budget row in units of c so its coefficients sit near 1/n
    scale = float(inst.c) if inst.c > 0 else 1.0
    A[n] /= scale
    b[n] /= scale
    r_scale = float(np.abs(inst.r).max()) or 1.0
    res = solve_bounded_lp(inst.r / r_scale, A, b, np.ones(K * n),
                           max_iter=10 * (K * n + n + 1), tol=tol)
    x = res.x
    if res.status != OPTIMAL:
        return LpSolution(x, float("nan"), res.status, count_fractional(x, n), res.iterations)
    return LpSolution(x, float(inst.r @ x), OPTIMAL, count_fractional(x, n), res.iterations)


def _assignment(inst_or_ids, prices, demands, choices, ladders=None) -> PriceAssignment:
    idx = np.arange(len(choices))
    discounts = ([ladders[i].entries[j].discount_pct for i, j in enumerate(choices)]
                 if ladders is not None else [float("nan")] * len(choices))
    return PriceAssignment(list(inst_or_ids), [int(j) for j in choices],
                           [int(v) for v in prices[idx, choices]],
                           [float(v) for v in demands[idx, choices]], discounts)


def round_solution(sol: LpSolution, inst: LpInstance,
                   ladders: Sequence[PriceLadder] | None = None) -> PriceAssignment:
    """Pick the largest-weight entry per product; ties prefer base, then lower discount."""
    if sol.status != OPTIMAL:
        raise DomainError(f"cannot round a {sol.status} solution")
    X = np.asarray(sol.x).reshape(inst.n, K)
    # reorder so argmax's first-hit rule implements the tie order
    order = np.array(TIE_ORDER)
    picked = order[np.argmax(X[:, order], axis=1)]
    return _assignment(inst.product_ids, inst.prices, inst.demands, picked, ladders)


def prefer_base_on_ties(asg: PriceAssignment, inst: LpInstance,
                        ladders: Sequence[PriceLadder] | None = None) -> PriceAssignment:
    """Move products to the base entry when that earns exactly the same revenue.

    Revenue-equal entries (for example a product predicted to sell nothing)
    are otherwise picked arbitrarily by the LP. Total revenue is unchanged.
    """
    choices = list(asg.choices)
    for i, j in enumerate(choices):
        rev = inst.prices[i] / 100.0 * inst.demands[i]
        for t in TIE_ORDER:
            if rev[t] == rev[j]:
                choices[i] = t
                break
    return _assignment(inst.product_ids, inst.prices, inst.demands, np.array(choices), ladders)


def budget_grid(c_min: int, c_max: int, steps: int) -> list[float]:
    """Evenly spaced inclusive grid, computed exactly before conversion to float."""
    if steps < 2:
        raise DomainError("steps must be at least 2")
    span = c_max - c_min
    return [float(c_min + Fraction(k * span, steps - 1)) for k in range(steps)]


def on_grid(c: int, c_min: int, c_max: int, steps: int) -> bool:
    span = c_max - c_min
    if span == 0:
        return c == c_min
    return c_min <= c <= c_max and ((c - c_min) * (steps - 1)) % span == 0


@dataclass
class SweepResult:
    best: PriceAssignment
    best_c: float
    table: list[dict]
    failed_steps: int


def sweep_budget(ladders: Sequence[PriceLadder], steps: int = 101) -> SweepResult:
    """Solve and round on every grid budget; keep the best rounded revenue."""
    c_min, c_max = price_range(ladders)
    grid = budget_grid(c_min, c_max, steps)
    if c_min == c_max:
        grid = grid[:1]
    best, best_c, rows, failed = None, None, [], 0
    for c in grid:
        inst = build_lp_instance(ladders, c)
        sol = solve_lp(inst)
        if sol.status != OPTIMAL:
            failed += 1
            rows.append({"c": c, "lp_objective": float("nan"), "rounded_revenue": float("nan"),
                         "budget_residual": float("nan"), "n_fractional": sol.n_fractional_products})
            continue
        asg = prefer_base_on_ties(round_solution(sol, inst, ladders), inst, ladders)
        rows.append({"c": c, "lp_objective": sol.objective, "rounded_revenue": asg.expected_revenue,
                     "budget_residual": abs(asg.total_price - c),
                     "n_fractional": sol.n_fractional_products})
        if best is None or asg.expected_revenue > best.expected_revenue:
            best, best_c = asg, c
    if failed:
        log.warning("%d of %d sweep steps did not solve", failed, len(grid))
    if best is None:
        raise LpInfeasibleError("no sweep step produced an optimal solution")
    return SweepResult(best, best_c, rows, failed)


def solve_fixed_budget(ladders: Sequence[PriceLadder], c: float) -> PriceAssignment:
    inst = build_lp_instance(ladders, c)
    sol = solve_lp(inst)
    if sol.status == INFEASIBLE:
        raise LpInfeasibleError(f"no feasible selection at budget {c}")
    if sol.status == ITERATION_LIMIT:
        raise DomainError("simplex hit its iteration cap")
    return prefer_base_on_ties(round_solution(sol, inst, ladders), inst, ladders)


def brute_force_optimal(ladders: Sequence[PriceLadder], c: float = 0.0,
                        price_tolerance: float = float("inf")) -> PriceAssignment:
    """Best of all ``3**n`` selections whose price sum is within tolerance of ``c``."""
    prices, demands = _ladder_arrays(ladders)
    n = len(ladders)
    if n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute force refuses n={n} > {BRUTE_FORCE_MAX_N}")
    # enumerate in tie order so the first maximum prefers base entries
    combos = np.array(list(itertools.product(TIE_ORDER, repeat=n)), dtype=np.int64)
    idx = np.arange(n)
    rev = (prices[idx, combos] / 100.0 * demands[idx, combos]).sum(axis=1)
    if np.isfinite(price_tolerance):
        total = prices[idx, combos].sum(axis=1)
        ok = np.abs(total - c) <= price_tolerance
        if not ok.any():
            raise LpInfeasibleError(f"no selection sums to {c} within {price_tolerance}")
        rev = np.where(ok, rev, -np.inf)
    best = combos[int(np.argmax(rev))]
    return _assignment([l.product_id for l in ladders], prices, demands, best, ladders)


SWEEP_COLUMNS = ["c", "lp_objective", "rounded_revenue", "budget_residual", "n_fractional"]
ASSIGNMENT_COLUMNS = ["product_id", "chosen_discount_pct", "chosen_price", "projected_demand",
                      "expected_revenue"]


def _fmt(v: float) -> str:
    return "nan" if v != v else f"{v:.6f}"


def write_sweep_table(rows: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([f"{r['c'] / 100.0:.4f}", _fmt(r["lp_objective"]), _fmt(r["rounded_revenue"]),
                        _fmt(r["budget_residual"] / 100.0), r["n_fractional"]])


def write_assignment(asg: PriceAssignment, path: str | Path) -> None:
    rows = sorted(zip(asg.product_ids, asg.discounts, asg.prices, asg.demands))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASSIGNMENT_COLUMNS)
        for pid, disc, price, demand in rows:
            w.writerow([pid, f"{disc:g}", format_inr(price), f"{demand:.6f}",
                        f"{price / 100.0 * demand:.6f}"])


def read_assignment(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
