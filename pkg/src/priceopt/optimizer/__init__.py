from .lp import (
    ASSIGNMENT_COLUMNS,
    SWEEP_COLUMNS,
    LpInfeasibleError,
    LpInstance,
    LpSolution,
    PriceAssignment,
    SweepResult,
    brute_force_optimal,
    budget_grid,
    build_lp_instance,
    count_fractional,
    on_grid,
    prefer_base_on_ties,
    price_range,
    read_assignment,
    round_solution,
    solve_fixed_budget,
    solve_lp,
    sweep_budget,
    write_assignment,
    write_sweep_table,
)
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SimplexResult, solve_bounded_lp

__all__ = [
    "ASSIGNMENT_COLUMNS", "INFEASIBLE", "ITERATION_LIMIT", "LpInfeasibleError", "LpInstance",
    "LpSolution", "OPTIMAL", "PriceAssignment", "SWEEP_COLUMNS", "SimplexResult", "SweepResult",
    "brute_force_optimal", "budget_grid", "build_lp_instance", "count_fractional", "on_grid", "prefer_base_on_ties",
    "price_range", "read_assignment", "round_solution", "solve_bounded_lp", "solve_fixed_budget",
    "solve_lp", "sweep_budget", "UNBOUNDED", "write_assignment", "write_sweep_table",
]
