"""Exact MILP solving: native simplex and branch and bound, plus a brute-force oracle."""

from .branch_bound import InfeasibleError, MilpSolution, NodeLimitError, SolverConfig, solve_milp
from .oracle import EnumerationCapError, OracleSolution, enumerate_trajectories, oracle_solve, soc_dp_value
from .simplex import LpSolution, LpStatus, SimplexError, solve_lp

__all__ = [
    "EnumerationCapError",
    "InfeasibleError",
    "LpSolution",
    "LpStatus",
    "MilpSolution",
    "NodeLimitError",
    "OracleSolution",
    "SimplexError",
    "SolverConfig",
    "enumerate_trajectories",
    "oracle_solve",
    "solve_lp",
    "solve_milp",
    "soc_dp_value",
]
