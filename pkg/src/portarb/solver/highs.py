"""Optional HiGHS backend for year-scale runs where exact native B&B is slow."""

from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..milp import EQ, GE, LE, MilpInstance
from .simplex import LpStatus, solve_lp

log = logging.getLogger(__name__)


def constraint_bounds(instance: MilpInstance) -> tuple[np.ndarray, np.ndarray]:
    lo = np.where((instance.sense == GE) | (instance.sense == EQ), instance.rhs, -np.inf)
    hi = np.where((instance.sense == LE) | (instance.sense == EQ), instance.rhs, np.inf)
    return lo, hi


def solve_milp_highs(instance: MilpInstance, config):
    """Solve with HiGHS; the result is exact only when no limit was hit.

    When the time limit stops HiGHS with an incumbent, it is returned with
    its remaining gap and a warning is logged.
    """
    from .branch_bound import InfeasibleError, MilpSolution, NodeLimitError

    options = {"mip_rel_gap": config.gap_rel}
    if config.time_limit_s is not None:
        options["time_limit"] = config.time_limit_s
    lo, hi = constraint_bounds(instance)
    res = milp(
        -instance.objective,
        constraints=LinearConstraint(instance.A, lo, hi),
        integrality=instance.integer.astype(int),
        bounds=Bounds(instance.lb, instance.ub),
        options=options,
    )
    if res.x is None:
        if res.status == 2:
            raise InfeasibleError(f"HiGHS: {res.message}")
        raise NodeLimitError(None, float("inf"))
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    if res.status != 0:
        log.warning("HiGHS stopped early (%s); returning incumbent with relative gap %.3g", res.message, gap)
    x = np.asarray(res.x, dtype=float).copy()
    z = np.round(x[instance.integer])
    x[instance.integer] = z
    if not instance.is_feasible(x, config.feasibility_tol):
        # re-solve the continuous part natively with the integers fixed
        lb, ub = instance.lb.copy(), instance.ub.copy()
        lb[instance.integer] = z
        ub[instance.integer] = z
        lp = solve_lp(instance, lb, ub)
        if lp.status is not LpStatus.OPTIMAL:
            raise InfeasibleError(f"continuous polish after HiGHS failed: {lp.status.value}")
        x = lp.x.copy()
        x[instance.integer] = z
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    return MilpSolution(x, instance.objective_value(x), nodes=nodes, gap=gap)
