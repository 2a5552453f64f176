"""Best-first LP-based branch and bound over a MilpInstance."""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import MilpInstance
from .simplex import LpStatus, solve_lp

log = logging.getLogger(__name__)


# "auto" hands horizons longer than this many steps to HiGHS
AUTO_NATIVE_MAX_STEPS = 24


@dataclass(frozen=True)
class SolverConfig:
    integrality_tol: float = 1e-6
    feasibility_tol: float = 1e-7
    node_limit: int = 100_000
    branching: str = "most_fractional"
    gap_abs: float = 0.0
    gap_rel: float = 0.0
    time_limit_s: float | None = None
    backend: str = "native"
    warm_start: bool = True
    log_tree: bool = False

    def __post_init__(self):
        if self.integrality_tol <= 0 or self.feasibility_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.gap_abs < 0 or self.gap_rel < 0:
            raise ValueError("gap tolerances must be >= 0")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise ValueError("time_limit_s must be positive")
        if self.branching != "most_fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.backend not in ("native", "highs", "auto"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class MilpSolution:
    x: np.ndarray
    objective: float
    nodes: int = 0
    gap: float = 0.0
    lp_bound: float = np.inf
    tree_log: list[str] = field(default_factory=list)


class InfeasibleError(RuntimeError):
    pass


class NodeLimitError(RuntimeError):
    """The node or time budget ran out before optimality was proven."""

    def __init__(self, incumbent: MilpSolution | None, gap: float):
        super().__init__(f"search limit reached; remaining gap {gap:.6g}")
        self.incumbent = incumbent
        self.gap = gap


def _pick_branch(x: np.ndarray, instance: MilpInstance, tol: float) -> int | None:
    ints = np.flatnonzero(instance.integer)
    frac = np.abs(x[ints] - np.round(x[ints]))
    fractional = ints[frac > tol]
    if fractional.size == 0:
        return None
    prio = instance.branch_priority
    if prio is not None:
        ranked = fractional[prio[fractional] > 0]
        # unprioritized columns only when all prioritized ones are integral
        if ranked.size:
            fractional = ranked
    dist = np.abs(x[fractional] - np.floor(x[fractional]) - 0.5)
    best = dist.min()
    ties = fractional[dist <= best + 1e-12]
    if prio is not None:
        ties = ties[prio[ties] == prio[ties].min()]
    return int(ties.min())


def solve_milp(instance: MilpInstance, config: SolverConfig = SolverConfig()) -> MilpSolution:
    """Maximize ``instance`` exactly.

    Nodes are explored best-bound first, deeper nodes first among equal
    bounds, with insertion order as the final tiebreak. Raises
    InfeasibleError when no integral point exists and NodeLimitError when
    the node budget runs out before the gap closes.
    """
    backend = config.backend
    if backend == "auto":
        steps = instance.model.steps if instance.model is not None else 0
        backend = "native" if steps <= AUTO_NATIVE_MAX_STEPS else "highs"
    if backend == "highs":
        from .highs import solve_milp_highs

        return solve_milp_highs(instance, config)

    counter = itertools.count()
    tree: list[str] = []
    root = solve_lp(instance)
    nodes = 1
    if root.status is LpStatus.INFEASIBLE:
        raise InfeasibleError("LP relaxation is infeasible")
    if root.status is LpStatus.UNBOUNDED:
        raise InfeasibleError("LP relaxation is unbounded")
    heap = [(-root.objective, 0, next(counter), instance.lb.copy(), instance.ub.copy(), root)]
    incumbent: MilpSolution | None = None
    best_val = -np.inf

    def close_enough(bound: float) -> bool:
        slack = config.gap_abs + max(config.gap_rel, 1e-9) * max(1.0, abs(best_val))
        return bound <= best_val + slack

    started = time.monotonic()

    while heap:
        neg_bound, neg_depth, _, lb, ub, lp = heapq.heappop(heap)
        bound = -neg_bound
        if incumbent is not None and close_enough(bound):
            break
        j = _pick_branch(lp.x, instance, config.integrality_tol)
        if j is None:
            x = lp.x.copy()
            ints = instance.integer
            x[ints] = np.round(x[ints])
            val = instance.objective_value(x)
            if val > best_val:
                best_val = val
                incumbent = MilpSolution(x, val)
                if config.log_tree:
                    tree.append(f"node depth={-neg_depth} incumbent={val:.9g}")
            continue
        out_of_time = config.time_limit_s is not None and time.monotonic() - started > config.time_limit_s
        if nodes >= config.node_limit or out_of_time:
            gap = bound - best_val if incumbent is not None else np.inf
            raise NodeLimitError(incumbent, gap)
        v = lp.x[j]
        for side, (nlb, nub) in (
            ("down", (lb, _with(ub, j, np.floor(v)))),
            ("up", (_with(lb, j, np.ceil(v)), ub)),
        ):
            child = solve_lp(instance, nlb, nub, warm=lp.basis if config.warm_start else None)
            nodes += 1
            if config.log_tree:
                tree.append(
                    f"branch col={j} ({instance.column_name(j)}) side={side} depth={-neg_depth + 1} "
                    f"status={child.status.value} bound={child.objective:.9g}"
                )
            if child.status is not LpStatus.OPTIMAL:
                continue
            if incumbent is not None and close_enough(child.objective):
                continue
            heapq.heappush(heap, (-child.objective, neg_depth - 1, next(counter), nlb, nub, child))

    if incumbent is None:
        raise InfeasibleError("no integral solution exists")
    if config.log_tree:
        for line in tree:
            log.debug(line)
    incumbent.nodes = nodes
    incumbent.lp_bound = root.objective
    incumbent.tree_log = tree
    return incumbent


def _with(arr: np.ndarray, j: int, v: float) -> np.ndarray:
    out = arr.copy()
    out[j] = v
    return out
