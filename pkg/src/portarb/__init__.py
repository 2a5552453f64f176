"""Joint dispatch and trucking optimization for portable battery storage."""

from .core import (
    BoundaryState,
    DegradationParams,
    HorizonConfig,
    InTransit,
    ModelParams,
    PriceSeries,
    Site,
    StorageSpec,
    TransportSpec,
    TruckSpec,
    calendar_equivalent_throughput,
    throughput_budget,
    validate,
)
from .milp import DispatchSchedule, build_day_instance, check_feasibility, extract_schedule, write_mps
from .simulate import Mode, compare, lifetime_npv, run_day, run_horizon, run_lifetime
from .solver import SolverConfig, oracle_solve, solve_lp, solve_milp

__version__ = "0.1.0"

__all__ = [
    "BoundaryState",
    "DegradationParams",
    "DispatchSchedule",
    "HorizonConfig",
    "InTransit",
    "Mode",
    "ModelParams",
    "PriceSeries",
    "Site",
    "SolverConfig",
    "StorageSpec",
    "TransportSpec",
    "TruckSpec",
    "build_day_instance",
    "calendar_equivalent_throughput",
    "check_feasibility",
    "compare",
    "extract_schedule",
    "lifetime_npv",
    "oracle_solve",
    "run_day",
    "run_horizon",
    "run_lifetime",
    "solve_lp",
    "solve_milp",
    "throughput_budget",
    "validate",
    "write_mps",
]
