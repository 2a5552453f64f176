"""Multi-day and lifetime simulation of portable versus stationary storage.

Days are optimized one at a time with perfect foresight of that day's
prices. End-of-day energy, location and recent travel carry into the next
day. Battery wear is tracked as energy throughput (charge plus discharge)
plus a calendar-equivalent daily amount; life ends when the cumulative
total reaches the lifetime budget.

Revenue here means cash: market revenue minus trucking cost. The
degradation charge is an opportunity cost used only to steer dispatch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BoundaryState, InTransit, ModelParams, PriceSeries, Site
from .milp import DispatchSchedule, build_day_instance, extract_schedule
from .solver import SolverConfig, solve_milp

log = logging.getLogger(__name__)

DAYS_PER_SIM_YEAR = 365


@dataclass(frozen=True)
class Mode:
    """Portable operation, or stationary operation pinned to one node."""

    site: Site | None = None

    @property
    def portable(self) -> bool:
        return self.site is None

    @property
    def name(self) -> str:
        return "portable" if self.site is None else f"stationary_{self.site.value}"

    @classmethod
    def stationary(cls, site: Site = Site.B) -> "Mode":
        return cls(site)

    def default_boundary(self) -> BoundaryState:
        return BoundaryState(location=self.site or Site.A)


PORTABLE = Mode()


class SimulationError(RuntimeError):
    def __init__(self, day: int, label: str, cause: Exception):
        super().__init__(f"day {day} ({label or 'unlabelled'}): {cause}")
        self.day = day
        self.label = label
        self.cause = cause


@dataclass(frozen=True)
class RunOptions:
    solver: SolverConfig = SolverConfig()
    linking: bool = True
    arrival_energy_mwh: float = 0.0
    location_energy: bool = True


def run_day(
    boundary: BoundaryState,
    prices: PriceSeries,
    params: ModelParams,
    mode: Mode = PORTABLE,
    options: RunOptions = RunOptions(),
) -> tuple[DispatchSchedule, BoundaryState]:
    inst = build_day_instance(
        prices, params.storage, params.transport, params.degradation, params.horizon, boundary,
        linking=options.linking,
        arrival_energy_mwh=options.arrival_energy_mwh,
        fixed_site=mode.site,
        location_energy=options.location_energy and options.linking,
    )
    sol = solve_milp(inst, options.solver)
    sched = extract_schedule(inst, sol.x)
    return sched, sched.next_boundary(boundary, params.transport.travel_steps)


@dataclass(frozen=True)
class DayRecord:
    day: int
    label: str
    net_value_usd: float
    revenue_usd: float
    transport_cost_usd: float
    degradation_cost_usd: float
    throughput_mwh: float
    calendar_mwh: float
    travel_hours: float
    trips: int
    end_energy_mwh: float
    end_location: str
    fraction: float = 1.0

    @property
    def cash_usd(self) -> float:
        return self.revenue_usd - self.transport_cost_usd

    @property
    def consumption_mwh(self) -> float:
        return self.fraction * (self.throughput_mwh + self.calendar_mwh)


def _location_label(loc) -> str:
    if isinstance(loc, InTransit):
        return f"transit->{loc.destination.value}"
    return loc.value


@dataclass
class SimulationLedger:
    budget_mwh: float
    records: list[DayRecord] = field(default_factory=list)
    schedules: list[DispatchSchedule] = field(default_factory=list)

    @property
    def days(self) -> int:
        return len(self.records)

    @property
    def cumulative_throughput_mwh(self) -> float:
        return float(sum(r.consumption_mwh for r in self.records))

    @property
    def remaining_budget_mwh(self) -> float:
        return self.budget_mwh - self.cumulative_throughput_mwh

    @property
    def total_net_value_usd(self) -> float:
        return float(sum(r.fraction * r.net_value_usd for r in self.records))

    @property
    def total_cash_usd(self) -> float:
        return float(sum(r.fraction * r.cash_usd for r in self.records))

    @property
    def total_travel_hours(self) -> float:
        return float(sum(r.fraction * r.travel_hours for r in self.records))

    def append(self, record: DayRecord, schedule: DispatchSchedule | None = None):
        self.records.append(record)
        if schedule is not None:
            self.schedules.append(schedule)


def _record(day: int, label: str, sched: DispatchSchedule, nxt: BoundaryState, calendar: float) -> DayRecord:
    return DayRecord(
        day=day,
        label=label,
        net_value_usd=sched.net_value_usd,
        revenue_usd=sched.market_revenue_usd,
        transport_cost_usd=sched.transport_cost_usd,
        degradation_cost_usd=sched.degradation_cost_usd,
        throughput_mwh=sched.throughput_mwh,
        calendar_mwh=calendar,
        travel_hours=sched.travel_hours,
        trips=sched.departures,
        end_energy_mwh=nxt.initial_energy_mwh,
        end_location=_location_label(nxt.location),
    )


def run_horizon(
    days: Sequence[PriceSeries],
    params: ModelParams,
    mode: Mode = PORTABLE,
    boundary: BoundaryState | None = None,
    options: RunOptions = RunOptions(),
    keep_schedules: bool = False,
) -> SimulationLedger:
    """Optimize ``days`` in order, carrying state from each day into the next."""
    if not days:
        raise ValueError("need at least one day of prices")
    state = boundary or mode.default_boundary()
    calendar = params.degradation.calendar_throughput(params.horizon)
    ledger = SimulationLedger(params.degradation.lifetime_throughput_budget_mwh)
    for k, prices in enumerate(days):
        try:
            sched, nxt = run_day(state, prices, params, mode, options)
        except Exception as exc:
            raise SimulationError(k, prices.label, exc) from exc
        ledger.append(_record(k, prices.label, sched, nxt, calendar), sched if keep_schedules else None)
        state = nxt
    return ledger


def lifetime_npv(yearly_revenues: Sequence[float], discount_rate: float) -> float:
    """Discounted sum with the first year undiscounted."""
    if discount_rate < 0:
        raise ValueError("discount rate must be >= 0")
    return float(sum(v / (1 + discount_rate) ** k for k, v in enumerate(yearly_revenues)))


@dataclass
class LifetimeResult:
    mode: str
    first_year_revenue_usd: float
    total_lifecycle_revenue_usd: float
    npv_usd: float
    life_days: float
    total_travel_hours: float
    yearly_revenues_usd: list[float]
    ledger: SimulationLedger


def run_lifetime(
    days: Sequence[PriceSeries],
    params: ModelParams,
    mode: Mode = PORTABLE,
    boundary: BoundaryState | None = None,
    options: RunOptions = RunOptions(),
    *,
    days_per_year: int = DAYS_PER_SIM_YEAR,
    max_years: int = 60,
) -> LifetimeResult:
    """Cycle through ``days`` until the throughput budget is used up.

    The final day is prorated so cumulative wear lands exactly on the
    budget. Day results are memoized on (position in the cycle, boundary),
    which is exact because each day is a deterministic function of both.
    """
    if not days:
        raise ValueError("need at least one day of prices")
    degr = params.degradation
    budget = degr.lifetime_throughput_budget_mwh
    calendar = degr.calendar_throughput(params.horizon)
    state = boundary or mode.default_boundary()
    ledger = SimulationLedger(budget)
    cache: dict = {}
    used = 0.0
    k = 0
    max_days = max_years * days_per_year
    while used < budget:
        if k >= max_days:
            raise RuntimeError(f"throughput budget not exhausted after {max_years} years")
        pos = k % len(days)
        key = (pos, state)
        if key not in cache:
            try:
                sched, nxt = run_day(state, days[pos], params, mode, options)
            except Exception as exc:
                raise SimulationError(k, days[pos].label, exc) from exc
            cache[key] = (_record(0, days[pos].label, sched, nxt, calendar), nxt)
        rec, nxt = cache[key]
        consumption = rec.throughput_mwh + rec.calendar_mwh
        fraction = 1.0
        if used + consumption >= budget:
            fraction = (budget - used) / consumption
        rec = DayRecord(**{**rec.__dict__, "day": k, "fraction": fraction})
        ledger.append(rec)
        used += rec.consumption_mwh
        if fraction < 1.0 or used >= budget:
            used = budget
            break
        state = nxt
        k += 1

    years = int(np.ceil(len(ledger.records) / days_per_year)) or 1
    yearly = [0.0] * years
    for rec in ledger.records:
        yearly[rec.day // days_per_year] += rec.fraction * rec.cash_usd
    life_days = float(sum(r.fraction for r in ledger.records))
    return LifetimeResult(
        mode=mode.name,
        first_year_revenue_usd=yearly[0],
        total_lifecycle_revenue_usd=float(sum(yearly)),
        npv_usd=lifetime_npv(yearly, degr.annual_discount_rate),
        life_days=life_days,
        total_travel_hours=ledger.total_travel_hours,
        yearly_revenues_usd=yearly,
        ledger=ledger,
    )


@dataclass
class CalibrationPoint:
    marginal_cost_usd_per_mwh: float
    npv_usd: float
    first_year_revenue_usd: float
    life_days: float


def _calibration_point(args) -> CalibrationPoint:
    cd, days, params, mode, boundary, options, days_per_year = args
    p = params.model_copy(
        update={"degradation": params.degradation.model_copy(update={"marginal_cost_usd_per_mwh": cd})}
    )
    res = run_lifetime(days, p, mode, boundary, options, days_per_year=days_per_year)
    return CalibrationPoint(cd, res.npv_usd, res.first_year_revenue_usd, res.life_days)


def calibrate_marginal_cost(
    grid: Sequence[float],
    days: Sequence[PriceSeries],
    params: ModelParams,
    mode: Mode = PORTABLE,
    boundary: BoundaryState | None = None,
    options: RunOptions = RunOptions(),
    *,
    days_per_year: int = DAYS_PER_SIM_YEAR,
    workers: int = 1,
) -> tuple[float, list[CalibrationPoint]]:
    """Pick the marginal cost of usage that maximizes lifetime NPV.

    Ties go to the smaller cost. The whole NPV curve comes back in grid
    order for reporting.
    """
    grid = sorted(float(g) for g in grid)
    if not grid or grid[0] < 0:
        raise ValueError("grid must be non-empty with values >= 0")
    jobs = [(cd, list(days), params, mode, boundary, options, days_per_year) for cd in grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            curve = list(pool.map(_calibration_point, jobs))
    else:
        curve = [_calibration_point(j) for j in jobs]
    best = curve[0]
    for pt in curve[1:]:
        if pt.npv_usd > best.npv_usd + 1e-9 * max(1.0, abs(best.npv_usd)):
            best = pt
    return best.marginal_cost_usd_per_mwh, curve


@dataclass
class Comparison:
    portable: LifetimeResult
    stationary: LifetimeResult
    truck_cost_usd: float

    @property
    def first_year_delta_usd(self) -> float:
        return self.portable.first_year_revenue_usd - self.stationary.first_year_revenue_usd

    @property
    def lifecycle_delta_usd(self) -> float:
        return self.portable.total_lifecycle_revenue_usd - self.stationary.total_lifecycle_revenue_usd

    @property
    def npv_delta_usd(self) -> float:
        return self.portable.npv_usd - self.stationary.npv_usd

    @property
    def trucking_justified(self) -> bool:
        return self.npv_delta_usd > self.truck_cost_usd


def compare(
    days: Sequence[PriceSeries],
    portable_params: ModelParams,
    stationary_params: ModelParams,
    stationary_site: Site = Site.B,
    portable_boundary: BoundaryState | None = None,
    stationary_boundary: BoundaryState | None = None,
    options: RunOptions = RunOptions(),
    *,
    truck_cost_usd: float = 150_000.0,
    days_per_year: int = DAYS_PER_SIM_YEAR,
) -> Comparison:
    port = run_lifetime(days, portable_params, PORTABLE, portable_boundary, options, days_per_year=days_per_year)
    stat_mode = Mode.stationary(stationary_site)
    stat = run_lifetime(days, stationary_params, stat_mode, stationary_boundary, options, days_per_year=days_per_year)
    return Comparison(port, stat, truck_cost_usd)
