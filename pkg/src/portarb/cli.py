"""Command-line entry point.

Settings resolve in three layers: built-in defaults, then an optional JSON
config file (``--config``), then command-line flags. Exit codes: 0 success,
2 invalid configuration, 3 solver failure, 4 data problem.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from . import analytics, data, reports
from .core import BoundaryState, ModelParams, PriceSeries, Site, TruckSpec, validate
from .milp import InstanceError, RoundingError, build_day_instance, check_feasibility, extract_schedule, write_mps
from .simulate import (
    PORTABLE,
    LifetimeResult,
    Mode,
    RunOptions,
    SimulationError,
    SimulationLedger,
    calibrate_marginal_cost,
    compare,
    run_horizon,
    run_lifetime,
)
from .solver import InfeasibleError, NodeLimitError, SimplexError, SolverConfig, solve_milp

log = logging.getLogger("portarb")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DATA = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    backend: Literal["native", "highs", "auto"] = "auto"
    integrality_tol: float = 1e-6
    feasibility_tol: float = 1e-7
    node_limit: int = 100_000
    gap_rel: float = 0.0
    time_limit_s: Optional[float] = None

    def build(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class RunConfig(BaseModel):
    """Every setting of a CLI run; JSON config files use these field names."""

    model_config = ConfigDict(extra="forbid")

    params: ModelParams = ModelParams()
    stationary_marginal_cost_usd_per_mwh: float = 14.0
    stationary_site: Site = Site.B
    initial_energy_mwh: float = 0.0
    lmp_files: list[Path] = []
    timezone: str = "UTC"
    mode: Literal["portable", "stationary"] = "portable"
    output_dir: Path = Path("out")
    solver: SolverSettings = SolverSettings()
    truck_cost_usd: float = 150_000.0
    truck_roundtrip_energy_fraction: float = 0.007
    truck_energy_deduction: bool = False
    linking: bool = True
    location_energy: bool = True
    days_per_year: int = 365
    skip_missing: bool = False
    workers: int = 1
    verbosity: int = 0

    @field_validator("lmp_files")
    @classmethod
    def _files_exist(cls, paths: list[Path]) -> list[Path]:
        missing = [str(p) for p in paths if not Path(p).is_file()]
        if missing:
            raise ValueError(f"input files not found: {', '.join(missing)}")
        return paths

    def stationary_params(self) -> ModelParams:
        degr = self.params.degradation.model_copy(
            update={"marginal_cost_usd_per_mwh": self.stationary_marginal_cost_usd_per_mwh}
        )
        return self.params.model_copy(update={"degradation": degr})

    def run_mode(self) -> Mode:
        return PORTABLE if self.mode == "portable" else Mode.stationary(self.stationary_site)

    def mode_params(self, mode: Mode) -> ModelParams:
        return self.params if mode.portable else self.stationary_params()

    def boundary(self, mode: Mode) -> BoundaryState:
        return BoundaryState(initial_energy_mwh=self.initial_energy_mwh, location=mode.site or Site.A)

    def options(self) -> RunOptions:
        arrival = 0.0
        if self.truck_energy_deduction:
            truck = TruckSpec(self.truck_cost_usd, self.truck_roundtrip_energy_fraction)
            arrival = truck.arrival_energy_mwh(self.params.storage)
        return RunOptions(
            solver=self.solver.build(),
            linking=self.linking,
            arrival_energy_mwh=arrival,
            location_energy=self.location_energy,
        )

    def check(self):
        """Raise ConfigError listing every violated parameter invariant."""
        p = self.params
        problems = [f"{v.field}: {v.message}" for v in validate(p.storage, p.transport, p.degradation, p.horizon)]
        if not 0 <= self.initial_energy_mwh <= p.storage.energy_capacity_mwh:
            problems.append("initial_energy_mwh: outside [0, energy capacity]")
        if self.stationary_marginal_cost_usd_per_mwh < 0:
            problems.append("stationary_marginal_cost_usd_per_mwh: must be >= 0")
        if self.days_per_year < 1 or self.workers < 1:
            problems.append("days_per_year and workers must be >= 1")
        if self.truck_cost_usd < 0 or not 0 <= self.truck_roundtrip_energy_fraction < 1:
            problems.append("truck settings out of range")
        try:
            self.solver.build()
        except ValueError as exc:
            problems.append(f"solver: {exc}")
        if problems:
            raise ConfigError("; ".join(problems))


# flag dest -> dotted RunConfig path
FLAG_PATHS = {
    "lmp": "lmp_files",
    "out": "output_dir",
    "mode": "mode",
    "timezone": "timezone",
    "node_a": "params.transport.node_a_id",
    "node_b": "params.transport.node_b_id",
    "travel_steps": "params.transport.travel_steps",
    "travel_cost": "params.transport.travel_cost_per_step",
    "power_mw": "params.storage.power_capacity_mw",
    "energy_mwh": "params.storage.energy_capacity_mwh",
    "efficiency": "params.storage.efficiency",
    "self_discharge": "params.storage.self_discharge_per_step",
    "step_hours": "params.horizon.step_hours",
    "steps_per_day": "params.horizon.steps_per_day",
    "marginal_cost": "params.degradation.marginal_cost_usd_per_mwh",
    "calendar_throughput": "params.degradation.calendar_throughput_mwh_per_day",
    "budget": "params.degradation.lifetime_throughput_budget_mwh",
    "discount_rate": "params.degradation.annual_discount_rate",
    "stationary_marginal_cost": "stationary_marginal_cost_usd_per_mwh",
    "stationary_site": "stationary_site",
    "initial_energy": "initial_energy_mwh",
    "truck_cost": "truck_cost_usd",
    "truck_energy_deduction": "truck_energy_deduction",
    "linking": "linking",
    "location_energy": "location_energy",
    "backend": "solver.backend",
    "node_limit": "solver.node_limit",
    "gap_rel": "solver.gap_rel",
    "time_limit": "solver.time_limit_s",
    "days_per_year": "days_per_year",
    "skip_missing": "skip_missing",
    "workers": "workers",
    "verbose": "verbosity",
}


def _set_path(tree: dict, path: str, value):
    keys = path.split(".")
    for k in keys[:-1]:
        tree = tree.setdefault(k, {})
    tree[keys[-1]] = value


def load_config(config_path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, a JSON config file and flag overrides into a RunConfig."""
    tree: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            tree = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(tree, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for dest, value in (overrides or {}).items():
        if value is None or dest not in FLAG_PATHS:
            continue
        _set_path(tree, FLAG_PATHS[dest], value)
    try:
        cfg = RunConfig.model_validate(tree)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.check()
    return cfg


# ---------------------------------------------------------------- inputs


def _read_prices(cfg: RunConfig):
    if not cfg.lmp_files:
        raise ConfigError("no LMP input files given (--lmp or lmp_files)")
    return data.read_lmp_csvs(cfg.lmp_files)


def _parse_date(s: str) -> dt.date:
    try:
        return dt.date.fromisoformat(s)
    except ValueError as exc:
        raise ConfigError(f"bad date {s!r}, expected YYYY-MM-DD") from exc


def _dates(frame, cfg: RunConfig, start: str | None, end: str | None) -> list[dt.date]:
    present = data.days_in_frame(frame, cfg.timezone)
    if not present:
        raise data.DataError("input files contain no rows")
    first = _parse_date(start) if start else present[0]
    last = _parse_date(end) if end else present[-1]
    return data.date_range(first, last)


def _days(cfg: RunConfig, start: str | None, end: str | None) -> tuple[list[PriceSeries], list[dt.date]]:
    frame = _read_prices(cfg)
    t = cfg.params.transport
    days, missing = data.collect_days(
        frame, _dates(frame, cfg, start, end), t.node_a_id, t.node_b_id,
        cfg.params.horizon, cfg.timezone, cfg.skip_missing,
    )
    if missing:
        log.warning("skipping %d missing day(s): %s", len(missing), ", ".join(map(str, missing)))
    if not days:
        raise data.DataError("no complete days in the requested range")
    return days, missing


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_missing(out: Path, missing: list[dt.date]):
    if missing:
        reports.write_csv(out / "missing_days.csv", ["date"], [[str(d)] for d in missing])


# ---------------------------------------------------------------- commands


def cmd_analyze(
    cfg: RunConfig,
    pairs: list[tuple[str, str]] | None = None,
    threshold: float = 50.0,
    bin_width: float = 10.0,
    bin_range: tuple[float, float] = (-200.0, 200.0),
) -> list[Path]:
    frame = _read_prices(cfg)
    if not pairs:
        nodes = data.node_ids(frame)
        if len(nodes) != 2:
            raise analytics.AnalyticsError(
                f"a node pair is required; input has {len(nodes)} node(s): {', '.join(nodes)}"
            )
        pairs = [(nodes[0], nodes[1])]
    if len(pairs) > 2:
        raise ConfigError("at most two node pairs")
    lo, hi = bin_range
    if bin_width <= 0 or hi <= lo:
        raise ConfigError("bin range must be increasing and bin width positive")
    inner = np.arange(lo, hi + bin_width / 2, bin_width)
    edges = np.concatenate([[-np.inf], inner, [np.inf]])

    out = _out(cfg)
    hist_rows, month_rows, summaries, series = [], [], [], []
    for n1, n2 in pairs:
        pair = analytics.hourly_pair(frame, n1, n2)
        counts, below, above = analytics.histogram_of(pair.diff.to_numpy(), edges)
        label = f"{n1}|{n2}"
        for k, c in enumerate(counts):
            hist_rows.append([label, edges[k], edges[k + 1], c])
        ex = analytics.exceedance_from_diff(pair.diff, threshold)
        series.append(ex)
        for row in ex.as_frame().itertuples(index=False):
            month_rows.append([label, *row])
        summaries.append(reports.PairSummary(
            node1=n1, node2=n2, threshold_usd_per_mwh=threshold,
            aligned_hours=len(pair.diff), dropped_hours=pair.dropped_hours,
            hours_above_threshold=int(ex.counts.sum()),
            histogram_below_range=below, histogram_above_range=above,
            low_coverage_months=[m for m, f in zip(ex.months, ex.low_coverage) if f],
        ))
    corr = None
    if len(series) == 2:
        corr = analytics.series_correlation(*_common_months(*series))
    reports.write_csv(out / "histogram.csv", ["pair", "bin_low", "bin_high", "hours"], hist_rows)
    reports.write_csv(
        out / "monthly_exceedance.csv",
        ["pair", "month", "hours_above_threshold", "aligned_hours", "hours_in_month", "coverage", "low_coverage"],
        month_rows,
    )
    reports.write_report(reports.AnalyzeSummary(pairs=summaries, correlation=corr), out / "summary.json")
    return [out / "histogram.csv", out / "monthly_exceedance.csv", out / "summary.json"]


def _common_months(a: analytics.ExceedanceSeries, b: analytics.ExceedanceSeries):
    """Restrict two series to their shared months (zero-filled spans can differ)."""
    shared = [m for m in a.months if m in set(b.months)]

    def pick(s):
        idx = [s.months.index(m) for m in shared]
        return analytics.ExceedanceSeries(
            tuple(shared), s.counts[idx], s.hours_in_month[idx], s.aligned_hours[idx], s.threshold
        )

    return pick(a), pick(b)


def _day_instance(cfg: RunConfig, prices: PriceSeries, mode: Mode):
    params = cfg.mode_params(mode)
    opts = cfg.options()
    return build_day_instance(
        prices, params.storage, params.transport, params.degradation, params.horizon, cfg.boundary(mode),
        linking=opts.linking, arrival_energy_mwh=opts.arrival_energy_mwh, fixed_site=mode.site,
        location_energy=opts.location_energy and opts.linking,
    )


def cmd_optimize_day(cfg: RunConfig, date: str) -> list[Path]:
    day = _parse_date(date)
    frame = _read_prices(cfg)
    t = cfg.params.transport
    prices = data.day_prices(frame, day, t.node_a_id, t.node_b_id, cfg.params.horizon, cfg.timezone)
    mode = cfg.run_mode()
    inst = _day_instance(cfg, prices, mode)
    sol = solve_milp(inst, cfg.options().solver)
    sched = extract_schedule(inst, sol.x)
    boundary = cfg.boundary(mode)
    nxt = sched.next_boundary(boundary, t.travel_steps)
    moved, high = reports.energy_moved(sched, prices, boundary)

    out = _out(cfg)
    reports.write_schedule_csv(out / "schedule.csv", sched, prices)
    bad = check_feasibility(reports.read_schedule_csv(out / "schedule.csv", inst.model), inst.model)
    if bad:
        raise RoundingError("written schedule fails re-verification: " + "; ".join(map(str, bad[:5])))
    summary = reports.DaySummary(
        date=str(day),
        mode=mode.name,
        node_a=t.node_a_id,
        node_b=t.node_b_id,
        net_value_usd=sched.net_value_usd,
        market_revenue_usd=sched.market_revenue_usd,
        transport_cost_usd=sched.transport_cost_usd,
        degradation_cost_usd=sched.degradation_cost_usd,
        throughput_mwh=sched.throughput_mwh,
        trips=sched.departures,
        round_trips=sched.departures // 2,
        travel_hours=sched.travel_hours,
        energy_moved_to_high_price_node_mwh=moved,
        high_price_node=high.value,
        end_energy_mwh=nxt.initial_energy_mwh,
        end_location=reports.location_label(nxt.location),
        solver_nodes=sol.nodes,
    )
    reports.write_report(summary, out / "day_summary.json")
    return [out / "schedule.csv", out / "day_summary.json"]


def cmd_export_mps(cfg: RunConfig, date: str) -> list[Path]:
    day = _parse_date(date)
    frame = _read_prices(cfg)
    t = cfg.params.transport
    prices = data.day_prices(frame, day, t.node_a_id, t.node_b_id, cfg.params.horizon, cfg.timezone)
    inst = _day_instance(cfg, prices, cfg.run_mode())
    path = _out(cfg) / f"day_{day}.mps"
    write_mps(inst, path, name=f"DAY_{day}".replace("-", ""))
    return [path]


LEDGER_HEADER = [
    "day", "date", "net_value_usd", "cash_usd", "market_revenue_usd", "transport_cost_usd",
    "degradation_cost_usd", "throughput_mwh", "calendar_mwh", "fraction", "cumulative_mwh",
    "travel_hours", "trips", "end_energy_mwh", "end_location",
]


def write_ledger(path: Path, ledger: SimulationLedger):
    rows, used = [], 0.0
    for r in ledger.records:
        used += r.consumption_mwh
        rows.append([
            r.day, r.label, r.net_value_usd, r.cash_usd, r.revenue_usd, r.transport_cost_usd,
            r.degradation_cost_usd, r.throughput_mwh, r.calendar_mwh, r.fraction, used,
            r.travel_hours, r.trips, r.end_energy_mwh, r.end_location,
        ])
    reports.write_csv(path, LEDGER_HEADER, rows)


def _lifetime_report(res: LifetimeResult, params: ModelParams, days_per_year: int, ledger_file: str | None):
    first_year = [r for r in res.ledger.records if r.day < days_per_year]
    return reports.LifetimeReport(
        mode=res.mode,
        marginal_cost_usd_per_mwh=params.degradation.marginal_cost_usd_per_mwh,
        first_year_revenue_usd=res.first_year_revenue_usd,
        total_lifecycle_revenue_usd=res.total_lifecycle_revenue_usd,
        npv_usd=res.npv_usd,
        discount_rate=params.degradation.annual_discount_rate,
        life_days=res.life_days,
        life_years=res.life_days / days_per_year,
        total_travel_hours=res.total_travel_hours,
        first_year_travel_hours=float(sum(r.fraction * r.travel_hours for r in first_year)),
        yearly_revenues_usd=res.yearly_revenues_usd,
        simulated_days=len(res.ledger.records),
        ledger_file=ledger_file,
    )


def cmd_simulate(cfg: RunConfig, start: str | None = None, end: str | None = None, lifetime: bool = False) -> list[Path]:
    days, missing = _days(cfg, start, end)
    mode = cfg.run_mode()
    params = cfg.mode_params(mode)
    ledger = run_horizon(days, params, mode, cfg.boundary(mode), cfg.options())
    out = _out(cfg)
    write_ledger(out / "ledger.csv", ledger)
    reports.write_csv(
        out / "travel_time.csv", ["date", "travel_hours", "trips"],
        [[r.label, r.travel_hours, r.trips] for r in ledger.records],
    )
    _write_missing(out, missing)
    written = [out / "ledger.csv", out / "travel_time.csv"]
    if lifetime:
        res = run_lifetime(days, params, mode, cfg.boundary(mode), cfg.options(), days_per_year=cfg.days_per_year)
        write_ledger(out / "lifetime_ledger.csv", res.ledger)
        rep = _lifetime_report(res, params, cfg.days_per_year, "lifetime_ledger.csv")
        reports.write_report(rep, out / "lifetime.json")
        written += [out / "lifetime_ledger.csv", out / "lifetime.json"]
    return written


def cmd_compare(cfg: RunConfig, start: str | None = None, end: str | None = None) -> list[Path]:
    days, missing = _days(cfg, start, end)
    stat_mode = Mode.stationary(cfg.stationary_site)
    cmp = compare(
        days, cfg.params, cfg.stationary_params(), cfg.stationary_site,
        cfg.boundary(PORTABLE), cfg.boundary(stat_mode), cfg.options(),
        truck_cost_usd=cfg.truck_cost_usd, days_per_year=cfg.days_per_year,
    )
    out = _out(cfg)
    write_ledger(out / "ledger_portable.csv", cmp.portable.ledger)
    write_ledger(out / "ledger_stationary.csv", cmp.stationary.ledger)
    _write_missing(out, missing)
    rep = reports.ComparisonReport(
        portable=_lifetime_report(cmp.portable, cfg.params, cfg.days_per_year, "ledger_portable.csv"),
        stationary=_lifetime_report(cmp.stationary, cfg.stationary_params(), cfg.days_per_year, "ledger_stationary.csv"),
        first_year_delta_usd=cmp.first_year_delta_usd,
        lifecycle_delta_usd=cmp.lifecycle_delta_usd,
        npv_delta_usd=cmp.npv_delta_usd,
        truck_cost_usd=cmp.truck_cost_usd,
        trucking_justified=cmp.trucking_justified,
        verdict="trucking justified" if cmp.trucking_justified else "trucking not justified",
    )
    reports.write_report(rep, out / "comparison.json")
    return [out / "comparison.json", out / "ledger_portable.csv", out / "ledger_stationary.csv"]


def cmd_calibrate(cfg: RunConfig, grid: list[float], start: str | None = None, end: str | None = None) -> list[Path]:
    days, missing = _days(cfg, start, end)
    mode = cfg.run_mode()
    params = cfg.mode_params(mode)
    best, curve = calibrate_marginal_cost(
        grid, days, params, mode, cfg.boundary(mode), cfg.options(),
        days_per_year=cfg.days_per_year, workers=cfg.workers,
    )
    out = _out(cfg)
    reports.write_csv(
        out / "npv_curve.csv",
        ["marginal_cost_usd_per_mwh", "npv_usd", "first_year_revenue_usd", "life_days"],
        [[p.marginal_cost_usd_per_mwh, p.npv_usd, p.first_year_revenue_usd, p.life_days] for p in curve],
    )
    best_pt = next(p for p in curve if p.marginal_cost_usd_per_mwh == best)
    reports.write_report(
        reports.BestMarginalCost(
            mode=mode.name, best_marginal_cost_usd_per_mwh=best, best_npv_usd=best_pt.npv_usd,
            grid=[p.marginal_cost_usd_per_mwh for p in curve],
        ),
        out / "best_cd.json",
    )
    _write_missing(out, missing)
    return [out / "npv_curve.csv", out / "best_cd.json"]


# ---------------------------------------------------------------- argparse


def _grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run settings (override the config file)")
    g.add_argument("--config", help="JSON file with RunConfig fields")
    g.add_argument("--lmp", nargs="+", help="LMP CSV files (timestamp,node_id,lmp_usd_per_mwh)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--mode", choices=["portable", "stationary"])
    g.add_argument("--timezone", help="time zone that defines calendar days (default UTC)")
    g.add_argument("--node-a", dest="node_a")
    g.add_argument("--node-b", dest="node_b")
    g.add_argument("--travel-steps", type=int)
    g.add_argument("--travel-cost", type=float, help="USD per traveling step")
    g.add_argument("--power-mw", type=float)
    g.add_argument("--energy-mwh", type=float)
    g.add_argument("--efficiency", type=float, help="one-way efficiency")
    g.add_argument("--self-discharge", type=float, help="fraction lost per step")
    g.add_argument("--step-hours", type=float)
    g.add_argument("--steps-per-day", type=int)
    g.add_argument("--marginal-cost", type=float, help="USD/MWh of throughput (portable)")
    g.add_argument("--stationary-marginal-cost", type=float)
    g.add_argument("--stationary-site", choices=["A", "B"])
    g.add_argument("--calendar-throughput", type=float, help="MWh/day")
    g.add_argument("--budget", type=float, help="lifetime throughput budget, MWh")
    g.add_argument("--discount-rate", type=float)
    g.add_argument("--initial-energy", type=float)
    g.add_argument("--truck-cost", type=float)
    g.add_argument("--truck-energy-deduction", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--linking", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--location-energy", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--backend", choices=["native", "highs", "auto"])
    g.add_argument("--node-limit", type=int)
    g.add_argument("--gap-rel", type=float)
    g.add_argument("--time-limit", type=float, help="seconds per day; HiGHS keeps its incumbent, native stops with exit 3")
    g.add_argument("--days-per-year", type=int)
    g.add_argument("--skip-missing", action="store_true", default=None)
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="count", default=None)


def _range(p: argparse.ArgumentParser):
    p.add_argument("--start", help="first date, YYYY-MM-DD (default: first day in data)")
    p.add_argument("--end", help="last date, inclusive (default: last day in data)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="portarb", description="Portable storage arbitrage toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="price-difference histogram and monthly congestion hours")
    _common(p)
    p.add_argument("--pair", nargs=2, action="append", metavar=("NODE1", "NODE2"))
    p.add_argument("--threshold", type=float, default=50.0)
    p.add_argument("--bin-width", type=float, default=10.0)
    p.add_argument("--bin-range", type=float, nargs=2, default=(-200.0, 200.0))

    p = sub.add_parser("optimize-day", help="optimal schedule for one day")
    _common(p)
    p.add_argument("--date", required=True)

    p = sub.add_parser("export-mps", help="write one day's MILP as free MPS")
    _common(p)
    p.add_argument("--date", required=True)

    p = sub.add_parser("simulate", help="day-by-day simulation over a date range")
    _common(p)
    _range(p)
    p.add_argument("--lifetime", action="store_true", help="cycle the range until the throughput budget is used")

    p = sub.add_parser("compare", help="portable versus stationary lifetime comparison")
    _common(p)
    _range(p)

    p = sub.add_parser("calibrate", help="choose the marginal cost of usage by lifetime NPV")
    _common(p)
    _range(p)
    p.add_argument("--grid", type=_grid, required=True, help="comma-separated USD/MWh values")
    return parser


def run(args: argparse.Namespace) -> list[Path]:
    overrides = {k: v for k, v in vars(args).items() if k in FLAG_PATHS}
    if overrides.get("stationary_site"):
        overrides["stationary_site"] = Site(overrides["stationary_site"])
    cfg = load_config(args.config, overrides)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(cfg.verbosity, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    cmd = args.command
    if cmd == "analyze":
        return cmd_analyze(cfg, [tuple(p) for p in args.pair] if args.pair else None,
                           args.threshold, args.bin_width, tuple(args.bin_range))
    if cmd == "optimize-day":
        return cmd_optimize_day(cfg, args.date)
    if cmd == "export-mps":
        return cmd_export_mps(cfg, args.date)
    if cmd == "simulate":
        return cmd_simulate(cfg, args.start, args.end, args.lifetime)
    if cmd == "compare":
        return cmd_compare(cfg, args.start, args.end)
    if cmd == "calibrate":
        return cmd_calibrate(cfg, args.grid, args.start, args.end)
    raise ConfigError(f"unknown command {cmd}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for path in run(args):
            print(path)
        return EXIT_OK
    except (ConfigError, InstanceError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (data.DataError, analytics.AnalyticsError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SimulationError as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InfeasibleError, NodeLimitError, SimplexError, RoundingError) as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print(f"diagnostics: {json.dumps(diag, sort_keys=True, default=str)}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
