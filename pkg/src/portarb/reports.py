"""Report models, their versioned JSON schemas, and deterministic file writers.

Every JSON report carries a ``schema`` tag such as ``portarb.day_summary/1``
naming the schema file shipped in ``portarb/schemas``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .core import BoundaryState, PriceSeries, Site
from .milp import DayModel, DispatchSchedule, decompose_objective, reconstruct_moves

SCHEMA_VERSION = 1
FLOAT_DIGITS = 9


class _Report(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PairSummary(_Report):
    node1: str
    node2: str
    threshold_usd_per_mwh: float
    aligned_hours: int
    dropped_hours: int
    hours_above_threshold: int
    histogram_below_range: int
    histogram_above_range: int
    low_coverage_months: list[str]


class AnalyzeSummary(_Report):
    schema_tag: Literal["portarb.summary/1"] = Field("portarb.summary/1", alias="schema")
    pairs: list[PairSummary]
    correlation: Optional[float] = None


class DaySummary(_Report):
    schema_tag: Literal["portarb.day_summary/1"] = Field("portarb.day_summary/1", alias="schema")
    date: str
    mode: str
    node_a: str
    node_b: str
    net_value_usd: float
    market_revenue_usd: float
    transport_cost_usd: float
    degradation_cost_usd: float
    throughput_mwh: float
    trips: int
    round_trips: int
    travel_hours: float
    energy_moved_to_high_price_node_mwh: float
    high_price_node: str
    end_energy_mwh: float
    end_location: str
    solver_nodes: int


class LifetimeReport(_Report):
    schema_tag: Literal["portarb.lifetime/1"] = Field("portarb.lifetime/1", alias="schema")
    mode: str
    marginal_cost_usd_per_mwh: float
    first_year_revenue_usd: float
    total_lifecycle_revenue_usd: float
    npv_usd: float
    discount_rate: float
    life_days: float
    life_years: float
    total_travel_hours: float
    first_year_travel_hours: float
    yearly_revenues_usd: list[float]
    simulated_days: int
    ledger_file: Optional[str] = None


class ComparisonReport(_Report):
    schema_tag: Literal["portarb.comparison/1"] = Field("portarb.comparison/1", alias="schema")
    portable: LifetimeReport
    stationary: LifetimeReport
    first_year_delta_usd: float
    lifecycle_delta_usd: float
    npv_delta_usd: float
    truck_cost_usd: float
    trucking_justified: bool
    verdict: Literal["trucking justified", "trucking not justified"]


class BestMarginalCost(_Report):
    schema_tag: Literal["portarb.best_cd/1"] = Field("portarb.best_cd/1", alias="schema")
    mode: str
    best_marginal_cost_usd_per_mwh: float
    best_npv_usd: float
    grid: list[float]


REPORTS = {
    "summary": AnalyzeSummary,
    "day_summary": DaySummary,
    "lifetime": LifetimeReport,
    "comparison": ComparisonReport,
    "best_cd": BestMarginalCost,
}


def schema_for(name: str) -> dict:
    schema = REPORTS[name].model_json_schema(by_alias=True)
    schema["$id"] = f"portarb.{name}/{SCHEMA_VERSION}"
    schema["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    return schema


def shipped_schema(name: str) -> dict:
    text = resources.files("portarb").joinpath("schemas", f"{name}.v{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


def write_schemas(directory: str | Path):
    """Regenerate the shipped schema files from the report models."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in REPORTS:
        (directory / f"{name}.v{SCHEMA_VERSION}.json").write_text(dump_json(schema_for(name)))


def clean(v):
    """Round floats and normalize containers so output bytes are reproducible."""
    if isinstance(v, dict):
        return {k: clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return None
        f = round(f, FLOAT_DIGITS)
        return 0.0 if f == 0 else f
    return v


def dump_json(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_report(report: _Report, path: str | Path):
    Path(path).write_text(dump_json(report.model_dump(by_alias=True)))


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        s = format(f, ".12g")
        return "0" if s == "-0" else s
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


# schedule.csv ---------------------------------------------------------------

SCHEDULE_HEADER = [
    "step", "start_hour",
    "price_A", "price_B",
    "discharge_mw_A", "charge_mw_A", "at_node_A",
    "discharge_mw_B", "charge_mw_B", "at_node_B",
    "traveling", "energy_mwh",
]


def write_schedule_csv(path: str | Path, schedule: DispatchSchedule, prices: PriceSeries):
    rows = []
    for h in range(schedule.steps):
        rows.append([
            h + 1, h * schedule.step_hours,
            prices.node_a[h], prices.node_b[h],
            schedule.discharge_mw[0, h], schedule.charge_mw[0, h], schedule.at_node[0, h],
            schedule.discharge_mw[1, h], schedule.charge_mw[1, h], schedule.at_node[1, h],
            schedule.traveling[h], schedule.energy_mwh[h],
        ])
    write_csv(path, SCHEDULE_HEADER, rows)


def read_schedule_csv(path: str | Path, model: DayModel) -> DispatchSchedule:
    """Rebuild a schedule from ``schedule.csv`` for re-verification against ``model``."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SCHEDULE_HEADER:
            raise ValueError(f"unexpected schedule header {reader.fieldnames}")
        rows = list(reader)
    col = lambda name, cast=float: np.array([cast(r[name]) for r in rows])
    discharge = np.vstack([col("discharge_mw_A"), col("discharge_mw_B")])
    charge = np.vstack([col("charge_mw_A"), col("charge_mw_B")])
    at_node = np.vstack([col("at_node_A", int), col("at_node_B", int)])
    traveling = col("traveling", int)
    arriving, departing, aux = reconstruct_moves(
        at_node, traveling, model.boundary, model.transport.travel_steps
    )
    obj = decompose_objective(discharge, charge, traveling, model)
    return DispatchSchedule(
        step_hours=model.horizon.step_hours,
        discharge_mw=discharge,
        charge_mw=charge,
        at_node=at_node,
        arriving=arriving,
        departing=departing,
        aux=aux,
        traveling=traveling,
        energy_mwh=col("energy_mwh"),
        market_revenue_usd=obj.market_revenue_usd,
        transport_cost_usd=obj.transport_cost_usd,
        degradation_cost_usd=obj.degradation_cost_usd,
        net_value_usd=obj.net_value_usd,
    )


def energy_moved(schedule: DispatchSchedule, prices: PriceSeries, boundary: BoundaryState) -> tuple[float, Site]:
    """Stored energy carried away from the cheaper node, summed over departures.

    The cheaper node is the one with the lower mean price over the horizon.
    Energy on board is the state of charge at the end of the step before
    the departure step.
    """
    cheap = Site.A if prices.node_a.mean() <= prices.node_b.mean() else Site.B
    total = 0.0
    for h in np.flatnonzero(schedule.departing[cheap.index]):
        total += schedule.energy_mwh[h - 1] if h > 0 else boundary.initial_energy_mwh
    return float(total), cheap.other


def location_label(loc) -> str:
    if isinstance(loc, Site):
        return loc.value
    return f"transit->{loc.destination.value}"

