"""Domain types and parameter derivations shared by every module.

Units are fixed throughout the package: power in MW, energy in MWh,
money in USD, time in hours. Prices are USD/MWh and may be negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

DAYS_PER_YEAR = 365.25


class Site(str, Enum):
    """One of the two grid nodes the truck can be connected to."""

    A = "A"
    B = "B"

    @property
    def index(self) -> int:
        return 0 if self is Site.A else 1

    @property
    def other(self) -> "Site":
        return Site.B if self is Site.A else Site.A


NODES = (Site.A, Site.B)


class _Frozen(BaseModel):
    # No field constraints here: invalid values must survive construction so
    # that validate() can report them as data.
    model_config = ConfigDict(frozen=True, extra="forbid")


class HorizonConfig(_Frozen):
    step_hours: float = 0.25
    steps_per_day: int = 96
    day_index: int = 0

    @property
    def hours(self) -> float:
        return self.step_hours * self.steps_per_day


class StorageSpec(_Frozen):
    power_capacity_mw: float = 2.7
    energy_capacity_mwh: float = 2.7
    efficiency: float = 0.95
    self_discharge_per_step: float = 0.0


class TransportSpec(_Frozen):
    node_a_id: str = "NCMETER_1_N001"
    node_b_id: str = "SNTAMRA_1_N005"
    travel_steps: int = 1
    travel_cost_per_step: float = 4.0

    def node_id(self, site: Site) -> str:
        return self.node_a_id if site is Site.A else self.node_b_id


class DegradationParams(_Frozen):
    marginal_cost_usd_per_mwh: float = 25.0
    calendar_throughput_mwh_per_day: float = 1.5
    lifetime_throughput_budget_mwh: float = 16200.0
    annual_discount_rate: float = 0.07

    def calendar_throughput(self, horizon: HorizonConfig) -> float:
        """Calendar-equivalent throughput charged over ``horizon``.

        The daily figure is prorated by horizon length, so a 24 h horizon
        gets exactly ``calendar_throughput_mwh_per_day``.
        """
        return self.calendar_throughput_mwh_per_day * horizon.hours / 24.0


class InTransit(_Frozen):
    remaining_steps: int
    destination: Site


Location = Union[Site, InTransit]


class BoundaryState(_Frozen):
    """Conditions carried into a dispatch horizon from the previous one.

    ``travel_history`` holds the traveling flags of the steps immediately
    before step 1, oldest first. An empty tuple means "no recent travel"
    and is expanded to zeros of the right length.
    """

    initial_energy_mwh: float = 0.0
    location: Location = Site.A
    travel_history: tuple[int, ...] = ()

    def history(self, travel_steps: int) -> tuple[int, ...]:
        if not self.travel_history:
            if isinstance(self.location, InTransit):
                raise ValueError("an in-transit boundary needs an explicit travel_history")
            return (0,) * travel_steps
        if len(self.travel_history) != travel_steps:
            raise ValueError(
                f"travel_history has length {len(self.travel_history)}, expected {travel_steps}"
            )
        return tuple(int(g) for g in self.travel_history)

    def initial_presence(self) -> tuple[int, int]:
        """Location indicators for the step before the horizon, (A, B)."""
        if isinstance(self.location, InTransit):
            return (0, 0)
        return (1, 0) if self.location is Site.A else (0, 1)


@dataclass(frozen=True)
class PriceSeries:
    """Per-step prices for both nodes over one horizon, USD/MWh."""

    node_a: np.ndarray
    node_b: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.node_a, dtype=float)
        b = np.asarray(self.node_b, dtype=float)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "node_a", a)
        object.__setattr__(self, "node_b", b)

    def __len__(self) -> int:
        return len(self.node_a)

    def at(self, site: Site) -> np.ndarray:
        return self.node_a if site is Site.A else self.node_b

    def as_matrix(self) -> np.ndarray:
        """Array of shape (2, H), row 0 is node A."""
        return np.vstack([self.node_a, self.node_b])

    def scaled(self, k: float) -> "PriceSeries":
        return PriceSeries(self.node_a * k, self.node_b * k, self.label)

    @classmethod
    def flat(cls, price: float, steps: int, label: str = "") -> "PriceSeries":
        return cls(np.full(steps, price), np.full(steps, price), label)


class ModelParams(_Frozen):
    """Every physical and economic parameter of one optimization setup."""

    storage: StorageSpec = StorageSpec()
    transport: TransportSpec = TransportSpec()
    degradation: DegradationParams = DegradationParams()
    horizon: HorizonConfig = HorizonConfig()

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelParams":
        return cls.model_validate(json.loads(Path(path).read_text()))


class Violation(NamedTuple):
    field: str
    message: str


def validate(
    storage: StorageSpec,
    transport: TransportSpec,
    degr: DegradationParams,
    horizon: HorizonConfig,
    boundary: BoundaryState | None = None,
    *,
    calendar_days: bool = False,
) -> list[Violation]:
    """Return every violated parameter invariant; an empty list means valid.

    With ``calendar_days`` the horizon must also span exactly 24 hours.
    """
    out: list[Violation] = []

    def check(ok: bool, name: str, msg: str):
        if not ok:
            out.append(Violation(name, msg))

    check(horizon.step_hours > 0, "horizon.step_hours", "must be > 0")
    check(horizon.steps_per_day >= 1, "horizon.steps_per_day", "must be >= 1")
    if calendar_days:
        check(
            math.isclose(horizon.step_hours * horizon.steps_per_day, 24.0),
            "horizon",
            "step_hours * steps_per_day must equal 24",
        )

    check(storage.power_capacity_mw >= 0, "storage.power_capacity_mw", "must be >= 0")
    check(storage.energy_capacity_mwh >= 0, "storage.energy_capacity_mwh", "must be >= 0")
    check(0 < storage.efficiency <= 1, "storage.efficiency", "must satisfy 0 < efficiency <= 1")
    check(
        0 <= storage.self_discharge_per_step < 1,
        "storage.self_discharge_per_step",
        "must satisfy 0 <= rate < 1",
    )

    check(transport.node_a_id != transport.node_b_id, "transport.node_b_id", "must differ from node_a_id")
    check(transport.travel_steps >= 1, "transport.travel_steps", "must be >= 1")
    check(transport.travel_cost_per_step >= 0, "transport.travel_cost_per_step", "must be >= 0")

    for name in (
        "marginal_cost_usd_per_mwh",
        "calendar_throughput_mwh_per_day",
        "lifetime_throughput_budget_mwh",
        "annual_discount_rate",
    ):
        check(getattr(degr, name) >= 0, f"degradation.{name}", "must be >= 0")
    check(degr.annual_discount_rate < 1, "degradation.annual_discount_rate", "must be < 1")

    if boundary is not None:
        out.extend(_boundary_violations(boundary, storage, transport))
    return out


def _boundary_violations(
    boundary: BoundaryState, storage: StorageSpec, transport: TransportSpec
) -> list[Violation]:
    out = []
    e0 = boundary.initial_energy_mwh
    if not 0 <= e0 <= storage.energy_capacity_mwh:
        out.append(
            Violation(
                "boundary.initial_energy_mwh",
                f"{e0} outside [0, {storage.energy_capacity_mwh}]",
            )
        )
    try:
        hist = boundary.history(transport.travel_steps)
    except ValueError as exc:
        out.append(Violation("boundary.travel_history", str(exc)))
        return out
    if any(g not in (0, 1) for g in hist):
        out.append(Violation("boundary.travel_history", "entries must be 0 or 1"))
        return out
    last = hist[-1] if hist else 0
    if isinstance(boundary.location, InTransit):
        if last != 1:
            out.append(Violation("boundary.travel_history", "in-transit boundary must end with a travel step"))
        else:
            expected = remaining_travel_steps(hist, transport.travel_steps)
            if boundary.location.remaining_steps != expected:
                out.append(
                    Violation(
                        "boundary.location",
                        f"remaining_steps={boundary.location.remaining_steps} but history implies {expected}",
                    )
                )
    elif last != 0:
        out.append(Violation("boundary.travel_history", "a boundary at a node cannot end with a travel step"))
    return out


def remaining_travel_steps(history: Sequence[int], travel_steps: int) -> int:
    """Steps still needed to finish a trip whose trailing flags are ``history``."""
    run = 0
    for g in reversed(history):
        if not g:
            break
        run += 1
    if run == 0:
        return 0
    return max(travel_steps - run, 0)


def throughput_budget(cycle_life_cycles: float, energy_capacity_mwh: float) -> float:
    """Lifetime throughput in MWh; one full cycle charges and discharges the capacity."""
    return cycle_life_cycles * energy_capacity_mwh * 2


def calendar_equivalent_throughput(
    capacity_loss_per_year: float, eol_capacity_fraction: float, budget_mwh: float
) -> float:
    """Daily throughput that wears the battery as fast as calendar fade does.

    A fade of ``1 - eol_capacity_fraction`` consumes the whole budget, so a
    yearly loss is that share of the budget spread over a year.
    """
    if not 0 < eol_capacity_fraction < 1:
        raise ValueError("eol_capacity_fraction must lie strictly between 0 and 1")
    return capacity_loss_per_year / (1 - eol_capacity_fraction) * budget_mwh / DAYS_PER_YEAR


def travel_steps_for(travel_minutes: float, step_minutes: float) -> int:
    """Whole dispatch steps needed for a trip; sub-step travel is rounded up."""
    return max(1, math.ceil(travel_minutes / step_minutes - 1e-9))


def cost_per_step(cost_per_trip: float, travel_steps: int) -> float:
    return cost_per_trip / travel_steps


@dataclass(frozen=True)
class TruckSpec:
    """Vehicle parameters of the portable unit (not part of the dispatch model)."""

    capital_cost_usd: float = 150_000.0
    roundtrip_energy_fraction: float = 0.007
    labor_cost_usd_per_mwh: float = 3.0

    def arrival_energy_mwh(self, storage: StorageSpec) -> float:
        """SOC drawn per one-way trip when trucking energy is deducted."""
        return self.roundtrip_energy_fraction * storage.energy_capacity_mwh / 2
