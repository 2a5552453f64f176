"""Random instance generators shared by the test and acceptance suites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    BoundaryState,
    DegradationParams,
    HorizonConfig,
    InTransit,
    PriceSeries,
    Site,
    StorageSpec,
    TransportSpec,
    remaining_travel_steps,
)


@dataclass(frozen=True)
class Case:
    prices: PriceSeries
    storage: StorageSpec
    transport: TransportSpec
    degradation: DegradationParams
    horizon: HorizonConfig
    boundary: BoundaryState

    def args(self):
        return (self.prices, self.storage, self.transport, self.degradation, self.horizon, self.boundary)

    def replace(self, **kw) -> "Case":
        d = dict(self.__dict__)
        d.update(kw)
        return Case(**d)


def random_boundary(rng: np.random.Generator, travel_steps: int, emax: float, allow_transit: bool = True) -> BoundaryState:
    e0 = float(rng.uniform(0, emax)) if rng.random() < 0.7 else 0.0
    roll = rng.random()
    if allow_transit and roll < 0.25:
        run = int(rng.integers(1, travel_steps + 1))
        hist = [0] * (travel_steps - run) + [1] * run
        dest = Site.A if rng.random() < 0.5 else Site.B
        loc = InTransit(remaining_steps=remaining_travel_steps(hist, travel_steps), destination=dest)
        return BoundaryState(initial_energy_mwh=e0, location=loc, travel_history=tuple(hist))
    site = Site.A if roll < 0.6 else Site.B
    hist = [0] * travel_steps
    if travel_steps > 1 and rng.random() < 0.3:
        # an earlier trip finished before the horizon
        hist[0] = 1
    return BoundaryState(initial_energy_mwh=e0, location=site, travel_history=tuple(hist))


def random_case(
    rng: np.random.Generator,
    max_steps: int = 8,
    travel_choices=(1, 2),
    price_range=(-20.0, 120.0),
    allow_transit: bool = True,
) -> Case:
    H = int(rng.integers(1, max_steps + 1))
    T = int(rng.choice(travel_choices))
    step_hours = float(rng.choice([0.25, 0.5, 1.0]))
    storage = StorageSpec(
        power_capacity_mw=float(rng.choice([1.0, 2.7, 4.0])),
        energy_capacity_mwh=float(rng.choice([1.0, 2.7])),
        efficiency=float(rng.choice([1.0, 0.95, 0.9])),
        self_discharge_per_step=float(rng.choice([0.0, 0.0, 0.01])),
    )
    transport = TransportSpec(travel_steps=T, travel_cost_per_step=float(rng.choice([0.0, 4.0, 15.0])))
    degr = DegradationParams(
        marginal_cost_usd_per_mwh=float(rng.choice([0.0, 5.0, 25.0])),
        calendar_throughput_mwh_per_day=float(rng.choice([0.0, 1.5])),
    )
    horizon = HorizonConfig(step_hours=step_hours, steps_per_day=H)
    lo, hi = price_range
    prices = PriceSeries(rng.uniform(lo, hi, H), rng.uniform(lo, hi, H))
    boundary = random_boundary(rng, T, storage.energy_capacity_mwh, allow_transit)
    return Case(prices, storage, transport, degr, horizon, boundary)


def spread_days(rng: np.random.Generator, days: int, steps: int = 8, spread: float = 60.0) -> list[PriceSeries]:
    """Synthetic days with a midday congestion spread between the two nodes."""
    out = []
    for d in range(days):
        base = 30 + 15 * np.sin(np.linspace(0, 2 * np.pi, steps, endpoint=False)) + rng.normal(0, 3, steps)
        congested = np.zeros(steps)
        lo, hi = steps // 4, 3 * steps // 4
        congested[lo:hi] = spread
        out.append(PriceSeries(base + congested, base - 0.3 * congested, label=f"day{d}"))
    return out


def synthetic_lmp_frame(
    start: str,
    days: int,
    node_a: str = "NODE_A",
    node_b: str = "NODE_B",
    spread: float = 60.0,
    seed: int = 0,
    flat: float | None = None,
):
    """Hourly LMP records for two nodes in the CSV schema (UTC timestamps).

    With ``flat`` every price equals that value; otherwise node A carries a
    midday congestion premium of ``spread`` over a noisy daily shape.
    """
    import pandas as pd

    rng = np.random.default_rng(seed)
    hours = pd.date_range(start, periods=24 * days, freq="h", tz="UTC")
    if flat is not None:
        a = b = np.full(len(hours), float(flat))
    else:
        hod = hours.hour.to_numpy()
        base = 30 + 15 * np.sin(2 * np.pi * hod / 24) + rng.normal(0, 3, len(hours))
        congested = np.where((hod >= 8) & (hod < 16), spread, 0.0)
        a, b = base + congested, base - 0.3 * congested
    frame = pd.DataFrame({
        "timestamp": np.concatenate([hours, hours]),
        "node_id": [node_a] * len(hours) + [node_b] * len(hours),
        "lmp_usd_per_mwh": np.round(np.concatenate([a, b]), 4),
    })
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True)
    return frame
