import itertools

import numpy as np
import pytest

from portarb.core import (
    BoundaryState,
    DegradationParams,
    HorizonConfig,
    InTransit,
    PriceSeries,
    Site,
    StorageSpec,
    TransportSpec,
)
from portarb.milp import build_day_instance, check_feasibility, extract_schedule
from portarb.solver import EnumerationCapError, enumerate_trajectories, oracle_solve, soc_dp_value, solve_milp
from portarb.solver.oracle import trajectory_arrays
from portarb.testing import random_case

ZERO_DEG = DegradationParams(marginal_cost_usd_per_mwh=0.0, calendar_throughput_mwh_per_day=0.0)


def trajs(H, T, boundary=BoundaryState(), **kw):
    return enumerate_trajectories(HorizonConfig(steps_per_day=H), TransportSpec(travel_steps=T), boundary, **kw)


def brute_force(H, T, boundary):
    """Filter all 3^H strings through the model's own feasibility check."""
    prices = PriceSeries.flat(0.0, H)
    inst = build_day_instance(prices, StorageSpec(), TransportSpec(travel_steps=T), ZERO_DEG,
                              HorizonConfig(steps_per_day=H), boundary)
    out = []
    for chars in itertools.product("ABT", repeat=H):
        t = "".join(chars)
        at, tr = trajectory_arrays(t)
        x = np.zeros(inst.n_cols)
        for h in range(H):
            for n, site in enumerate((Site.A, Site.B)):
                x[inst.col("at_node", h + 1, site)] = at[n, h]
            x[inst.col("traveling", h + 1)] = tr[h]
        try:
            extract_schedule(inst, x)
        except ValueError:
            continue
        out.append(t)
    return sorted(out)


def test_small_enumerations():
    assert sorted(trajs(1, 1)) == ["A", "T"]
    assert trajs(0, 1) == [""]


def test_two_step_trip_from_node():
    # staying, a two-step transit, or leaving on the second step
    assert sorted(trajs(2, 2)) == ["AA", "AT", "TT"]


@pytest.mark.parametrize("H,T", [(3, 1), (4, 1), (4, 2), (5, 3), (6, 2)])
def test_enumeration_matches_brute_force(H, T):
    assert sorted(trajs(H, T)) == brute_force(H, T, BoundaryState())


def test_enumeration_from_transit_matches_brute_force():
    b = BoundaryState(location=InTransit(remaining_steps=1, destination=Site.B), travel_history=(0, 1))
    got = sorted(trajs(4, 2, b))
    assert got == brute_force(4, 2, b)
    assert all(t[0] == "T" for t in got)


def test_fixed_site_single_trajectory():
    assert trajs(3, 1, fixed_site=Site.A) == ["AAA"]


def test_cap():
    with pytest.raises(EnumerationCapError):
        trajs(12, 1, cap=50)


def test_spread_oracle():
    args = (
        PriceSeries(np.zeros(3), np.full(3, 100.0)),
        StorageSpec(power_capacity_mw=4.0, energy_capacity_mwh=1.0, efficiency=1.0),
        TransportSpec(travel_steps=1, travel_cost_per_step=4.0),
        ZERO_DEG,
        HorizonConfig(step_hours=0.25, steps_per_day=3),
        BoundaryState(initial_energy_mwh=1.0, location=Site.A),
    )
    sol = oracle_solve(*args, dp_check=True)
    assert sol.objective == pytest.approx(96.0)
    # leaving at step 1 or step 2 earns the same; ties go to the first enumerated
    assert sol.trajectory in ("TBB", "ATB")
    assert sol.trajectories == len(trajs(3, 1))
    assert sol.dp_max_gap == pytest.approx(0.0, abs=1e-6)


def test_zero_spread_oracle():
    sol = oracle_solve(PriceSeries.flat(30.0, 4), StorageSpec(), TransportSpec(), ZERO_DEG,
                       HorizonConfig(steps_per_day=4), BoundaryState())
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_oracle_agrees_with_milp_including_dp(rng):
    for _ in range(15):
        case = random_case(rng, max_steps=5)
        sol = oracle_solve(*case.args(), dp_check=True, dp_levels=101)
        inst = build_day_instance(*case.args())
        assert sol.objective == pytest.approx(solve_milp(inst).objective, abs=1e-6)
        assert check_feasibility(extract_schedule(inst, sol.x), inst.model) == []


def test_dp_is_lower_bound_and_skips_self_discharge():
    args = dict(prices=PriceSeries([10.0, 90.0], [10.0, 90.0]), storage=StorageSpec(),
                degr=ZERO_DEG, horizon=HorizonConfig(step_hours=1.0, steps_per_day=2),
                boundary=BoundaryState(), travel_cost_per_step=0.0)
    v = soc_dp_value("AA", **args)
    exact = oracle_solve(args["prices"], StorageSpec(), TransportSpec(), ZERO_DEG,
                         args["horizon"], BoundaryState(), fixed_site=Site.A).objective
    assert v <= exact + 1e-9
    leaky = dict(args, storage=StorageSpec(self_discharge_per_step=0.01))
    assert soc_dp_value("AA", **leaky) is None
