"""Brute-force reference solver used to validate branch and bound.

Every feasible location trajectory is enumerated with a small automaton
over the states "at A", "at B" and "in transit for r steps". With the
trajectory fixed, the remaining problem is a continuous storage LP solved
by HiGHS, all trajectories at once as one block-diagonal program. A grid
dynamic program over the state of charge can cross-check each sub-solve.

Nothing here touches the native simplex or the MILP row construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..core import (
    BoundaryState,
    DegradationParams,
    HorizonConfig,
    InTransit,
    PriceSeries,
    Site,
    StorageSpec,
    TransportSpec,
)
from ..milp import column_layout, reconstruct_moves
from .branch_bound import MilpSolution

TRAVEL = "T"
DEFAULT_CAP = 50_000


class EnumerationCapError(RuntimeError):
    pass


def enumerate_trajectories(
    horizon: HorizonConfig,
    transport: TransportSpec,
    boundary: BoundaryState,
    *,
    cap: int = DEFAULT_CAP,
    fixed_site: Site | None = None,
) -> list[str]:
    """All feasible location strings, one character per step: "A", "B" or "T".

    A trip lasts at least ``travel_steps`` steps and may end at either node.
    A trip still under way when the horizon ends is allowed.
    """
    T = transport.travel_steps
    H = horizon.steps_per_day
    hist = boundary.history(T)
    loc = boundary.location
    if isinstance(loc, InTransit):
        run = 0
        for g in reversed(hist):
            if not g:
                break
            run += 1
        start = ("T", min(run, T))
    else:
        start = (loc.value, 0)

    if fixed_site is not None:
        if start != (fixed_site.value, 0):
            return []
        return [fixed_site.value * H]

    out: list[str] = []
    stack = [(start, "")]
    while stack:
        (state, run), path = stack.pop()
        if len(path) == H:
            out.append(path)
            if len(out) > cap:
                raise EnumerationCapError(
                    f"more than {cap} trajectories; use a shorter horizon for the oracle"
                )
            continue
        if state == TRAVEL:
            nxt = [(("T", min(run + 1, T)), "T")]
            if run >= T:
                nxt += [(("A", 0), "A"), (("B", 0), "B")]
        else:
            nxt = [((state, 0), state), (("T", 1), "T")]
        for s, ch in reversed(nxt):
            stack.append((s, path + ch))
    return out


def trajectory_arrays(traj: str) -> tuple[np.ndarray, np.ndarray]:
    at_node = np.array([[c == "A" for c in traj], [c == "B" for c in traj]], dtype=int).reshape(2, len(traj))
    traveling = np.array([c == TRAVEL for c in traj], dtype=int)
    return at_node, traveling


@dataclass
class OracleSolution(MilpSolution):
    trajectory: str = ""
    trajectories: int = 0
    dp_max_gap: float | None = None


class _Sub:
    """Continuous sub-problem shared by all trajectories of one instance."""

    def __init__(self, prices, storage, degr, horizon, boundary, arrival_energy_mwh):
        H = horizon.steps_per_day
        self.H = H
        self.dh = horizon.step_hours
        self.eta = storage.efficiency
        self.rho = storage.self_discharge_per_step
        self.pmax = storage.power_capacity_mw
        self.emax = storage.energy_capacity_mwh
        self.e0 = boundary.initial_energy_mwh
        self.cd = degr.marginal_cost_usd_per_mwh
        self.lam = prices.as_matrix()
        self.arrival = arrival_energy_mwh
        self.calendar = degr.calendar_throughput(horizon)
        self.boundary = boundary
        # block variables: discharge[H], charge[H], energy[H]
        eye = sp.identity(H, format="csr")
        shift = sp.diags([np.ones(H - 1)], [-1], shape=(H, H), format="csr") if H > 1 else sp.csr_matrix((H, H))
        self.A = sp.hstack([eye * (self.dh / self.eta), eye * (-self.eta * self.dh), eye - shift * (1 - self.rho)]).tocsr()

    def data(self, traj: str, travel_steps: int):
        at_node, traveling = trajectory_arrays(traj)
        H = self.H
        present = at_node.sum(axis=0) > 0
        node = np.where(at_node[1] == 1, 1, 0)
        lam = self.lam[node, np.arange(H)]
        c = np.concatenate([
            -(lam - self.cd) * self.dh * present,
            (lam + self.cd) * self.dh * present,
            np.zeros(H),
        ])
        ub = np.concatenate([self.pmax * present, self.pmax * present, np.full(H, self.emax)])
        b = np.zeros(H)
        b[0] = (1 - self.rho) * self.e0
        if self.arrival:
            arriving, _, _ = reconstruct_moves(at_node, traveling, self.boundary, travel_steps)
            b -= self.arrival * arriving.sum(axis=0)
        return c, ub, b, lam, present, traveling


def _solve_batch(sub: _Sub, blocks: list[tuple]) -> np.ndarray | None:
    K = len(blocks)
    A = sp.kron(sp.identity(K, format="csr"), sub.A, format="csr")
    c = np.concatenate([blk[0] for blk in blocks])
    ub = np.concatenate([blk[1] for blk in blocks])
    b = np.concatenate([blk[2] for blk in blocks])
    res = linprog(c, A_eq=A, b_eq=b, bounds=np.column_stack([np.zeros_like(ub), ub]), method="highs")
    if res.status != 0:
        return None
    return res.x.reshape(K, -1)


def _solve_one(sub: _Sub, blk: tuple) -> np.ndarray | None:
    c, ub, b = blk[:3]
    res = linprog(
        c, A_eq=sub.A, b_eq=b, bounds=np.column_stack([np.zeros_like(ub), ub]), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res.x if res.status == 0 else None


def _block_value(sub: _Sub, blk: tuple, z: np.ndarray, travel_cost: float) -> float:
    H = sub.H
    lam, present, traveling = blk[3], blk[4], blk[5]
    dis, cha = z[:H] * present, z[H:2 * H] * present
    revenue = float(np.sum(lam * (dis - cha)) * sub.dh)
    throughput = float((dis.sum() + cha.sum()) * sub.dh)
    return revenue - travel_cost * traveling.sum() - sub.cd * (throughput + sub.calendar)


def soc_dp_value(
    traj: str,
    prices: PriceSeries,
    storage: StorageSpec,
    degr: DegradationParams,
    horizon: HorizonConfig,
    boundary: BoundaryState,
    travel_cost_per_step: float,
    levels: int = 201,
) -> float | None:
    """Best value of a fixed trajectory with energy restricted to a uniform grid.

    Any grid path is feasible for the continuous problem, so the result is
    a lower bound that tightens as ``levels`` grows. Returns None when the
    grid cannot represent idle steps exactly (self-discharge > 0).
    """
    if storage.self_discharge_per_step > 0:
        return None
    H = horizon.steps_per_day
    dh = horizon.step_hours
    eta, pmax, cd = storage.efficiency, storage.power_capacity_mw, degr.marginal_cost_usd_per_mwh
    grid = np.linspace(0.0, storage.energy_capacity_mwh, levels)
    lam_all = prices.as_matrix()

    def step_reward(delta: np.ndarray, lam: float) -> np.ndarray:
        # maximize (lam - cd) dh dis - (lam + cd) dh cha with eta*cha - dis/eta = delta/dh
        tol = 1e-12
        best = np.full(delta.shape, -np.inf)
        q = delta / dh
        cands = [
            (np.maximum(q, 0) / eta, np.maximum(-q, 0) * eta),
            (np.full_like(q, pmax), eta * (eta * pmax - q)),
            ((q + pmax / eta) / eta, np.full_like(q, pmax)),
        ]
        for cha, dis in cands:
            ok = (cha >= -tol) & (cha <= pmax + tol) & (dis >= -tol) & (dis <= pmax + tol)
            val = (lam - cd) * dh * dis - (lam + cd) * dh * cha
            best = np.where(ok, np.maximum(best, val), best)
        return best

    value = np.zeros(levels)
    for h in range(H - 1, -1, -1):
        ch = traj[h]
        src = grid if h > 0 else np.array([boundary.initial_energy_mwh])
        delta = grid[None, :] - src[:, None]
        if ch == TRAVEL:
            r = np.where(np.abs(delta) <= 1e-12, 0.0, -np.inf)
        else:
            r = step_reward(delta, lam_all[0 if ch == "A" else 1, h])
        value = np.max(r + value[None, :], axis=1)
    best = float(value[0])
    travel = sum(1 for ch in traj if ch == TRAVEL)
    return best - travel_cost_per_step * travel - cd * degr.calendar_throughput(horizon)


def oracle_solve(
    prices: PriceSeries,
    storage: StorageSpec,
    transport: TransportSpec,
    degr: DegradationParams,
    horizon: HorizonConfig,
    boundary: BoundaryState,
    *,
    arrival_energy_mwh: float = 0.0,
    fixed_site: Site | None = None,
    cap: int = DEFAULT_CAP,
    dp_check: bool = False,
    dp_levels: int = 201,
) -> OracleSolution:
    """Exhaustive optimum over all trajectories; ties go to the first enumerated."""
    trajs = enumerate_trajectories(horizon, transport, boundary, cap=cap, fixed_site=fixed_site)
    if not trajs:
        raise RuntimeError("no feasible trajectory from this boundary")
    sub = _Sub(prices, storage, degr, horizon, boundary, arrival_energy_mwh)
    T = transport.travel_steps
    blocks = [sub.data(t, T) for t in trajs]
    H = sub.H
    if H == 0:
        zs = [np.zeros(0)] * len(blocks)
    else:
        Z = _solve_batch(sub, blocks)
        zs = list(Z) if Z is not None else [_solve_one(sub, blk) for blk in blocks]
    values = np.array([
        _block_value(sub, blk, z, transport.travel_cost_per_step) if z is not None else -np.inf
        for blk, z in zip(blocks, zs)
    ])
    if not np.isfinite(values).any():
        raise RuntimeError("every trajectory is infeasible")
    # re-solve the contenders alone at tight tolerances before ranking
    top = np.flatnonzero(values >= values.max() - 1e-4 * max(1.0, abs(values.max())))
    for k in top:
        if H:
            z = _solve_one(sub, blocks[k])
            if z is not None:
                zs[k] = z
                values[k] = _block_value(sub, blocks[k], z, transport.travel_cost_per_step)
    best = int(np.argmax(values))

    dp_gap = None
    if dp_check:
        dp_gap = 0.0
        for t, v in zip(trajs, values):
            if not np.isfinite(v):
                continue
            dp = soc_dp_value(t, prices, storage, degr, horizon, boundary, transport.travel_cost_per_step, dp_levels)
            if dp is None:
                dp_gap = None
                break
            if dp > v + 1e-6 * max(1.0, abs(v)):
                raise AssertionError(f"grid DP beats the LP on trajectory {t}: {dp} > {v}")
            dp_gap = max(dp_gap, v - dp)

    x = _to_columns(trajs[best], zs[best], sub, boundary, T)
    return OracleSolution(
        x=x, objective=float(values[best]), nodes=len(trajs), gap=0.0,
        trajectory=trajs[best], trajectories=len(trajs), dp_max_gap=dp_gap,
    )


def _to_columns(traj: str, z: np.ndarray, sub: _Sub, boundary: BoundaryState, T: int) -> np.ndarray:
    H = sub.H
    cols = column_layout(H)
    x = np.zeros(len(cols))
    at_node, traveling = trajectory_arrays(traj)
    arriving, departing, aux = reconstruct_moves(at_node, traveling, boundary, T)
    node_arrays = {"at_node": at_node, "arriving": arriving, "departing": departing, "aux": aux}
    for (kind, node, h), j in cols.items():
        i = h - 1
        if kind == "traveling":
            x[j] = traveling[i]
        elif kind == "energy":
            x[j] = z[2 * H + i]
        elif kind in ("discharge", "charge"):
            if at_node[node.index, i]:
                x[j] = z[i] if kind == "discharge" else z[H + i]
        else:
            x[j] = node_arrays[kind][node.index, i]
    return x
