"""Day-scale MILP for joint dispatch and trucking of a portable battery.

Columns are laid out kind-major, so every location indicator has a lower
index than every traveling flag:

    discharge[n, h], charge[n, h], energy[h],
    at_node[n, h], arriving[n, h], departing[n, h], aux[n, h], traveling[h]

Steps are numbered 1..H in names and stored 0-based in arrays.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, TextIO

import numpy as np
import scipy.sparse as sp

from .core import (
    NODES,
    BoundaryState,
    DegradationParams,
    HorizonConfig,
    InTransit,
    PriceSeries,
    Site,
    StorageSpec,
    TransportSpec,
    remaining_travel_steps,
    validate,
)

FEAS_TOL = 1e-7
INT_TOL = 1e-6

CONTINUOUS_KINDS = ("discharge", "charge", "energy")
BINARY_KINDS = ("at_node", "arriving", "departing", "aux", "traveling")
# stored energy split by location and along each location change
LOCATION_ENERGY_KINDS = (
    "stored_at", "stored_transit", "carry_stay", "carry_depart", "carry_arrive", "carry_transit",
)
NODE_KINDS = {
    "discharge", "charge", "at_node", "arriving", "departing", "aux",
    "stored_at", "carry_stay", "carry_depart", "carry_arrive",
}
_KIND_ORDER = CONTINUOUS_KINDS + BINARY_KINDS

LE, EQ, GE = "L", "E", "G"


class InstanceError(ValueError):
    """Inputs cannot be turned into a well-formed day instance."""


class RoundingError(ValueError):
    """Rounding a solver solution broke feasibility beyond tolerance."""


@dataclass(frozen=True)
class DayModel:
    """Everything a day instance was built from; kept for re-verification."""

    prices: PriceSeries
    storage: StorageSpec
    transport: TransportSpec
    degradation: DegradationParams
    horizon: HorizonConfig
    boundary: BoundaryState
    linking: bool = True
    arrival_energy_mwh: float = 0.0
    fixed_site: Site | None = None

    @property
    def steps(self) -> int:
        return self.horizon.steps_per_day

    def calendar_throughput(self) -> float:
        return self.degradation.calendar_throughput(self.horizon)


@dataclass(frozen=True)
class MilpInstance:
    """Sparse MILP in maximization form.

    Row ``i`` reads ``A[i] @ x  (sense[i])  rhs[i]`` with sense one of
    ``"L"``, ``"E"``, ``"G"``. ``branch_priority`` is 0 for columns never
    branched on and a positive rank otherwise (lower rank branches first).
    """

    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    objective: np.ndarray
    objective_constant: float = 0.0
    columns: dict = field(default_factory=dict)
    row_names: tuple = ()
    branch_priority: np.ndarray | None = None
    model: DayModel | None = None

    @property
    def n_cols(self) -> int:
        return len(self.lb)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def col(self, kind: str, step: int, node: Site | None = None) -> int:
        return self.columns[(kind, node, step)]

    def column_name(self, j: int) -> str:
        if not hasattr(self, "_names"):
            names = [""] * self.n_cols
            for (kind, node, step), c in self.columns.items():
                names[c] = f"{kind}_{node.value}_{step}" if node is not None else f"{kind}_{step}"
            object.__setattr__(self, "_names", names)
        return self._names[j] or f"x{j}"

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective @ x + self.objective_constant)

    def check(self):
        """Raise if the structural invariants of the instance do not hold."""
        if np.any(self.lb > self.ub):
            raise InstanceError("some column has lower bound above upper bound")
        if self.A.shape[1] != self.n_cols:
            raise InstanceError("constraint matrix width differs from column count")
        ints = np.flatnonzero(self.integer)
        if np.any((self.lb[ints] < 0) | (self.ub[ints] > 1)):
            raise InstanceError("binary column bounds must lie within [0, 1]")

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation amount (zero when satisfied)."""
        ax = self.A @ x
        d = ax - self.rhs
        out = np.where(self.sense == LE, np.maximum(d, 0.0), 0.0)
        out = np.where(self.sense == GE, np.maximum(-d, 0.0), out)
        return np.where(self.sense == EQ, np.abs(d), out)

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL, int_tol: float = INT_TOL) -> bool:
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        if np.any(self.residuals(x) > tol):
            return False
        xi = x[self.integer]
        return bool(np.all(np.abs(xi - np.round(xi)) <= int_tol))

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "MilpInstance":
        return MilpInstance(
            lb, ub, self.integer, self.A, self.sense, self.rhs, self.objective,
            self.objective_constant, self.columns, self.row_names, self.branch_priority, self.model,
        )


class _Rows:
    def __init__(self):
        self.i: list[int] = []
        self.j: list[int] = []
        self.v: list[float] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self.names: list[str] = []

    def add(self, terms: dict[int, float], sense: str, rhs: float, name: str):
        r = len(self.rhs)
        for j, v in terms.items():
            if v != 0.0:
                self.i.append(r)
                self.j.append(j)
                self.v.append(v)
        self.sense.append(sense)
        self.rhs.append(rhs)
        self.names.append(name)


def column_layout(steps: int, location_energy: bool = False) -> dict:
    """Map (kind, node, step) to column index for a horizon of ``steps``."""
    cols = {}
    c = 0
    kinds = _KIND_ORDER + (LOCATION_ENERGY_KINDS if location_energy else ())
    for kind in kinds:
        if kind in NODE_KINDS:
            for node in NODES:
                for h in range(1, steps + 1):
                    cols[(kind, node, h)] = c
                    c += 1
        else:
            for h in range(1, steps + 1):
                cols[(kind, None, h)] = c
                c += 1
    return cols


def build_day_instance(
    prices: PriceSeries,
    storage: StorageSpec,
    transport: TransportSpec,
    degr: DegradationParams,
    horizon: HorizonConfig,
    boundary: BoundaryState,
    *,
    linking: bool = True,
    arrival_energy_mwh: float = 0.0,
    fixed_site: Site | None = None,
    location_energy: bool = False,
) -> MilpInstance:
    """Build the joint operation/transportation MILP for one horizon.

    ``linking`` replaces the at-most-one-node inequality by the equality
    ``at_node[A] + at_node[B] + traveling = 1``. ``arrival_energy_mwh`` is
    drawn from storage on each arrival step. ``fixed_site`` pins the unit to
    one node for the whole horizon (stationary operation).

    ``location_energy`` adds continuous columns that split stored energy by
    where the unit is (A, B or on the road) and carry it along each
    location change. Integer solutions are unchanged, but the LP
    relaxation can no longer let a fractionally present unit charge at one
    node and discharge at the other from a single shared state of charge,
    which tightens the bound considerably on congested days. Requires
    ``linking``.
    """
    H = horizon.steps_per_day
    if len(prices.node_a) != H or len(prices.node_b) != H:
        raise InstanceError(
            f"price series have lengths {len(prices.node_a)}/{len(prices.node_b)}, horizon has {H} steps"
        )
    if not (np.all(np.isfinite(prices.node_a)) and np.all(np.isfinite(prices.node_b))):
        raise InstanceError("prices must be finite")
    problems = validate(storage, transport, degr, horizon, boundary)
    if problems:
        raise InstanceError("; ".join(f"{p.field}: {p.message}" for p in problems))
    if fixed_site is not None and boundary.location != fixed_site:
        raise InstanceError(f"stationary operation at {fixed_site.value} needs the unit to start there")
    if location_energy and not linking:
        raise InstanceError("location_energy requires the linking equality")

    model = DayModel(
        prices, storage, transport, degr, horizon, boundary,
        linking, arrival_energy_mwh, fixed_site,
    )
    T = transport.travel_steps
    dh = horizon.step_hours
    pmax = storage.power_capacity_mw
    hist = boundary.history(T)
    omega0 = boundary.initial_presence()

    cols = column_layout(H, location_energy)
    n = len(cols)
    lb = np.zeros(n)
    ub = np.ones(n)
    integer = np.zeros(n, dtype=bool)
    priority = np.zeros(n, dtype=int)
    c = np.zeros(n)

    def C(kind, h, node=None):
        return cols[(kind, node, h)]

    for (kind, node, h), j in cols.items():
        if kind in ("discharge", "charge"):
            ub[j] = pmax
        elif kind == "energy" or kind in LOCATION_ENERGY_KINDS:
            ub[j] = storage.energy_capacity_mwh
        else:
            integer[j] = True
        if kind == "at_node":
            priority[j] = 1
        elif kind == "traveling":
            priority[j] = 2

    price = prices.as_matrix()
    cd = degr.marginal_cost_usd_per_mwh
    for node in NODES:
        for h in range(1, H + 1):
            lam = price[node.index, h - 1]
            c[C("discharge", h, node)] = lam * dh - cd * dh
            c[C("charge", h, node)] = -lam * dh - cd * dh
    for h in range(1, H + 1):
        c[C("traveling", h)] = -transport.travel_cost_per_step
    constant = -cd * model.calendar_throughput()

    if fixed_site is not None:
        for h in range(1, H + 1):
            ub[C("traveling", h)] = 0
            lb[C("at_node", h, fixed_site)] = 1
            ub[C("at_node", h, fixed_site.other)] = 0

    rows = _Rows()

    def gamma(k: int, terms: dict, coef: float) -> float:
        """Add coef*traveling[k] to terms, or return its constant value if k <= 0."""
        if k >= 1:
            j = C("traveling", k)
            terms[j] = terms.get(j, 0.0) + coef
            return 0.0
        return coef * hist[T - 1 + k]

    for h in range(1, H + 1):
        if location_energy:
            _location_energy_rows(rows, C, h, model, gamma)
        else:
            _energy_balance_row(rows, C, h, model)

        # power only where the unit is connected
        for node in NODES:
            w = C("at_node", h, node)
            rows.add({C("discharge", h, node): 1.0, w: -pmax}, LE, 0.0, f"disch_loc_{node.value}_{h}")
            rows.add({C("charge", h, node): 1.0, w: -pmax}, LE, 0.0, f"charge_loc_{node.value}_{h}")

        # presence
        terms = {C("at_node", h, node): 1.0 for node in NODES}
        if linking:
            terms[C("traveling", h)] = 1.0
            rows.add(terms, EQ, 1.0, f"presence_{h}")
        else:
            rows.add(terms, LE, 1.0, f"presence_{h}")

        # arrival/departure bookkeeping
        for node in NODES:
            terms = {
                C("arriving", h, node): 1.0,
                C("departing", h, node): -1.0,
                C("at_node", h, node): -1.0,
            }
            rhs = 0.0
            if h > 1:
                terms[C("at_node", h - 1, node)] = 1.0
            else:
                rhs = -float(omega0[node.index])
            rows.add(terms, EQ, rhs, f"transition_{node.value}_{h}")
        terms = {}
        for node in NODES:
            terms[C("arriving", h, node)] = 1.0
            terms[C("departing", h, node)] = 1.0
        rows.add(terms, LE, 1.0, f"one_move_{h}")

        terms = {}
        for node in NODES:
            terms[C("arriving", h, node)] = 1.0
            terms[C("aux", h, node)] = -1.0
        const = gamma(h - 1, terms, -1.0) + gamma(h, terms, 1.0)
        rows.add(terms, EQ, -const, f"travel_switch_{h}")

        terms = {}
        for node in NODES:
            terms[C("arriving", h, node)] = 1.0
            terms[C("aux", h, node)] = 1.0
        rows.add(terms, LE, 1.0, f"arrive_or_leave_{h}")

        # a trip started k steps ago is still under way
        for k in range(1, T):
            terms = {}
            const = gamma(h, terms, 1.0) + gamma(h - k, terms, -1.0) + gamma(h - k - 1, terms, 1.0)
            terms = {j: v for j, v in terms.items() if v != 0.0}
            if not terms:
                if const < -FEAS_TOL:
                    raise InstanceError(f"travel history forces an unfinished trip at step {h}")
                continue
            rows.add(terms, GE, -const, f"min_travel_{h}_{k}")

    A = sp.csr_matrix((rows.v, (rows.i, rows.j)), shape=(len(rows.rhs), n))
    inst = MilpInstance(
        lb=lb, ub=ub, integer=integer, A=A,
        sense=np.array(rows.sense), rhs=np.array(rows.rhs, dtype=float),
        objective=c, objective_constant=constant, columns=cols,
        row_names=tuple(rows.names), branch_priority=priority, model=model,
    )
    inst.check()
    return inst


def _energy_balance_row(rows: _Rows, C, h: int, model: DayModel):
    st = model.storage
    dh = model.horizon.step_hours
    terms = {C("energy", h): 1.0}
    rhs = 0.0
    if h > 1:
        terms[C("energy", h - 1)] = -(1 - st.self_discharge_per_step)
    else:
        rhs = (1 - st.self_discharge_per_step) * model.boundary.initial_energy_mwh
    for node in NODES:
        terms[C("charge", h, node)] = -st.efficiency * dh
        terms[C("discharge", h, node)] = dh / st.efficiency
        if model.arrival_energy_mwh:
            terms[C("arriving", h, node)] = model.arrival_energy_mwh
    rows.add(terms, EQ, rhs, f"balance_{h}")


def _location_energy_rows(rows: _Rows, C, h: int, model: DayModel, gamma):
    """Energy balance written per location, with energy carried along location changes."""
    st = model.storage
    dh = model.horizon.step_hours
    keep = 1 - st.self_discharge_per_step
    emax = st.energy_capacity_mwh
    e0 = model.boundary.initial_energy_mwh
    start = model.boundary.location

    # energy leaving each location of step h-1
    for node in NODES:
        terms = {C("carry_stay", h, node): 1.0, C("carry_depart", h, node): 1.0}
        rhs = 0.0
        if h > 1:
            terms[C("stored_at", h - 1, node)] = -1.0
        elif start == node:
            rhs = e0
        rows.add(terms, EQ, rhs, f"leave_{node.value}_{h}")
    terms = {C("carry_transit", h): 1.0}
    for node in NODES:
        terms[C("carry_arrive", h, node)] = 1.0
    rhs = 0.0
    if h > 1:
        terms[C("stored_transit", h - 1)] = -1.0
    elif isinstance(start, InTransit):
        rhs = e0
    rows.add(terms, EQ, rhs, f"leave_transit_{h}")

    # energy arriving at each location of step h, plus dispatch there
    for node in NODES:
        terms = {
            C("stored_at", h, node): 1.0,
            C("carry_stay", h, node): -keep,
            C("carry_arrive", h, node): -keep,
            C("charge", h, node): -st.efficiency * dh,
            C("discharge", h, node): dh / st.efficiency,
        }
        if model.arrival_energy_mwh:
            terms[C("arriving", h, node)] = model.arrival_energy_mwh
        rows.add(terms, EQ, 0.0, f"balance_{node.value}_{h}")
    terms = {C("stored_transit", h): 1.0, C("carry_transit", h): -keep}
    for node in NODES:
        terms[C("carry_depart", h, node)] = -keep
    rows.add(terms, EQ, 0.0, f"balance_transit_{h}")

    terms = {C("energy", h): 1.0, C("stored_transit", h): -1.0}
    for node in NODES:
        terms[C("stored_at", h, node)] = -1.0
    rows.add(terms, EQ, 0.0, f"energy_total_{h}")

    # each piece is bounded by capacity times its location or move indicator
    for node in NODES:
        w, a, b = C("at_node", h, node), C("arriving", h, node), C("departing", h, node)
        rows.add({C("stored_at", h, node): 1.0, w: -emax}, LE, 0.0, f"stored_cap_{node.value}_{h}")
        rows.add({C("carry_stay", h, node): 1.0, w: -emax, a: emax}, LE, 0.0, f"stay_cap_{node.value}_{h}")
        rows.add({C("carry_depart", h, node): 1.0, b: -emax}, LE, 0.0, f"depart_cap_{node.value}_{h}")
        rows.add({C("carry_arrive", h, node): 1.0, a: -emax}, LE, 0.0, f"arrive_cap_{node.value}_{h}")
    terms = {C("stored_transit", h): 1.0}
    const = gamma(h, terms, -emax)
    rows.add(terms, LE, -const, f"stored_cap_transit_{h}")
    terms = {C("carry_transit", h): 1.0}
    const = gamma(h, terms, -emax)
    for node in NODES:
        terms[C("departing", h, node)] = emax
    rows.add(terms, LE, -const, f"transit_cap_{h}")


@dataclass
class DispatchSchedule:
    """Per-step decisions for one horizon plus the objective decomposition.

    Node-indexed arrays have shape (2, H) with row 0 for node A.
    """

    step_hours: float
    discharge_mw: np.ndarray
    charge_mw: np.ndarray
    at_node: np.ndarray
    arriving: np.ndarray
    departing: np.ndarray
    aux: np.ndarray
    traveling: np.ndarray
    energy_mwh: np.ndarray
    market_revenue_usd: float = 0.0
    transport_cost_usd: float = 0.0
    degradation_cost_usd: float = 0.0
    net_value_usd: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.traveling)

    @property
    def throughput_mwh(self) -> float:
        return float((self.discharge_mw.sum() + self.charge_mw.sum()) * self.step_hours)

    @property
    def travel_steps_used(self) -> int:
        return int(self.traveling.sum())

    @property
    def travel_hours(self) -> float:
        return self.travel_steps_used * self.step_hours

    @property
    def departures(self) -> int:
        return int(self.departing.sum())

    def final_location(self, boundary: BoundaryState, travel_steps: int):
        """Location after the last step; trips in progress keep their origin's opposite node."""
        H = self.steps
        if H == 0:
            return boundary.location
        if self.traveling[-1]:
            hist = self.travel_history(boundary, travel_steps)
            origin = self._last_origin(boundary)
            dest = origin.other if origin is not None else Site.A
            return InTransit(remaining_steps=remaining_travel_steps(hist, travel_steps), destination=dest)
        return Site.A if self.at_node[0, -1] else Site.B

    def _last_origin(self, boundary: BoundaryState) -> Site | None:
        for h in range(self.steps - 1, -1, -1):
            if self.at_node[0, h]:
                return Site.A
            if self.at_node[1, h]:
                return Site.B
        loc = boundary.location
        if isinstance(loc, InTransit):
            return loc.destination.other
        return loc

    def travel_history(self, boundary: BoundaryState, travel_steps: int) -> tuple[int, ...]:
        full = list(boundary.history(travel_steps)) + [int(g) for g in self.traveling]
        return tuple(full[len(full) - travel_steps:])

    def next_boundary(self, boundary: BoundaryState, travel_steps: int) -> BoundaryState:
        energy = float(self.energy_mwh[-1]) if self.steps else boundary.initial_energy_mwh
        return BoundaryState(
            initial_energy_mwh=energy,
            location=self.final_location(boundary, travel_steps),
            travel_history=self.travel_history(boundary, travel_steps),
        )


class Objective(NamedTuple):
    market_revenue_usd: float
    transport_cost_usd: float
    degradation_cost_usd: float
    net_value_usd: float


def decompose_objective(
    discharge: np.ndarray, charge: np.ndarray, traveling: np.ndarray, model: DayModel
) -> Objective:
    dh = model.horizon.step_hours
    prices = model.prices.as_matrix()
    revenue = float(np.sum(prices * (discharge - charge)) * dh)
    transport = float(model.transport.travel_cost_per_step * np.sum(traveling))
    throughput = float((discharge.sum() + charge.sum()) * dh)
    degradation = model.degradation.marginal_cost_usd_per_mwh * (throughput + model.calendar_throughput())
    return Objective(revenue, transport, degradation, revenue - transport - degradation)


def reconstruct_moves(
    at_node: np.ndarray, traveling: np.ndarray, boundary: BoundaryState, travel_steps: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrival, departure and auxiliary flags implied by a location trajectory.

    Raises RoundingError when no 0/1 assignment satisfies the bookkeeping rows.
    """
    H = at_node.shape[1]
    prev_w = np.array(boundary.initial_presence())
    prev_g = boundary.history(travel_steps)[-1] if travel_steps else 0
    arriving = np.zeros((2, H), dtype=int)
    departing = np.zeros((2, H), dtype=int)
    aux = np.zeros((2, H), dtype=int)
    for h in range(H):
        dw = at_node[:, h] - prev_w
        arriving[:, h] = np.maximum(dw, 0)
        departing[:, h] = np.maximum(-dw, 0)
        need = arriving[:, h].sum() - (prev_g - traveling[h])
        if need not in (0, 1):
            raise RoundingError(f"travel flags at step {h + 1} cannot be matched by arrivals/departures")
        if need == 1:
            k = int(np.argmax(departing[:, h])) if departing[:, h].any() else 0
            aux[k, h] = 1
        prev_w = at_node[:, h]
        prev_g = traveling[h]
    return arriving, departing, aux


def extract_schedule(instance: MilpInstance, solution: np.ndarray, tol: float = FEAS_TOL) -> DispatchSchedule:
    """Turn a solver solution into a schedule with a freshly computed objective."""
    model = instance.model
    if model is None:
        raise InstanceError("instance carries no day model")
    x = np.asarray(solution, dtype=float)
    if x.shape != (instance.n_cols,):
        raise InstanceError(f"solution has shape {x.shape}, expected ({instance.n_cols},)")
    H = model.steps
    T = model.transport.travel_steps

    def grab(kind):
        if kind in NODE_KINDS:
            return np.array([[x[instance.col(kind, h, node)] for h in range(1, H + 1)] for node in NODES])
        return np.array([x[instance.col(kind, h)] for h in range(1, H + 1)])

    ints = {}
    for kind in ("at_node", "traveling"):
        raw = grab(kind)
        rounded = np.round(raw)
        if raw.size and np.max(np.abs(raw - rounded)) > INT_TOL:
            raise RoundingError(f"{kind} is not integral within {INT_TOL}")
        ints[kind] = rounded.astype(int).reshape(raw.shape)
    pmax = model.storage.power_capacity_mw
    emax = model.storage.energy_capacity_mwh
    discharge = np.clip(grab("discharge"), 0.0, pmax)
    charge = np.clip(grab("charge"), 0.0, pmax)
    energy = np.clip(grab("energy"), 0.0, emax)
    # solver noise below tolerance is snapped away
    discharge[discharge < 1e-10] = 0.0
    charge[charge < 1e-10] = 0.0
    energy[np.abs(energy) < 1e-10] = 0.0
    arriving, departing, aux = reconstruct_moves(ints["at_node"], ints["traveling"], model.boundary, T)
    obj = decompose_objective(discharge, charge, ints["traveling"], model)
    sched = DispatchSchedule(
        step_hours=model.horizon.step_hours,
        discharge_mw=discharge,
        charge_mw=charge,
        at_node=ints["at_node"],
        arriving=arriving,
        departing=departing,
        aux=aux,
        traveling=ints["traveling"],
        energy_mwh=energy,
        market_revenue_usd=obj.market_revenue_usd,
        transport_cost_usd=obj.transport_cost_usd,
        degradation_cost_usd=obj.degradation_cost_usd,
        net_value_usd=obj.net_value_usd,
    )
    bad = check_feasibility(sched, model, tol)
    if bad:
        raise RoundingError("rounded schedule is infeasible: " + "; ".join(str(v) for v in bad[:5]))
    return sched


class ConstraintViolation(NamedTuple):
    equation: str
    step: int
    residual: float
    detail: str = ""

    def __str__(self):
        extra = f" ({self.detail})" if self.detail else ""
        return f"{self.equation} at step {self.step}: residual {self.residual:.3g}{extra}"


def check_feasibility(schedule: DispatchSchedule, model: DayModel, tol: float = FEAS_TOL) -> list[ConstraintViolation]:
    """Re-verify a schedule against the model equations directly.

    Works from the schedule arrays only; it does not consult any MILP
    instance, so it can audit schedules from any source.
    """
    out: list[ConstraintViolation] = []
    H = model.steps
    T = model.transport.travel_steps
    st = model.storage
    dh = model.horizon.step_hours
    s = schedule

    def bad(eq, h, r, detail=""):
        out.append(ConstraintViolation(eq, h, float(r), detail))

    if s.steps != H:
        bad("shape", 0, abs(s.steps - H), "schedule length differs from horizon")
        return out

    for name in ("at_node", "arriving", "departing", "aux"):
        arr = getattr(s, name)
        for n, h in zip(*np.nonzero((arr != 0) & (arr != 1))):
            bad("binary", h + 1, arr[n, h], f"{name}[{NODES[n].value}]")
    for h in np.flatnonzero((s.traveling != 0) & (s.traveling != 1)):
        bad("binary", h + 1, s.traveling[h], "traveling")

    for n in range(2):
        for h in range(H):
            for name, arr in (("discharge", s.discharge_mw), ("charge", s.charge_mw)):
                p = arr[n, h]
                if p < -tol:
                    bad("power_limit", h + 1, -p, f"{name}[{NODES[n].value}] negative")
                over = p - s.at_node[n, h] * st.power_capacity_mw
                if over > tol:
                    bad("power_limit", h + 1, over, f"{name}[{NODES[n].value}] exceeds location-gated limit")

    e_prev = model.boundary.initial_energy_mwh
    for h in range(H):
        flow = (st.efficiency * s.charge_mw[:, h].sum() - s.discharge_mw[:, h].sum() / st.efficiency) * dh
        flow -= model.arrival_energy_mwh * s.arriving[:, h].sum()
        r = s.energy_mwh[h] - (1 - st.self_discharge_per_step) * e_prev - flow
        if abs(r) > tol:
            bad("energy_balance", h + 1, abs(r))
        if s.energy_mwh[h] < -tol:
            bad("energy_limit", h + 1, -s.energy_mwh[h])
        if s.energy_mwh[h] - st.energy_capacity_mwh > tol:
            bad("energy_limit", h + 1, s.energy_mwh[h] - st.energy_capacity_mwh)
        e_prev = s.energy_mwh[h]

    try:
        hist = model.boundary.history(T)
    except ValueError as exc:
        bad("boundary", 0, 1.0, str(exc))
        return out
    gam = list(hist) + [int(g) for g in s.traveling]

    def g(k):  # traveling flag at step k (1-based), history for k <= 0
        return gam[T - 1 + k]

    prev_w = np.array(model.boundary.initial_presence())
    for h in range(1, H + 1):
        w = s.at_node[:, h - 1]
        a = s.arriving[:, h - 1]
        b = s.departing[:, h - 1]
        th = s.aux[:, h - 1]
        presence = w.sum() + (s.traveling[h - 1] if model.linking else 0)
        if model.linking and presence != 1:
            bad("presence", h, abs(presence - 1), "linking equality")
        elif not model.linking and presence > 1:
            bad("presence", h, presence - 1)
        for n in range(2):
            r = (a[n] - b[n]) - (w[n] - prev_w[n])
            if r:
                bad("location_transition", h, abs(r), NODES[n].value)
        if (a + b).sum() > 1:
            bad("single_move", h, (a + b).sum() - 1)
        r = (a - th).sum() - (g(h - 1) - g(h))
        if r:
            bad("travel_switch", h, abs(r))
        if (a + th).sum() > 1:
            bad("arrive_or_leave", h, (a + th).sum() - 1)
        for k in range(1, T):
            if g(h) < g(h - k) - g(h - k - 1):
                bad("min_travel_time", h, 1.0, f"trip started at step {h - k} ended early")
        prev_w = w

    if model.fixed_site is not None:
        if s.traveling.any() or not s.at_node[model.fixed_site.index].all():
            bad("stationary", 0, 1.0, f"unit must stay at {model.fixed_site.value}")

    obj = decompose_objective(s.discharge_mw, s.charge_mw, s.traveling, model)
    for name, val in zip(obj._fields, obj):
        stored = getattr(s, name)
        if abs(stored - val) > 1e-6 * max(1.0, abs(val)):
            bad("objective", 0, abs(stored - val), name)
    if s.net_value_usd != s.market_revenue_usd - s.transport_cost_usd - s.degradation_cost_usd:
        bad("objective", 0, 0.0, "net value identity")
    return out


def write_mps(instance: MilpInstance, target: str | Path | TextIO | None = None, name: str = "DAY") -> str:
    """Write the instance in free MPS format and return the text.

    The objective constant is stored as the objective row's RHS entry with
    the sign flipped, the usual MPS convention.
    """
    buf = io.StringIO()
    rname = [f"R{i}" for i in range(instance.n_rows)]
    cname = [instance.column_name(j) for j in range(instance.n_cols)]
    buf.write(f"NAME {name}\nOBJSENSE\n    MAX\nROWS\n N  OBJ\n")
    for i, s in enumerate(instance.sense):
        buf.write(f" {s}  {rname[i]}\n")
    buf.write("COLUMNS\n")
    csc = instance.A.tocsc()
    in_int = False
    for j in range(instance.n_cols):
        if instance.integer[j] and not in_int:
            buf.write("    MARKER 'MARKER' 'INTORG'\n")
            in_int = True
        elif not instance.integer[j] and in_int:
            buf.write("    MARKER 'MARKER' 'INTEND'\n")
            in_int = False
        entries = []
        if instance.objective[j] != 0:
            entries.append(("OBJ", instance.objective[j]))
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi]):
            entries.append((rname[i], v))
        if not entries:
            entries.append(("OBJ", 0.0))
        for r, v in entries:
            buf.write(f"    {cname[j]}  {r}  {v:.17g}\n")
    if in_int:
        buf.write("    MARKER 'MARKER' 'INTEND'\n")
    buf.write("RHS\n")
    if instance.objective_constant:
        buf.write(f"    RHS  OBJ  {-instance.objective_constant:.17g}\n")
    for i, v in enumerate(instance.rhs):
        if v != 0:
            buf.write(f"    RHS  {rname[i]}  {v:.17g}\n")
    buf.write("BOUNDS\n")
    for j in range(instance.n_cols):
        lo, hi = instance.lb[j], instance.ub[j]
        if instance.integer[j] and lo == 0 and hi == 1:
            buf.write(f" BV BND  {cname[j]}\n")
            continue
        if lo == hi:
            buf.write(f" FX BND  {cname[j]}  {lo:.17g}\n")
            continue
        if np.isneginf(lo) and np.isposinf(hi):
            buf.write(f" FR BND  {cname[j]}\n")
            continue
        if lo != 0:
            buf.write(f" {'MI' if np.isneginf(lo) else 'LO'} BND  {cname[j]}" + ("" if np.isneginf(lo) else f"  {lo:.17g}") + "\n")
        if np.isfinite(hi):
            buf.write(f" UP BND  {cname[j]}  {hi:.17g}\n")
    buf.write("ENDATA\n")
    text = buf.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    elif target is not None:
        target.write(text)
    return text
