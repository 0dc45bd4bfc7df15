"""Time-expanded LP of the electrified supply chain.

The horizon is a cycle of ``n_steps`` steps. Stock states (truck charge,
parked trucks, product, raw material) live on ``n_steps + 1`` grid
points: grid point t is the state before step t, grid point ``n_steps``
the state after the final step. Flow decisions (power draw, dispatches,
process starts) live on steps ``0 .. n_steps - 1``; anything still in
flight past the end wraps around to the start, so a dispatch at step t
arrives at grid point ``(t + travel_steps) mod n_steps`` of the next
cycle. Periodicity is closed explicitly: charge, parked trucks and
product storage must end the cycle where they started, while raw
material starts the cycle empty (arrivals are exogenous, so a periodic
raw stock would be over- or under-determined).

Sizing variables (fleet size, warehouse capacity, equipment count) are
continuous and shared across the whole horizon; their levelized rates
enter the objective multiplied by the horizon length.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from flexchain.scenario import Path, Scenario, check_production_potential

#: Feasibility tolerances for solution validation: a residual counts as a
#: violation when it exceeds ``abs + rel * scale`` with scale the largest
#: term magnitude in the row (values are in kWh / kg / truck counts).
VALIDATE_REL_TOL = 1e-6
VALIDATE_ABS_TOL = 1e-4


class InfeasibleScenarioError(ValueError):
    """Scenario violates a structural feasibility condition before solving."""


class VarKind(str, enum.Enum):
    """Column families of the planning LP."""

    CHARGE = "charge"            # pooled truck battery charge per location, kWh
    PARKED = "parked"            # stationary trucks per location
    PRODUCT = "product"          # stored finished product per location, kg
    RAW = "raw"                  # stored raw material per location, kg
    POWER = "power"              # grid draw per location, kW
    NONRENEWABLE = "nonrenewable"  # system-wide non-renewable share, kW
    LOADED = "loaded"            # loaded truck dispatches per path
    EMPTY = "empty"              # empty truck dispatches per path
    PROCESS = "process"          # manufacturing process starts per (process, location)
    FLEET = "fleet"              # fleet size (single column)
    WAREHOUSE = "warehouse"      # storage capacity per location, kg
    EQUIPMENT = "equipment"      # equipment count per (process, location)


#: Kinds indexed on the state grid (0 .. n_steps) rather than on steps.
STATE_KINDS = frozenset({VarKind.CHARGE, VarKind.PARKED, VarKind.PRODUCT, VarKind.RAW})
#: Kinds with no time index (sizing decisions).
SIZING_KINDS = frozenset({VarKind.FLEET, VarKind.WAREHOUSE, VarKind.EQUIPMENT})


@dataclass(frozen=True)
class VariableKey:
    """(kind, entity, step) coordinate of one LP column.

    ``entity`` is a location id, an ``origin>dest`` path key, a
    ``process@location`` pair, or "" for system-wide columns. ``step``
    is None for sizing columns.
    """

    kind: VarKind
    entity: str = ""
    step: int | None = None

    def name(self) -> str:
        if self.step is None:
            return f"{self.kind.value}[{self.entity}]" if self.entity else self.kind.value
        if self.entity:
            return f"{self.kind.value}[{self.entity}][{self.step}]"
        return f"{self.kind.value}[{self.step}]"


def path_key(origin: str, dest: str) -> str:
    return f"{origin}>{dest}"


def process_key(process_id: str, loc_id: str) -> str:
    return f"{process_id}@{loc_id}"


class VariableIndex:
    """Deterministic bijection between VariableKeys and column positions."""

    def __init__(self, keys: Sequence[VariableKey]):
        self._keys = tuple(keys)
        self._pos = {key: i for i, key in enumerate(self._keys)}
        if len(self._pos) != len(self._keys):
            raise ValueError("duplicate variable keys")

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: VariableKey) -> bool:
        return key in self._pos

    def col(self, kind: VarKind, entity: str = "", step: int | None = None) -> int:
        return self._pos[VariableKey(kind, entity, step)]

    def key_of(self, col: int) -> VariableKey:
        return self._keys[col]

    @property
    def keys(self) -> tuple[VariableKey, ...]:
        return self._keys

    def cols(self, kind: VarKind, entity: str = "") -> np.ndarray:
        """Column positions of a (kind, entity) series ordered by step."""
        pairs = [
            (key.step, i)
            for i, key in enumerate(self._keys)
            if key.kind is kind and key.entity == entity and key.step is not None
        ]
        pairs.sort()
        return np.array([i for _, i in pairs], dtype=int)

    def entities(self, kind: VarKind) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for key in self._keys:
            if key.kind is kind:
                seen.setdefault(key.entity)
        return tuple(seen)


@dataclass
class LinearProgram:
    """Sparse LP: min c.x s.t. rows with sense '=' or '<=', bounds on x.

    Rows are stored as coordinate triplets. ``row_tags`` names each row
    by the behavior it enforces plus its entity/step coordinates.
    """

    index: VariableIndex
    objective: np.ndarray
    row_starts: np.ndarray
    col_ids: np.ndarray
    coefficients: np.ndarray
    senses: np.ndarray          # '=' or '<'
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_tags: list[str]

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_cols(self) -> int:
        return len(self.objective)

    def row_coefficients(self, row: int) -> dict[int, float]:
        lo, hi = self.row_starts[row], self.row_starts[row + 1]
        return dict(zip(self.col_ids[lo:hi].tolist(), self.coefficients[lo:hi].tolist()))

    def rows_tagged(self, prefix: str) -> list[int]:
        return [i for i, tag in enumerate(self.row_tags) if tag.startswith(prefix)]

    def to_scipy(self):
        """(c, A_ub, b_ub, A_eq, b_eq, bounds) for scipy.optimize.linprog."""
        from scipy.sparse import csr_matrix

        row_ids = np.repeat(
            np.arange(self.n_rows), np.diff(self.row_starts)
        )
        eq_mask = self.senses == "="
        matrices = []
        for mask in (~eq_mask, eq_mask):
            keep = mask[row_ids]
            renumber = np.cumsum(mask) - 1
            matrices.append(
                csr_matrix(
                    (self.coefficients[keep],
                     (renumber[row_ids[keep]], self.col_ids[keep])),
                    shape=(int(mask.sum()), self.n_cols),
                )
            )
        a_ub, a_eq = matrices
        bounds = np.column_stack([self.lower, self.upper])
        return (self.objective, a_ub, self.rhs[~eq_mask], a_eq, self.rhs[eq_mask],
                bounds)


class _Builder:
    def __init__(self, index: VariableIndex):
        self.index = index
        self.objective = np.zeros(len(index))
        self.lower = np.zeros(len(index))
        self.upper = np.full(len(index), np.inf)
        self._rows: list[dict[int, float]] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self.row_tags: list[str] = []

    def add_row(self, tag: str, coeffs: dict[int, float], sense: str, rhs: float) -> None:
        self._rows.append(coeffs)
        self._senses.append(sense)
        self._rhs.append(rhs)
        self.row_tags.append(tag)

    def build(self) -> LinearProgram:
        starts = np.zeros(len(self._rows) + 1, dtype=int)
        cols: list[int] = []
        vals: list[float] = []
        for i, row in enumerate(self._rows):
            for c, v in row.items():
                cols.append(c)
                vals.append(v)
            starts[i + 1] = len(cols)
        return LinearProgram(
            index=self.index,
            objective=self.objective,
            row_starts=starts,
            col_ids=np.array(cols, dtype=int),
            coefficients=np.array(vals, dtype=float),
            senses=np.array(self._senses),
            rhs=np.array(self._rhs, dtype=float),
            lower=self.lower,
            upper=self.upper,
            row_tags=self.row_tags,
        )


def empty_truck_energy(path: Path, empty_energy_fraction: float) -> float:
    """Energy an empty repositioning run consumes on a path, kWh."""
    if not 0 <= empty_energy_fraction <= 1:
        raise ValueError(
            f"empty_energy_fraction must be in [0, 1], got {empty_energy_fraction}"
        )
    return empty_energy_fraction * path.energy_kwh


def _index_scenario(scenario: Scenario) -> VariableIndex:
    n = scenario.horizon.n_steps
    keys: list[VariableKey] = []
    has_trucks = bool(scenario.paths)
    for loc_id in scenario.location_ids:
        keys += [VariableKey(VarKind.CHARGE, loc_id, g) for g in range(n + 1)]
        if has_trucks:
            keys += [VariableKey(VarKind.PARKED, loc_id, g) for g in range(n + 1)]
        keys += [VariableKey(VarKind.PRODUCT, loc_id, g) for g in range(n + 1)]
        keys += [VariableKey(VarKind.RAW, loc_id, g) for g in range(n + 1)]
        keys += [VariableKey(VarKind.POWER, loc_id, t) for t in range(n)]
    keys += [VariableKey(VarKind.NONRENEWABLE, "", t) for t in range(n)]
    for p in scenario.paths:
        pk = path_key(p.origin, p.dest)
        keys += [VariableKey(VarKind.LOADED, pk, t) for t in range(n)]
        keys += [VariableKey(VarKind.EMPTY, pk, t) for t in range(n)]
    for proc in scenario.processes:
        for loc_id in scenario.location_ids:
            sk = process_key(proc.id, loc_id)
            keys += [VariableKey(VarKind.PROCESS, sk, t) for t in range(n)]
    if has_trucks:
        keys.append(VariableKey(VarKind.FLEET))
    keys += [VariableKey(VarKind.WAREHOUSE, loc_id) for loc_id in scenario.location_ids]
    for proc in scenario.processes:
        for loc_id in scenario.location_ids:
            keys.append(VariableKey(VarKind.EQUIPMENT, process_key(proc.id, loc_id)))
    return VariableIndex(keys)


def build_lp(scenario: Scenario) -> LinearProgram:
    """Assemble the planning LP for a scenario.

    Raises InfeasibleScenarioError when aggregate demand already exceeds
    what the raw-material arrivals can ever produce.
    """
    try:
        check_production_potential(scenario)
    except Exception as exc:
        raise InfeasibleScenarioError(str(exc)) from None

    n = scenario.horizon.n_steps
    dt = scenario.horizon.step_hours
    horizon_hours = scenario.horizon.hours
    truck = scenario.truck
    costs = scenario.costs
    has_trucks = bool(scenario.paths)
    theta = truck.empty_energy_fraction

    index = _index_scenario(scenario)
    b = _Builder(index)

    # objective: levelized capacity rates x horizon + energy opex
    if has_trucks:
        b.objective[index.col(VarKind.FLEET)] = horizon_hours * costs.k_truck
    for loc_id in scenario.location_ids:
        b.objective[index.col(VarKind.WAREHOUSE, loc_id)] = (
            horizon_hours * costs.k_store[loc_id]
        )
        for proc in scenario.processes:
            b.objective[index.col(VarKind.EQUIPMENT, process_key(proc.id, loc_id))] = (
                horizon_hours * costs.k_equip[proc.id]
            )
        for t in range(n):
            b.objective[index.col(VarKind.POWER, loc_id, t)] = costs.epsilon * dt
    for t in range(n):
        b.objective[index.col(VarKind.NONRENEWABLE, "", t)] = costs.k_power * dt

    outbound = {loc_id: [] for loc_id in scenario.location_ids}
    inbound = {loc_id: [] for loc_id in scenario.location_ids}
    for p in scenario.paths:
        outbound[p.origin].append(p)
        inbound[p.dest].append(p)

    injection = scenario.effective_injection()

    for loc_id in scenario.location_ids:
        charge = index.cols(VarKind.CHARGE, loc_id)
        product = index.cols(VarKind.PRODUCT, loc_id)
        raw = index.cols(VarKind.RAW, loc_id)
        parked = index.cols(VarKind.PARKED, loc_id) if has_trucks else None

        for t in range(n):
            # charge balance: next = prev + dt*(p - manufacturing) - dispatch energy
            row = {charge[t + 1]: 1.0, charge[t]: -1.0,
                   index.col(VarKind.POWER, loc_id, t): -dt}
            for proc in scenario.processes:
                m_cols = index.cols(VarKind.PROCESS, process_key(proc.id, loc_id))
                for lag in range(proc.duration_steps):
                    col = m_cols[(t - lag) % n]
                    row[col] = row.get(col, 0.0) + dt * proc.power_kw
            for p in outbound[loc_id]:
                pk = path_key(p.origin, p.dest)
                row[index.col(VarKind.LOADED, pk, t)] = p.energy_kwh
                row[index.col(VarKind.EMPTY, pk, t)] = empty_truck_energy(p, theta)
            b.add_row(f"charge_balance[{loc_id}][{t}]", row, "=", 0.0)

            if has_trucks:
                # parked-truck balance: departures leave now, arrivals lag travel time
                row = {parked[t + 1]: 1.0, parked[t]: -1.0}
                for p in outbound[loc_id]:
                    pk = path_key(p.origin, p.dest)
                    row[index.col(VarKind.LOADED, pk, t)] = 1.0
                    row[index.col(VarKind.EMPTY, pk, t)] = 1.0
                for p in inbound[loc_id]:
                    pk = path_key(p.origin, p.dest)
                    src = (t - p.travel_steps) % n
                    for kind in (VarKind.LOADED, VarKind.EMPTY):
                        col = index.col(kind, pk, src)
                        row[col] = row.get(col, 0.0) - 1.0
                b.add_row(f"truck_balance[{loc_id}][{t}]", row, "=", 0.0)

            # product balance: injections, truckloads in/out, finished batches
            row = {product[t + 1]: 1.0, product[t]: -1.0}
            for p in outbound[loc_id]:
                col = index.col(VarKind.LOADED, path_key(p.origin, p.dest), t)
                row[col] = row.get(col, 0.0) + truck.load_kg
            for p in inbound[loc_id]:
                src = (t - p.travel_steps) % n
                col = index.col(VarKind.LOADED, path_key(p.origin, p.dest), src)
                row[col] = row.get(col, 0.0) - truck.load_kg
            for proc in scenario.processes:
                m_cols = index.cols(VarKind.PROCESS, process_key(proc.id, loc_id))
                col = m_cols[(t - proc.duration_steps) % n]
                row[col] = row.get(col, 0.0) - proc.output_kg
            b.add_row(
                f"product_balance[{loc_id}][{t}]", row, "=", float(injection[loc_id][t])
            )

            # raw balance: arrivals in, process starts draw immediately
            row = {raw[t + 1]: 1.0, raw[t]: -1.0}
            for proc in scenario.processes:
                col = index.col(VarKind.PROCESS, process_key(proc.id, loc_id), t)
                row[col] = row.get(col, 0.0) + proc.raw_kg
            b.add_row(
                f"raw_balance[{loc_id}][{t}]", row, "=",
                float(scenario.exogenous.raw_arrivals[loc_id][t]),
            )

            # charging rate: gain limited by chargers on trucks parked at step start
            row = {charge[t + 1]: 1.0, charge[t]: -1.0}
            if has_trucks:
                row[parked[t]] = -dt * truck.battery_kwh / truck.full_charge_hours
            b.add_row(f"charge_rate[{loc_id}][{t}]", row, "<", 0.0)

        for g in range(1, n + 1):
            # stored charge fits in the batteries of trucks present
            row = {charge[g]: 1.0}
            if has_trucks:
                row[parked[g]] = -truck.battery_kwh
            b.add_row(f"charge_cap[{loc_id}][{g}]", row, "<", 0.0)

            # warehouse holds product and raw material together
            b.add_row(
                f"warehouse_cap[{loc_id}][{g}]",
                {product[g]: 1.0, raw[g]: 1.0,
                 index.col(VarKind.WAREHOUSE, loc_id): -1.0},
                "<", 0.0,
            )

        # periodic closures; raw material instead starts the cycle empty
        b.add_row(f"product_periodic[{loc_id}]",
                  {product[0]: 1.0, product[n]: -1.0}, "=", 0.0)
        b.add_row(f"charge_periodic[{loc_id}]",
                  {charge[0]: 1.0, charge[n]: -1.0}, "=", 0.0)
        if has_trucks:
            b.add_row(f"truck_periodic[{loc_id}]",
                      {parked[0]: 1.0, parked[n]: -1.0}, "=", 0.0)
        b.upper[raw[0]] = 0.0

    if has_trucks:
        fleet_col = index.col(VarKind.FLEET)
        for g in range(1, n + 1):
            # fleet covers parked trucks plus everything still in transit
            row: dict[int, float] = {fleet_col: -1.0}
            for loc_id in scenario.location_ids:
                row[index.col(VarKind.PARKED, loc_id, g)] = 1.0
            for p in scenario.paths:
                pk = path_key(p.origin, p.dest)
                for back in range(1, p.travel_steps + 1):
                    src = (g - back) % n
                    for kind in (VarKind.LOADED, VarKind.EMPTY):
                        col = index.col(kind, pk, src)
                        row[col] = row.get(col, 0.0) + 1.0
            b.add_row(f"fleet_cap[{g}]", row, "<", 0.0)

    for proc in scenario.processes:
        for loc_id in scenario.location_ids:
            sk = process_key(proc.id, loc_id)
            m_cols = index.cols(VarKind.PROCESS, sk)
            equip_col = index.col(VarKind.EQUIPMENT, sk)
            window = min(proc.duration_steps + 1, n)
            for t in range(n):
                # equipment stays occupied from start through delivery
                row = {equip_col: -1.0}
                for lag in range(window):
                    col = m_cols[(t - lag) % n]
                    row[col] = row.get(col, 0.0) + 1.0
                b.add_row(f"equip_cap[{sk}][{t}]", row, "<", 0.0)

    renewable = {loc_id: scenario.renewable_kw(loc_id)
                 for loc_id in scenario.location_ids}
    for t in range(n):
        # copper plate: total draw within renewables plus non-renewable share
        row = {index.col(VarKind.POWER, loc_id, t): 1.0
               for loc_id in scenario.location_ids}
        row[index.col(VarKind.NONRENEWABLE, "", t)] = -1.0
        avail = sum(float(renewable[loc_id][t]) for loc_id in scenario.location_ids)
        b.add_row(f"power_balance[{t}]", row, "<", avail)

    return b.build()


# ---------------------------------------------------------------------------
# trajectory helpers shared by validation and KPIs


def cyclic_window_sum(series: np.ndarray, window: int) -> np.ndarray:
    """out[t] = sum of series[(t - lag) % n] for lag in 0..window-1."""
    n = len(series)
    out = np.zeros(n)
    for lag in range(window):
        out += np.roll(series, lag)
    return out


def manufacturing_power(
    scenario: Scenario, process_starts: Mapping[tuple[str, str], np.ndarray]
) -> dict[str, np.ndarray]:
    """Per-location manufacturing power draw (kW per step) from start schedules."""
    n = scenario.horizon.n_steps
    power = {loc_id: np.zeros(n) for loc_id in scenario.location_ids}
    for proc in scenario.processes:
        for loc_id in scenario.location_ids:
            starts = process_starts[(proc.id, loc_id)]
            power[loc_id] += proc.power_kw * cyclic_window_sum(starts, proc.duration_steps)
    return power


def transit_occupancy(
    scenario: Scenario,
    loaded: Mapping[tuple[str, str], np.ndarray],
    empty: Mapping[tuple[str, str], np.ndarray],
) -> np.ndarray:
    """Trucks in transit at each grid point 1..n_steps (array of length n_steps).

    A truck dispatched at step t occupies the road for grid points
    t+1 .. t+travel_steps (wrapped), i.e. exactly travel_steps points.
    """
    n = scenario.horizon.n_steps
    occupancy = np.zeros(n)
    for p in scenario.paths:
        flow = loaded[p.key] + empty[p.key]
        occupancy += cyclic_window_sum(flow, p.travel_steps)
    # window sums end at dispatch step t; grid point g sees windows ending at g-1
    return occupancy


def equipment_occupancy(
    scenario: Scenario, process_starts: Mapping[tuple[str, str], np.ndarray]
) -> dict[tuple[str, str], np.ndarray]:
    """Busy equipment per (process, location) and step, start through delivery."""
    n = scenario.horizon.n_steps
    out = {}
    for proc in scenario.processes:
        window = min(proc.duration_steps + 1, n)
        for loc_id in scenario.location_ids:
            starts = process_starts[(proc.id, loc_id)]
            out[(proc.id, loc_id)] = cyclic_window_sum(starts, window)
    return out


# ---------------------------------------------------------------------------
# objective breakdown


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Objective split into capacity and energy terms, $ over the horizon."""

    truck_capex: float
    warehouse_capex: float
    equipment_capex: float
    nonrenewable_cost: float
    base_energy_cost: float

    @property
    def total(self) -> float:
        return (self.truck_capex + self.warehouse_capex + self.equipment_capex
                + self.nonrenewable_cost + self.base_energy_cost)

    def as_dict(self) -> dict[str, float]:
        return {
            "truck_capex": self.truck_capex,
            "warehouse_capex": self.warehouse_capex,
            "equipment_capex": self.equipment_capex,
            "nonrenewable_cost": self.nonrenewable_cost,
            "base_energy_cost": self.base_energy_cost,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# solution validation


@dataclass(frozen=True)
class Violation:
    tag: str
    magnitude: float

    def __str__(self) -> str:
        return f"{self.tag}: residual {self.magnitude:.3e}"


def _check(violations: list[Violation], tag: str, residual: float, scale: float,
           rel: float, abs_tol: float) -> None:
    if abs(residual) > abs_tol + rel * abs(scale):
        violations.append(Violation(tag, abs(residual)))


def validate_solution(
    scenario: Scenario,
    solution: "PlanSolutionLike",
    rel_tol: float = VALIDATE_REL_TOL,
    abs_tol: float = VALIDATE_ABS_TOL,
) -> list[Violation]:
    """Re-derive every model constraint from trajectories; list violations.

    Independent of the LP assembly: works from the scenario data and the
    solution arrays alone, so it catches indexing mistakes in either.
    """
    n = scenario.horizon.n_steps
    dt = scenario.horizon.step_hours
    truck = scenario.truck
    theta = truck.empty_energy_fraction
    has_trucks = bool(scenario.paths)
    v: list[Violation] = []

    def chk(tag: str, residual: np.ndarray | float, scale: np.ndarray | float) -> None:
        residual = np.atleast_1d(np.asarray(residual, dtype=float))
        scale = np.broadcast_to(np.asarray(scale, dtype=float), residual.shape)
        for i in np.flatnonzero(np.abs(residual) > abs_tol + rel_tol * np.abs(scale)):
            v.append(Violation(f"{tag}[{i}]", float(abs(residual[i]))))

    mfg_power = manufacturing_power(scenario, solution.process_starts)
    injection = scenario.effective_injection()

    outbound = {loc_id: [] for loc_id in scenario.location_ids}
    inbound = {loc_id: [] for loc_id in scenario.location_ids}
    for p in scenario.paths:
        outbound[p.origin].append(p)
        inbound[p.dest].append(p)

    for loc_id in scenario.location_ids:
        charge = solution.charge[loc_id]
        product = solution.product[loc_id]
        raw = solution.raw[loc_id]
        power = solution.power[loc_id]
        parked = solution.parked[loc_id] if has_trucks else np.zeros(n + 1)

        dispatch_energy = np.zeros(n)
        departures = np.zeros(n)
        arrivals = np.zeros(n)
        load_out = np.zeros(n)
        load_in = np.zeros(n)
        for p in outbound[loc_id]:
            y, ye = solution.loaded[p.key], solution.empty[p.key]
            dispatch_energy += p.energy_kwh * y + empty_truck_energy(p, theta) * ye
            departures += y + ye
            load_out += truck.load_kg * y
        for p in inbound[loc_id]:
            y = np.roll(solution.loaded[p.key], p.travel_steps)
            ye = np.roll(solution.empty[p.key], p.travel_steps)
            arrivals += y + ye
            load_in += truck.load_kg * y

        finished = np.zeros(n)
        raw_draw = np.zeros(n)
        for proc in scenario.processes:
            starts = solution.process_starts[(proc.id, loc_id)]
            finished += proc.output_kg * np.roll(starts, proc.duration_steps)
            raw_draw += proc.raw_kg * starts

        scale_e = np.maximum.reduce(
            [np.abs(charge[1:]), np.abs(charge[:-1]), dt * np.abs(power),
             dt * mfg_power[loc_id], dispatch_energy]
        )
        chk(
            f"charge_balance[{loc_id}]",
            charge[1:] - charge[:-1]
            - dt * (power - mfg_power[loc_id]) + dispatch_energy,
            scale_e,
        )
        if has_trucks:
            chk(
                f"truck_balance[{loc_id}]",
                parked[1:] - parked[:-1] + departures - arrivals,
                np.maximum(np.abs(parked[1:]), 1.0),
            )
        scale_m = np.maximum.reduce(
            [np.abs(product[1:]), np.abs(product[:-1]), np.abs(injection[loc_id]),
             load_out, load_in, finished]
        )
        chk(
            f"product_balance[{loc_id}]",
            product[1:] - product[:-1] - injection[loc_id]
            - load_in + load_out - finished,
            scale_m,
        )
        arrivals_raw = scenario.exogenous.raw_arrivals[loc_id]
        chk(
            f"raw_balance[{loc_id}]",
            raw[1:] - raw[:-1] - arrivals_raw + raw_draw,
            np.maximum.reduce([np.abs(raw[1:]), np.abs(raw[:-1]),
                               arrivals_raw, raw_draw]),
        )
        rate_cap = (dt * truck.battery_kwh / truck.full_charge_hours) * parked[:-1]
        chk(
            f"charge_rate[{loc_id}]",
            np.maximum(0.0, charge[1:] - charge[:-1] - rate_cap),
            np.maximum(np.abs(charge[1:]), rate_cap),
        )
        chk(
            f"charge_cap[{loc_id}]",
            np.maximum(0.0, charge[1:] - truck.battery_kwh * parked[1:]),
            truck.battery_kwh * np.maximum(parked[1:], 1.0),
        )
        wcap = solution.warehouse[loc_id]
        chk(
            f"warehouse_cap[{loc_id}]",
            np.maximum(0.0, product[1:] + raw[1:] - wcap),
            max(wcap, 1.0),
        )
        for name, series in (("charge", charge), ("product", product), ("raw", raw),
                             ("parked", parked), ("power", power)):
            chk(f"positivity_{name}[{loc_id}]", np.minimum(0.0, series),
                np.abs(series))
        _check(v, f"raw_initial[{loc_id}]", raw[0], 1.0, rel_tol, abs_tol)
        _check(v, f"product_periodic[{loc_id}]", product[0] - product[-1],
               max(abs(product[0]), abs(product[-1])), rel_tol, abs_tol)
        _check(v, f"charge_periodic[{loc_id}]", charge[0] - charge[-1],
               max(abs(charge[0]), abs(charge[-1])), rel_tol, abs_tol)
        if has_trucks:
            _check(v, f"truck_periodic[{loc_id}]", parked[0] - parked[-1],
                   max(abs(parked[0]), abs(parked[-1])), rel_tol, abs_tol)

    if has_trucks:
        in_transit = transit_occupancy(scenario, solution.loaded, solution.empty)
        parked_total = sum(solution.parked[loc_id][1:] for loc_id in scenario.location_ids)
        chk(
            "fleet_cap",
            np.maximum(0.0, parked_total + in_transit - solution.fleet_size),
            max(solution.fleet_size, 1.0),
        )
        for key, series in list(solution.loaded.items()) + list(solution.empty.items()):
            chk(f"positivity_dispatch[{path_key(*key)}]",
                np.minimum(0.0, series), np.abs(series))

    busy = equipment_occupancy(scenario, solution.process_starts)
    for (proc_id, loc_id), series in busy.items():
        cap = solution.equipment[(proc_id, loc_id)]
        chk(f"equip_cap[{process_key(proc_id, loc_id)}]",
            np.maximum(0.0, series - cap), max(cap, 1.0))
    for key, series in solution.process_starts.items():
        chk(f"positivity_process[{process_key(*key)}]",
            np.minimum(0.0, series), np.abs(series))

    total_power = sum(solution.power[loc_id] for loc_id in scenario.location_ids)
    available = scenario.total_renewable_kw()
    chk(
        "power_balance",
        np.maximum(0.0, total_power - available - solution.nonrenewable),
        np.maximum.reduce([total_power, available, np.abs(solution.nonrenewable)]),
    )
    chk("positivity_nonrenewable", np.minimum(0.0, solution.nonrenewable),
        np.abs(solution.nonrenewable))

    return v


class PlanSolutionLike:
    """Structural protocol validate_solution expects (see solve.PlanSolution)."""

    charge: Mapping[str, np.ndarray]
    parked: Mapping[str, np.ndarray]
    product: Mapping[str, np.ndarray]
    raw: Mapping[str, np.ndarray]
    power: Mapping[str, np.ndarray]
    nonrenewable: np.ndarray
    loaded: Mapping[tuple[str, str], np.ndarray]
    empty: Mapping[tuple[str, str], np.ndarray]
    process_starts: Mapping[tuple[str, str], np.ndarray]
    fleet_size: float
    warehouse: Mapping[str, float]
    equipment: Mapping[tuple[str, str], float]
