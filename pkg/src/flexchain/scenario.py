"""Scenario data model and on-disk format.

A scenario bundles everything the planning model needs: the discretized
horizon, locations with renewable nameplates, directed transport paths,
the truck and manufacturing-process specifications, levelized costs, and
the exogenous time series (product demand, raw-material arrivals,
renewable capacity factors).

On disk a scenario is a directory of delimited files plus a TOML
parameter file::

    locations.csv          id, name, wind_mw, solar_mw
    paths.csv              origin, dest, travel_steps, energy_kwh[, distance_km]
    capacity_factors.csv   step, location, wind_cf, solar_cf
    demand.csv             location, step, kg        (negative = withdrawal)
    raw_arrivals.csv       location, step, kg
    params.toml            horizon, truck, processes, costs, demand_clearing

Scenarios are immutable after loading; the ``with_*`` helpers derive
modified copies for sweeps.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HOURS_PER_YEAR = 8760.0

#: Grid carbon intensity used to convert a carbon tax into a power cost,
#: kg CO2 emitted per kWh of non-renewable electricity.
DEFAULT_EMISSION_FACTOR = 0.389

CLEARING_MODES = ("per-step", "weekly", "monthly")

SCENARIO_FILES = (
    "locations.csv",
    "paths.csv",
    "capacity_factors.csv",
    "demand.csv",
    "raw_arrivals.csv",
    "params.toml",
)


class ScenarioError(ValueError):
    """Raised when scenario data is malformed or inconsistent."""


# ---------------------------------------------------------------------------
# derived-parameter calculators


def levelize(capital_cost: float, lifetime_years: float) -> float:
    """Convert a capital cost to an hourly rate over the asset lifetime.

    Straight-line levelization: a $150,000 truck over 30 years costs
    150000 / (30 * 8760) ~= $0.571 per hour of horizon, whether or not
    the asset is in use.
    """
    if lifetime_years <= 0:
        raise ValueError(f"lifetime_years must be positive, got {lifetime_years}")
    if capital_cost < 0:
        raise ValueError(f"capital_cost must be non-negative, got {capital_cost}")
    return capital_cost / (lifetime_years * HOURS_PER_YEAR)


def carbon_tax_to_penalty(
    tax_per_tonne: float, emission_factor: float = DEFAULT_EMISSION_FACTOR
) -> float:
    """Map a carbon tax in $/tonne CO2 to a non-renewable power cost in $/kWh.

    A $50/tonne tax on a 0.389 kg/kWh grid prices non-renewable energy at
    $0.01945/kWh ($19.45/MWh).
    """
    if tax_per_tonne < 0:
        raise ValueError(f"tax_per_tonne must be non-negative, got {tax_per_tonne}")
    if emission_factor < 0:
        raise ValueError(f"emission_factor must be non-negative, got {emission_factor}")
    return tax_per_tonne * emission_factor / 1000.0


def heating_energy_kwh(
    mass_kg: float, specific_heat_kj_per_kg_k: float, delta_t_k: float
) -> float:
    """Ideal heating energy E = m c dT, converted from kJ to kWh."""
    if mass_kg < 0:
        raise ValueError(f"mass_kg must be non-negative, got {mass_kg}")
    return mass_kg * specific_heat_kj_per_kg_k * delta_t_k / 3600.0


def warehouse_cost_per_kg_hour(
    build_cost: float,
    floor_area_m2: float,
    stack_height_m: float,
    bulk_density_kg_m3: float,
    lifetime_years: float,
) -> float:
    """Levelized storage cost in $/kg/h from warehouse build parameters.

    Capacity is floor area x stack height x bulk density; the build cost
    is levelized over the warehouse lifetime and divided by capacity.
    """
    capacity_kg = floor_area_m2 * stack_height_m * bulk_density_kg_m3
    if capacity_kg <= 0:
        raise ValueError("warehouse capacity must be positive")
    return levelize(build_cost, lifetime_years) / capacity_kg


# ---------------------------------------------------------------------------
# scenario types


@dataclass(frozen=True)
class Horizon:
    """Discretized planning horizon of ``n_steps`` steps of ``step_hours`` each."""

    n_steps: int
    step_hours: float

    @property
    def hours(self) -> float:
        return self.n_steps * self.step_hours


@dataclass(frozen=True)
class Location:
    id: str
    name: str
    wind_nameplate_kw: float
    solar_nameplate_kw: float


@dataclass(frozen=True)
class Path:
    """Directed transport link; traversal takes ``travel_steps`` whole steps."""

    origin: str
    dest: str
    travel_steps: int
    energy_kwh: float
    distance_km: float | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.origin, self.dest)


@dataclass(frozen=True)
class TruckSpec:
    battery_kwh: float
    load_kg: float
    empty_weight_kg: float
    full_charge_hours: float
    unit_cost: float
    lifetime_years: float

    @property
    def empty_energy_fraction(self) -> float:
        """Energy an empty run needs relative to a loaded run on the same path.

        Proportional-to-weight model: empty weight over gross laden weight.
        """
        return self.empty_weight_kg / (self.empty_weight_kg + self.load_kg)


@dataclass(frozen=True)
class ProcessSpec:
    """One manufacturing process step (e.g. a kiln batch).

    A start at step t draws ``power_kw`` for ``duration_steps`` steps,
    consumes ``raw_kg`` immediately and delivers ``output_kg`` of product
    ``duration_steps`` steps later.
    """

    id: str
    duration_steps: int
    power_kw: float
    output_kg: float
    raw_kg: float
    equip_unit_cost: float
    equip_lifetime_years: float

    @property
    def energy_per_kg(self) -> float:
        """kWh of electricity per kg of product, given a 1 h step (see model)."""
        return self.power_kw * self.duration_steps / self.output_kg


def process_from_heating(
    proc_id: str,
    batch_kg: float,
    specific_heat_kj_per_kg_k: float,
    delta_t_k: float,
    duration_steps: int,
    step_hours: float,
    raw_kg: float,
    equip_unit_cost: float,
    equip_lifetime_years: float,
) -> ProcessSpec:
    """Build a thermal process spec from first principles (E = m c dT).

    The batch heating energy is spread evenly over the process duration.
    Heating 150,000 kg of raw meal by 1,288 K at 0.92 kJ/kg/K takes
    53,666.7 kWh; note manufacturer-rated kiln intensities run a few
    percent above this ideal figure (losses, fans, drives).
    """
    energy = heating_energy_kwh(batch_kg, specific_heat_kj_per_kg_k, delta_t_k)
    return ProcessSpec(
        id=proc_id,
        duration_steps=duration_steps,
        power_kw=energy / (duration_steps * step_hours),
        output_kg=batch_kg,
        raw_kg=raw_kg,
        equip_unit_cost=equip_unit_cost,
        equip_lifetime_years=equip_lifetime_years,
    )


@dataclass(frozen=True)
class CostBook:
    """Levelized cost rates entering the planning objective.

    Capacity rates are $/h per unit of installed capacity; ``k_power`` is
    $/kWh on non-renewable energy, ``epsilon`` a small $/kWh on all
    consumption that breaks cost ties toward lower total energy.
    """

    k_truck: float
    k_store: Mapping[str, float]
    k_equip: Mapping[str, float]
    k_power: float
    epsilon: float = 0.001
    battery_cost_per_kwh: float = 400.0
    battery_lifetime_years: float = 5.0
    emission_factor: float = DEFAULT_EMISSION_FACTOR

    @property
    def k_battery(self) -> float:
        """Stationary-battery capacity rate, $/kWh of capacity per hour."""
        return levelize(self.battery_cost_per_kwh, self.battery_lifetime_years)


@dataclass(frozen=True, eq=False)
class ExogenousSeries:
    """Per-location exogenous time series, one array entry per step.

    ``product_injection`` is signed kg (positive = product appears,
    negative = demand withdrawal) before any demand-clearing transform.
    Renewable availability is stored as capacity factors; kW values are
    derived against location nameplates.
    """

    product_injection: Mapping[str, np.ndarray]
    raw_arrivals: Mapping[str, np.ndarray]
    wind_cf: Mapping[str, np.ndarray]
    solar_cf: Mapping[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class Scenario:
    horizon: Horizon
    locations: tuple[Location, ...]
    paths: tuple[Path, ...]
    truck: TruckSpec
    processes: tuple[ProcessSpec, ...]
    costs: CostBook
    exogenous: ExogenousSeries
    demand_clearing: str = "per-step"

    # -- lookups ------------------------------------------------------------

    @property
    def location_ids(self) -> tuple[str, ...]:
        return tuple(loc.id for loc in self.locations)

    def location(self, loc_id: str) -> Location:
        for loc in self.locations:
            if loc.id == loc_id:
                return loc
        raise KeyError(loc_id)

    def path(self, origin: str, dest: str) -> Path:
        for p in self.paths:
            if p.origin == origin and p.dest == dest:
                return p
        raise KeyError((origin, dest))

    # -- derived series -----------------------------------------------------

    def wind_kw(self, loc_id: str) -> np.ndarray:
        loc = self.location(loc_id)
        return self.exogenous.wind_cf[loc_id] * loc.wind_nameplate_kw

    def solar_kw(self, loc_id: str) -> np.ndarray:
        loc = self.location(loc_id)
        return self.exogenous.solar_cf[loc_id] * loc.solar_nameplate_kw

    def renewable_kw(self, loc_id: str) -> np.ndarray:
        return self.wind_kw(loc_id) + self.solar_kw(loc_id)

    def total_renewable_kw(self) -> np.ndarray:
        total = np.zeros(self.horizon.n_steps)
        for loc_id in self.location_ids:
            total += self.renewable_kw(loc_id)
        return total

    def effective_injection(self) -> dict[str, np.ndarray]:
        """Signed product injections with the demand-clearing transform applied."""
        return {
            loc_id: apply_clearing(
                series, self.demand_clearing, self.horizon.step_hours
            )
            for loc_id, series in self.exogenous.product_injection.items()
        }

    # -- derived copies -----------------------------------------------------

    def with_k_power(self, k_power: float) -> "Scenario":
        return dataclasses.replace(
            self, costs=dataclasses.replace(self.costs, k_power=k_power)
        )

    def with_carbon_tax(self, tax_per_tonne: float) -> "Scenario":
        return self.with_k_power(
            carbon_tax_to_penalty(tax_per_tonne, self.costs.emission_factor)
        )

    def with_clearing(self, mode: str) -> "Scenario":
        if mode not in CLEARING_MODES:
            raise ScenarioError(
                f"unknown demand clearing {mode!r}, expected one of {CLEARING_MODES}"
            )
        return dataclasses.replace(self, demand_clearing=mode)

    def with_cost_scales(
        self, truck_scale: float = 1.0, equip_scale: float = 1.0
    ) -> "Scenario":
        """Scale truck and equipment capacity rates (sensitivity sweeps)."""
        costs = dataclasses.replace(
            self.costs,
            k_truck=self.costs.k_truck * truck_scale,
            k_equip={k: v * equip_scale for k, v in self.costs.k_equip.items()},
        )
        return dataclasses.replace(self, costs=costs)


# ---------------------------------------------------------------------------
# demand clearing


def apply_clearing(series: np.ndarray, mode: str, step_hours: float) -> np.ndarray:
    """Re-time the withdrawals of a signed injection series.

    Positive entries (product appearing) keep their timing. Negative
    entries (demand) are aggregated over each clearing window and moved
    to the window's final step: the model must clear each window's
    demand by its end but may produce any time within it.
    """
    if mode not in CLEARING_MODES:
        raise ScenarioError(
            f"unknown demand clearing {mode!r}, expected one of {CLEARING_MODES}"
        )
    if mode == "per-step":
        return series.copy()
    window_hours = 168.0 if mode == "weekly" else 730.0
    window_steps = max(1, round(window_hours / step_hours))
    out = np.where(series > 0, series, 0.0)
    negatives = np.where(series < 0, series, 0.0)
    n = len(series)
    for start in range(0, n, window_steps):
        end = min(start + window_steps, n)
        out[end - 1] += negatives[start:end].sum()
    return out


# ---------------------------------------------------------------------------
# validation


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioError(message)


def validate_scenario(scenario: Scenario) -> None:
    """Check structural consistency; raise ScenarioError naming the offence."""
    hz = scenario.horizon
    _require(hz.n_steps >= 1, f"horizon needs at least 1 step, got {hz.n_steps}")
    _require(hz.step_hours > 0, f"step_hours must be positive, got {hz.step_hours}")

    ids = scenario.location_ids
    _require(len(ids) >= 1, "scenario needs at least one location")
    _require(len(set(ids)) == len(ids), f"duplicate location ids in {ids}")
    for loc in scenario.locations:
        _require(
            loc.wind_nameplate_kw >= 0 and loc.solar_nameplate_kw >= 0,
            f"location {loc.id!r}: nameplates must be non-negative",
        )

    seen_paths: set[tuple[str, str]] = set()
    for p in scenario.paths:
        _require(
            p.origin in ids and p.dest in ids,
            f"path {p.origin}->{p.dest}: unknown endpoint",
        )
        _require(p.origin != p.dest, f"path {p.origin}->{p.dest}: self-loop")
        _require(
            p.key not in seen_paths, f"duplicate path {p.origin}->{p.dest}"
        )
        seen_paths.add(p.key)
        _require(
            1 <= p.travel_steps <= hz.n_steps - 1,
            f"path {p.origin}->{p.dest}: travel_steps {p.travel_steps} "
            f"outside [1, {hz.n_steps - 1}]",
        )
        _require(
            p.energy_kwh > 0, f"path {p.origin}->{p.dest}: energy must be positive"
        )
        _require(
            p.energy_kwh <= scenario.truck.battery_kwh,
            f"path {p.origin}->{p.dest}: needs {p.energy_kwh} kWh, unreachable on "
            f"one {scenario.truck.battery_kwh} kWh charge",
        )
        if p.distance_km is not None:
            _require(
                p.distance_km > 0,
                f"path {p.origin}->{p.dest}: distance must be positive",
            )

    tr = scenario.truck
    for name in ("battery_kwh", "load_kg", "empty_weight_kg", "full_charge_hours",
                 "unit_cost", "lifetime_years"):
        _require(getattr(tr, name) > 0, f"truck {name} must be positive")

    proc_ids = [p.id for p in scenario.processes]
    _require(len(set(proc_ids)) == len(proc_ids), f"duplicate process ids {proc_ids}")
    for proc in scenario.processes:
        _require(
            1 <= proc.duration_steps <= max(1, hz.n_steps - 1),
            f"process {proc.id!r}: duration_steps {proc.duration_steps} "
            f"outside [1, {max(1, hz.n_steps - 1)}]",
        )
        _require(proc.power_kw > 0, f"process {proc.id!r}: power_kw must be positive")
        _require(proc.output_kg > 0, f"process {proc.id!r}: output_kg must be positive")
        _require(proc.raw_kg > 0, f"process {proc.id!r}: raw_kg must be positive")
        _require(
            proc.equip_unit_cost >= 0 and proc.equip_lifetime_years > 0,
            f"process {proc.id!r}: bad equipment cost parameters",
        )

    costs = scenario.costs
    _require(costs.k_truck >= 0, "k_truck must be non-negative")
    _require(costs.k_power >= 0, "k_power must be non-negative")
    _require(costs.epsilon >= 0, "epsilon must be non-negative")
    for loc_id in ids:
        _require(
            loc_id in costs.k_store and costs.k_store[loc_id] >= 0,
            f"missing or negative storage rate for location {loc_id!r}",
        )
    for proc in scenario.processes:
        _require(
            proc.id in costs.k_equip and costs.k_equip[proc.id] >= 0,
            f"missing or negative equipment rate for process {proc.id!r}",
        )

    exo = scenario.exogenous
    for name, table in (
        ("demand", exo.product_injection),
        ("raw_arrivals", exo.raw_arrivals),
        ("wind_cf", exo.wind_cf),
        ("solar_cf", exo.solar_cf),
    ):
        for loc_id in ids:
            _require(loc_id in table, f"{name}: no series for location {loc_id!r}")
            series = table[loc_id]
            _require(
                len(series) == hz.n_steps,
                f"{name}[{loc_id}]: length {len(series)} != n_steps {hz.n_steps}",
            )
            _require(
                bool(np.all(np.isfinite(series))),
                f"{name}[{loc_id}]: non-finite values",
            )
        _require(
            set(table) == set(ids), f"{name}: series for unknown locations"
        )
    for loc_id in ids:
        _require(
            bool(np.all(exo.raw_arrivals[loc_id] >= 0)),
            f"raw_arrivals[{loc_id}]: negative arrival",
        )
        for cf_name, table in (("wind_cf", exo.wind_cf), ("solar_cf", exo.solar_cf)):
            cf = table[loc_id]
            _require(
                bool(np.all((cf >= 0) & (cf <= 1))),
                f"{cf_name}[{loc_id}]: capacity factors outside [0, 1]",
            )

    _require(
        scenario.demand_clearing in CLEARING_MODES,
        f"unknown demand clearing {scenario.demand_clearing!r}",
    )

    check_production_potential(scenario)


def check_production_potential(scenario: Scenario) -> None:
    """Cheap necessary feasibility condition on aggregate mass balance.

    Net product withdrawal over the horizon must be non-negative and
    coverable by converting every kg of raw material at the best
    product-per-raw ratio. A violation is infeasible by construction;
    passing this check does not guarantee feasibility.
    """
    total_injection = sum(
        float(s.sum()) for s in scenario.exogenous.product_injection.values()
    )
    _require(
        total_injection <= 1e-9 * max(1.0, abs(total_injection)),
        f"net product injection {total_injection:.6g} kg is positive: more product "
        "appears than is withdrawn, periodic storage cannot absorb it",
    )
    required = -total_injection
    if required <= 0:
        return
    best_yield = max(
        (p.output_kg / p.raw_kg for p in scenario.processes), default=0.0
    )
    total_raw = sum(float(s.sum()) for s in scenario.exogenous.raw_arrivals.values())
    potential = total_raw * best_yield
    _require(
        required <= potential * (1 + 1e-9),
        f"demand needs {required:.6g} kg of product but raw arrivals support at "
        f"most {potential:.6g} kg",
    )


# ---------------------------------------------------------------------------
# file I/O


def _read_rows(path: FilePath, columns: tuple[str, ...]) -> list[dict[str, str]]:
    if not path.exists():
        raise ScenarioError(f"missing scenario file {path.name}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        got = tuple(reader.fieldnames or ())
        required = [c for c in columns if not c.endswith("?")]
        optional = [c[:-1] for c in columns if c.endswith("?")]
        if list(got[: len(required)]) != required or any(
            c not in required + optional for c in got
        ):
            raise ScenarioError(
                f"{path.name}: expected columns {required} "
                f"(optional {optional}), got {list(got)}"
            )
        rows = list(reader)
    return rows


def _parse_float(path_name: str, row_num: int, column: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ScenarioError(
            f"{path_name} row {row_num}: bad {column} value {raw!r}"
        ) from None
    if not math.isfinite(value):
        raise ScenarioError(f"{path_name} row {row_num}: non-finite {column}")
    return value


def _parse_int(path_name: str, row_num: int, column: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(
            f"{path_name} row {row_num}: bad {column} value {raw!r}"
        ) from None


def _series_from_rows(
    rows: list[dict[str, str]],
    file_name: str,
    value_column: str,
    loc_ids: tuple[str, ...],
    n_steps: int,
) -> dict[str, np.ndarray]:
    """Dense per-location arrays from sparse (location, step, value) rows."""
    table = {loc_id: np.zeros(n_steps) for loc_id in loc_ids}
    for i, row in enumerate(rows, start=2):
        loc_id = row["location"]
        if loc_id not in table:
            raise ScenarioError(f"{file_name} row {i}: unknown location {loc_id!r}")
        step = _parse_int(file_name, i, "step", row["step"])
        if not 0 <= step < n_steps:
            raise ScenarioError(
                f"{file_name} row {i}: step {step} outside [0, {n_steps - 1}]"
            )
        table[loc_id][step] += _parse_float(file_name, i, value_column, row[value_column])
    return table


def load_scenario(directory: str | FilePath) -> Scenario:
    """Load and validate a scenario directory."""
    directory = FilePath(directory)
    if not directory.is_dir():
        raise ScenarioError(f"scenario directory {directory} does not exist")

    params_path = directory / "params.toml"
    if not params_path.exists():
        raise ScenarioError("missing scenario file params.toml")
    try:
        with open(params_path, "rb") as fh:
            params = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"params.toml: {exc}") from None

    def section(name: str) -> dict:
        if name not in params:
            raise ScenarioError(f"params.toml: missing [{name}] section")
        return params[name]

    hz_raw = section("horizon")
    try:
        horizon = Horizon(
            n_steps=int(hz_raw["n_steps"]), step_hours=float(hz_raw["step_hours"])
        )
        tr_raw = section("truck")
        truck = TruckSpec(
            battery_kwh=float(tr_raw["battery_kwh"]),
            load_kg=float(tr_raw["load_kg"]),
            empty_weight_kg=float(tr_raw["empty_weight_kg"]),
            full_charge_hours=float(tr_raw["full_charge_hours"]),
            unit_cost=float(tr_raw["unit_cost"]),
            lifetime_years=float(tr_raw["lifetime_years"]),
        )
        processes = tuple(
            ProcessSpec(
                id=str(p["id"]),
                duration_steps=int(p["duration_steps"]),
                power_kw=float(p["power_kw"]),
                output_kg=float(p["output_kg"]),
                raw_kg=float(p["raw_kg"]),
                equip_unit_cost=float(p["equip_unit_cost"]),
                equip_lifetime_years=float(p["equip_lifetime_years"]),
            )
            for p in params.get("process", [])
        )
    except KeyError as exc:
        raise ScenarioError(f"params.toml: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"params.toml: {exc}") from None

    loc_rows = _read_rows(
        directory / "locations.csv", ("id", "name", "wind_mw", "solar_mw")
    )
    locations = tuple(
        Location(
            id=row["id"],
            name=row["name"],
            wind_nameplate_kw=_parse_float("locations.csv", i, "wind_mw", row["wind_mw"])
            * 1000.0,
            solar_nameplate_kw=_parse_float(
                "locations.csv", i, "solar_mw", row["solar_mw"]
            )
            * 1000.0,
        )
        for i, row in enumerate(loc_rows, start=2)
    )
    loc_ids = tuple(loc.id for loc in locations)

    path_rows = _read_rows(
        directory / "paths.csv",
        ("origin", "dest", "travel_steps", "energy_kwh", "distance_km?"),
    )
    paths = tuple(
        Path(
            origin=row["origin"],
            dest=row["dest"],
            travel_steps=_parse_int("paths.csv", i, "travel_steps", row["travel_steps"]),
            energy_kwh=_parse_float("paths.csv", i, "energy_kwh", row["energy_kwh"]),
            distance_km=(
                _parse_float("paths.csv", i, "distance_km", row["distance_km"])
                if row.get("distance_km") not in (None, "")
                else None
            ),
        )
        for i, row in enumerate(path_rows, start=2)
    )

    cf_rows = _read_rows(
        directory / "capacity_factors.csv", ("step", "location", "wind_cf", "solar_cf")
    )
    wind_cf = {loc_id: np.full(horizon.n_steps, np.nan) for loc_id in loc_ids}
    solar_cf = {loc_id: np.full(horizon.n_steps, np.nan) for loc_id in loc_ids}
    for i, row in enumerate(cf_rows, start=2):
        loc_id = row["location"]
        if loc_id not in wind_cf:
            raise ScenarioError(
                f"capacity_factors.csv row {i}: unknown location {loc_id!r}"
            )
        step = _parse_int("capacity_factors.csv", i, "step", row["step"])
        if not 0 <= step < horizon.n_steps:
            raise ScenarioError(
                f"capacity_factors.csv row {i}: step {step} outside "
                f"[0, {horizon.n_steps - 1}]"
            )
        wind_cf[loc_id][step] = _parse_float(
            "capacity_factors.csv", i, "wind_cf", row["wind_cf"]
        )
        solar_cf[loc_id][step] = _parse_float(
            "capacity_factors.csv", i, "solar_cf", row["solar_cf"]
        )
    for loc_id in loc_ids:
        missing = np.flatnonzero(np.isnan(wind_cf[loc_id]))
        if missing.size:
            raise ScenarioError(
                f"capacity_factors.csv: location {loc_id!r} missing steps "
                f"{missing[:5].tolist()}{'...' if missing.size > 5 else ''}"
            )

    demand = _series_from_rows(
        _read_rows(directory / "demand.csv", ("location", "step", "kg")),
        "demand.csv", "kg", loc_ids, horizon.n_steps,
    )
    raw_arrivals = _series_from_rows(
        _read_rows(directory / "raw_arrivals.csv", ("location", "step", "kg")),
        "raw_arrivals.csv", "kg", loc_ids, horizon.n_steps,
    )

    costs_raw = section("costs")
    store_table = costs_raw.get("k_store", {})
    default_store = store_table.get("default")
    k_store = {}
    for loc_id in loc_ids:
        rate = store_table.get(loc_id, default_store)
        if rate is None:
            raise ScenarioError(
                f"params.toml: no storage rate for location {loc_id!r} "
                "(set [costs.k_store] default or per-location entries)"
            )
        k_store[loc_id] = float(rate)
    equip_table = costs_raw.get("k_equip", {})
    k_equip = {
        p.id: float(
            equip_table.get(
                p.id, levelize(p.equip_unit_cost, p.equip_lifetime_years)
            )
        )
        for p in processes
    }
    costs = CostBook(
        k_truck=float(
            costs_raw.get("k_truck", levelize(truck.unit_cost, truck.lifetime_years))
        ),
        k_store=k_store,
        k_equip=k_equip,
        k_power=float(costs_raw.get("k_power", 0.0)),
        epsilon=float(costs_raw.get("epsilon", 0.001)),
        battery_cost_per_kwh=float(costs_raw.get("battery_cost_per_kwh", 400.0)),
        battery_lifetime_years=float(costs_raw.get("battery_lifetime_years", 5.0)),
        emission_factor=float(
            costs_raw.get("emission_factor", DEFAULT_EMISSION_FACTOR)
        ),
    )

    scenario = Scenario(
        horizon=horizon,
        locations=locations,
        paths=paths,
        truck=truck,
        processes=processes,
        costs=costs,
        exogenous=ExogenousSeries(
            product_injection=demand,
            raw_arrivals=raw_arrivals,
            wind_cf=wind_cf,
            solar_cf=solar_cf,
        ),
        demand_clearing=str(params.get("demand_clearing", "per-step")),
    )
    validate_scenario(scenario)
    return scenario


def _fmt(value: float) -> str:
    """Shortest decimal text that parses back to the identical float."""
    return repr(float(value))


def save_scenario(scenario: Scenario, directory: str | FilePath) -> None:
    """Write a scenario directory that loads back identically."""
    directory = FilePath(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / "locations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "name", "wind_mw", "solar_mw"])
        for loc in scenario.locations:
            writer.writerow(
                [loc.id, loc.name, _fmt(loc.wind_nameplate_kw / 1000.0),
                 _fmt(loc.solar_nameplate_kw / 1000.0)]
            )

    with_distance = any(p.distance_km is not None for p in scenario.paths)
    with open(directory / "paths.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["origin", "dest", "travel_steps", "energy_kwh"]
        if with_distance:
            header.append("distance_km")
        writer.writerow(header)
        for p in scenario.paths:
            row = [p.origin, p.dest, str(p.travel_steps), _fmt(p.energy_kwh)]
            if with_distance:
                row.append("" if p.distance_km is None else _fmt(p.distance_km))
            writer.writerow(row)

    with open(directory / "capacity_factors.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "location", "wind_cf", "solar_cf"])
        for step in range(scenario.horizon.n_steps):
            for loc_id in scenario.location_ids:
                writer.writerow(
                    [str(step), loc_id,
                     _fmt(scenario.exogenous.wind_cf[loc_id][step]),
                     _fmt(scenario.exogenous.solar_cf[loc_id][step])]
                )

    for file_name, table in (
        ("demand.csv", scenario.exogenous.product_injection),
        ("raw_arrivals.csv", scenario.exogenous.raw_arrivals),
    ):
        with open(directory / file_name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["location", "step", "kg"])
            for loc_id in scenario.location_ids:
                series = table[loc_id]
                for step in np.flatnonzero(series != 0):
                    writer.writerow([loc_id, str(int(step)), _fmt(series[step])])

    lines = [
        f'demand_clearing = "{scenario.demand_clearing}"',
        "",
        "[horizon]",
        f"n_steps = {scenario.horizon.n_steps}",
        f"step_hours = {_fmt(scenario.horizon.step_hours)}",
        "",
        "[truck]",
    ]
    tr = scenario.truck
    for name in ("battery_kwh", "load_kg", "empty_weight_kg", "full_charge_hours",
                 "unit_cost", "lifetime_years"):
        lines.append(f"{name} = {_fmt(getattr(tr, name))}")
    costs = scenario.costs
    lines += [
        "",
        "[costs]",
        f"k_truck = {_fmt(costs.k_truck)}",
        f"k_power = {_fmt(costs.k_power)}",
        f"epsilon = {_fmt(costs.epsilon)}",
        f"battery_cost_per_kwh = {_fmt(costs.battery_cost_per_kwh)}",
        f"battery_lifetime_years = {_fmt(costs.battery_lifetime_years)}",
        f"emission_factor = {_fmt(costs.emission_factor)}",
        "",
        "[costs.k_store]",
    ]
    lines += [f'"{loc_id}" = {_fmt(costs.k_store[loc_id])}'
              for loc_id in scenario.location_ids]
    lines += ["", "[costs.k_equip]"]
    lines += [f'"{p.id}" = {_fmt(costs.k_equip[p.id])}' for p in scenario.processes]
    for p in scenario.processes:
        lines += [
            "",
            "[[process]]",
            f'id = "{p.id}"',
            f"duration_steps = {p.duration_steps}",
            f"power_kw = {_fmt(p.power_kw)}",
            f"output_kg = {_fmt(p.output_kg)}",
            f"raw_kg = {_fmt(p.raw_kg)}",
            f"equip_unit_cost = {_fmt(p.equip_unit_cost)}",
            f"equip_lifetime_years = {_fmt(p.equip_lifetime_years)}",
        ]
    (directory / "params.toml").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# hashing


def _canonical_dict(scenario: Scenario) -> dict:
    def series_table(table: Mapping[str, np.ndarray]) -> dict:
        return {k: [_fmt(v) for v in table[k]] for k in sorted(table)}

    return {
        "horizon": {"n_steps": scenario.horizon.n_steps,
                    "step_hours": _fmt(scenario.horizon.step_hours)},
        "locations": [
            [loc.id, loc.name, _fmt(loc.wind_nameplate_kw),
             _fmt(loc.solar_nameplate_kw)]
            for loc in scenario.locations
        ],
        "paths": [
            [p.origin, p.dest, p.travel_steps, _fmt(p.energy_kwh),
             None if p.distance_km is None else _fmt(p.distance_km)]
            for p in scenario.paths
        ],
        "truck": [_fmt(scenario.truck.battery_kwh), _fmt(scenario.truck.load_kg),
                  _fmt(scenario.truck.empty_weight_kg),
                  _fmt(scenario.truck.full_charge_hours),
                  _fmt(scenario.truck.unit_cost),
                  _fmt(scenario.truck.lifetime_years)],
        "processes": [
            [p.id, p.duration_steps, _fmt(p.power_kw), _fmt(p.output_kg),
             _fmt(p.raw_kg), _fmt(p.equip_unit_cost), _fmt(p.equip_lifetime_years)]
            for p in scenario.processes
        ],
        "costs": {
            "k_truck": _fmt(scenario.costs.k_truck),
            "k_store": {k: _fmt(v) for k, v in sorted(scenario.costs.k_store.items())},
            "k_equip": {k: _fmt(v) for k, v in sorted(scenario.costs.k_equip.items())},
            "k_power": _fmt(scenario.costs.k_power),
            "epsilon": _fmt(scenario.costs.epsilon),
            "battery_cost_per_kwh": _fmt(scenario.costs.battery_cost_per_kwh),
            "battery_lifetime_years": _fmt(scenario.costs.battery_lifetime_years),
            "emission_factor": _fmt(scenario.costs.emission_factor),
        },
        "exogenous": {
            "product_injection": series_table(scenario.exogenous.product_injection),
            "raw_arrivals": series_table(scenario.exogenous.raw_arrivals),
            "wind_cf": series_table(scenario.exogenous.wind_cf),
            "solar_cf": series_table(scenario.exogenous.solar_cf),
        },
        "demand_clearing": scenario.demand_clearing,
    }


def scenario_hash(scenario: Scenario) -> str:
    """Platform-stable SHA-256 over a canonical text serialization."""
    payload = json.dumps(_canonical_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    return scenario_hash(a) == scenario_hash(b)
