"""Sensitivity sweeps over cost scales, carbon tax, and demand clearing.

Each grid cell re-prices a base scenario (truck and equipment capacity
rates scaled, power priced through the tax, clearing swapped) and
re-solves the plan. Cells run independently, optionally across
processes; failures are recorded per cell rather than aborting the
sweep, and results merge deterministically by grid key.

Sizing results are compared against the minimum feasible sizing (the
smallest fleet or equipment count any feasible plan needs, found by
re-solving with a pure sizing objective): a cell whose optimal sizing
sits on that floor is flagged, since its sizing is set by feasibility,
not economics.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

from flexchain import kpi as kpi_mod
from flexchain.model import VarKind, build_lp
from flexchain.scenario import Scenario
from flexchain.solve import (
    DEFAULT_CONFIG,
    SolveStatus,
    SolverConfig,
    solve,
    solve_scenario,
)

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "FLEXCHAIN_WORKERS"

#: A sized quantity counts as sitting on the feasibility floor when it is
#: within this relative margin of the minimum feasible value.
FLOOR_REL_TOL = 1e-4
FLOOR_ABS_TOL = 1e-6


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition; empty clearings means keep the scenario's own."""

    tax_points: tuple[float, ...]
    truck_cost_scales: tuple[float, ...] = (1.0,)
    equip_cost_scales: tuple[float, ...] = (1.0,)
    clearings: tuple[str, ...] = ()

    def cells(self, base_clearing: str) -> list["CellKey"]:
        clearings = self.clearings or (base_clearing,)
        return [
            CellKey(ts, es, tax, clearing)
            for ts in self.truck_cost_scales
            for es in self.equip_cost_scales
            for clearing in clearings
            for tax in self.tax_points
        ]


@dataclass(frozen=True, order=True)
class CellKey:
    truck_scale: float
    equip_scale: float
    tax_per_tonne: float
    clearing: str


@dataclass
class SweepCell:
    key: CellKey
    status: str
    objective: float = float("nan")
    total_energy_kwh: float = float("nan")
    renewable_pct: float = float("nan")
    fleet_size: float = float("nan")
    fleet_at_floor: bool = False
    equipment_units: float = float("nan")
    equipment_at_floor: bool = False
    warehouse_kg: float = float("nan")
    distance_km: float | None = None
    error: str = ""
    report: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    cells: list[SweepCell]
    floors: dict[str, dict[str, float]]  # clearing -> quantity -> minimum

    def cell(self, key: CellKey) -> SweepCell:
        for c in self.cells:
            if c.key == key:
                return c
        raise KeyError(key)


def _cell_scenario(base: Scenario, key: CellKey) -> Scenario:
    return (
        base.with_clearing(key.clearing)
        .with_cost_scales(key.truck_scale, key.equip_scale)
        .with_carbon_tax(key.tax_per_tonne)
    )


def minimum_feasible_floor(
    scenario: Scenario, quantity: str, config: SolverConfig = DEFAULT_CONFIG
) -> float:
    """Smallest feasible value of a sized quantity, ignoring all costs.

    quantity: "fleet" (trucks) or "equipment" (total units, all
    processes and locations). The floor depends only on the physical
    constraints and demand timing, not on any cost rate.
    """
    lp = build_lp(scenario)
    objective = np.zeros(lp.n_cols)
    if quantity == "fleet":
        if not scenario.paths:
            return 0.0
        objective[lp.index.col(VarKind.FLEET)] = 1.0
    elif quantity == "equipment":
        for entity in lp.index.entities(VarKind.EQUIPMENT):
            objective[lp.index.col(VarKind.EQUIPMENT, entity)] = 1.0
    else:
        raise ValueError(f"unknown sized quantity {quantity!r}")
    raw = solve(dataclasses.replace(lp, objective=objective), config)
    if raw.status is not SolveStatus.OPTIMAL:
        raise RuntimeError(f"floor computation failed: {raw.status}")
    return raw.objective


def _at_floor(value: float, floor: float) -> bool:
    return value <= floor * (1 + FLOOR_REL_TOL) + FLOOR_ABS_TOL


def _solve_cell(args: tuple[Scenario, CellKey, SolverConfig]) -> SweepCell:
    base, key, config = args
    try:
        scenario = _cell_scenario(base, key)
        solution = solve_scenario(scenario, config)
        if solution.status is not SolveStatus.OPTIMAL:
            return SweepCell(key=key, status=solution.status.value)
        report = kpi_mod.build_report(solution, scenario)
        return SweepCell(
            key=key,
            status="optimal",
            objective=solution.objective,
            total_energy_kwh=report.total_energy_kwh,
            renewable_pct=report.renewable_pct_of_demand,
            fleet_size=solution.fleet_size,
            equipment_units=float(sum(solution.equipment.values())),
            warehouse_kg=float(sum(solution.warehouse.values())),
            distance_km=report.total_distance_km,
            report=report.as_dict(),
        )
    except Exception as exc:  # cell failures must not kill the sweep
        logger.warning("sweep cell %s failed: %s", key, exc)
        return SweepCell(key=key, status="error", error=str(exc))


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(
    base: Scenario,
    spec: SweepSpec,
    config: SolverConfig = DEFAULT_CONFIG,
    workers: int | None = None,
) -> SweepResult:
    """Solve every grid cell; merge results in grid order."""
    workers = default_workers() if workers is None else max(1, workers)
    keys = spec.cells(base.demand_clearing)
    jobs = [(base, key, config) for key in keys]

    if workers == 1:
        cells = [_solve_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_solve_cell, jobs))
    cells.sort(key=lambda c: keys.index(c.key))

    floors: dict[str, dict[str, float]] = {}
    for clearing in sorted({key.clearing for key in keys}):
        variant = base.with_clearing(clearing)
        try:
            floors[clearing] = {
                "fleet": minimum_feasible_floor(variant, "fleet", config),
                "equipment": minimum_feasible_floor(variant, "equipment", config),
            }
        except Exception as exc:
            logger.warning("floor computation failed for %s: %s", clearing, exc)
            floors[clearing] = {}

    for cell in cells:
        if cell.status != "optimal":
            continue
        floor = floors.get(cell.key.clearing, {})
        if "fleet" in floor:
            cell.fleet_at_floor = _at_floor(cell.fleet_size, floor["fleet"])
        if "equipment" in floor:
            cell.equipment_at_floor = _at_floor(cell.equipment_units,
                                                floor["equipment"])
    return SweepResult(cells=cells, floors=floors)


# ---------------------------------------------------------------------------
# serialization

CSV_COLUMNS = (
    "truck_scale", "equip_scale", "tax_per_tonne", "clearing", "status",
    "objective", "total_energy_kwh", "renewable_pct", "fleet_size",
    "fleet_at_floor", "equipment_units", "equipment_at_floor", "warehouse_kg",
    "distance_km", "error",
)


def write_sweep_csv(result: SweepResult, path: str | FilePath) -> None:
    def fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return "" if np.isnan(value) else repr(value)
        return str(value)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for cell in result.cells:
            writer.writerow([
                fmt(cell.key.truck_scale), fmt(cell.key.equip_scale),
                fmt(cell.key.tax_per_tonne), cell.key.clearing, cell.status,
                fmt(cell.objective), fmt(cell.total_energy_kwh),
                fmt(cell.renewable_pct), fmt(cell.fleet_size),
                fmt(cell.fleet_at_floor), fmt(cell.equipment_units),
                fmt(cell.equipment_at_floor), fmt(cell.warehouse_kg),
                fmt(cell.distance_km), cell.error,
            ])


def write_sweep_json(result: SweepResult, path: str | FilePath) -> None:
    payload = {
        "floors": result.floors,
        "cells": [
            {
                "key": {
                    "truck_scale": cell.key.truck_scale,
                    "equip_scale": cell.key.equip_scale,
                    "tax_per_tonne": cell.key.tax_per_tonne,
                    "clearing": cell.key.clearing,
                },
                "status": cell.status,
                "objective": None if np.isnan(cell.objective) else cell.objective,
                "total_energy_kwh": (
                    None if np.isnan(cell.total_energy_kwh) else cell.total_energy_kwh
                ),
                "renewable_pct": (
                    None if np.isnan(cell.renewable_pct) else cell.renewable_pct
                ),
                "fleet_size": None if np.isnan(cell.fleet_size) else cell.fleet_size,
                "fleet_at_floor": cell.fleet_at_floor,
                "equipment_units": (
                    None if np.isnan(cell.equipment_units) else cell.equipment_units
                ),
                "equipment_at_floor": cell.equipment_at_floor,
                "warehouse_kg": (
                    None if np.isnan(cell.warehouse_kg) else cell.warehouse_kg
                ),
                "distance_km": cell.distance_km,
                "error": cell.error,
                "report": cell.report,
            }
            for cell in result.cells
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
