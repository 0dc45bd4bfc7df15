"""Derived metrics for solved plans.

All energy figures are kWh over the horizon. Renewable consumption per
step is the lesser of total draw and total availability (the copper
plate lets any location absorb any renewable source); the non-renewable
remainder matches the plan's z series by construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Mapping

import numpy as np

from flexchain.model import (
    equipment_occupancy,
    manufacturing_power,
    transit_occupancy,
)
from flexchain.scenario import Scenario
from flexchain.solve import PlanSolution


@dataclass(frozen=True)
class KpiReport:
    """Headline metrics of one solved plan."""

    renewable_pct_of_demand: float
    renewable_pct_of_available: float
    total_energy_kwh: float
    energy_kwh: dict[str, dict[str, float]]   # use -> source -> kWh
    utilization_pct: dict[str, float]         # trucks / warehouse / equipment
    capex: dict[str, float]                   # $ over the horizon, by asset
    opex: dict[str, float]
    total_distance_km: float | None
    cumulative_energy_kwh: np.ndarray         # running consumption, per step

    def as_dict(self) -> dict:
        return {
            "renewable_pct_of_demand": self.renewable_pct_of_demand,
            "renewable_pct_of_available": self.renewable_pct_of_available,
            "total_energy_kwh": self.total_energy_kwh,
            "energy_kwh": self.energy_kwh,
            "utilization_pct": self.utilization_pct,
            "capex": self.capex,
            "opex": self.opex,
            "total_distance_km": self.total_distance_km,
        }


def renewable_consumed_kw(solution: PlanSolution, scenario: Scenario) -> np.ndarray:
    """Per-step renewable power actually absorbed, kW."""
    draw = solution.total_power()
    return np.minimum(draw, scenario.total_renewable_kw())


def renewable_fractions(
    solution: PlanSolution, scenario: Scenario
) -> tuple[float, float]:
    """(percent of demand met renewably, percent of available renewables used)."""
    dt = scenario.horizon.step_hours
    consumed = float(renewable_consumed_kw(solution, scenario).sum()) * dt
    demand = float(solution.total_power().sum()) * dt
    available = float(scenario.total_renewable_kw().sum()) * dt
    pct_demand = 100.0 * consumed / demand if demand > 0 else 0.0
    pct_available = 100.0 * consumed / available if available > 0 else 0.0
    return pct_demand, pct_available


def attribute_energy(
    solution: PlanSolution, scenario: Scenario
) -> dict[str, dict[str, float]]:
    """Split consumption by use (manufacturing/transport) and source.

    Manufacturing draw follows directly from process starts; transport
    (truck charging) is the remainder of each location's draw. Renewable
    energy is split between wind and solar pro rata by availability; the
    per-use renewable share follows each use's share of total draw per
    step. Shares sum exactly to total consumption.
    """
    dt = scenario.horizon.step_hours
    n = scenario.horizon.n_steps
    total = solution.total_power()
    mfg = sum(manufacturing_power(scenario, solution.process_starts).values(),
              np.zeros(n))
    transport = total - mfg  # may dip negative when trucks discharge into processes

    wind = np.zeros(n)
    solar = np.zeros(n)
    for loc_id in scenario.location_ids:
        wind += scenario.wind_kw(loc_id)
        solar += scenario.solar_kw(loc_id)
    renewable = wind + solar
    consumed = np.minimum(total, renewable)
    nonrenewable = total - consumed
    with np.errstate(invalid="ignore", divide="ignore"):
        wind_share = np.where(renewable > 0, wind / renewable, 0.0)
        use_shares = {
            "manufacturing": np.where(total > 0, mfg / total, 0.0),
            "transport": np.where(total > 0, transport / total, 0.0),
        }

    out: dict[str, dict[str, float]] = {}
    for use, share in use_shares.items():
        out[use] = {
            "nonrenewable": float((share * nonrenewable).sum()) * dt,
            "wind": float((share * consumed * wind_share).sum()) * dt,
            "solar": float((share * consumed * (1.0 - wind_share)).sum()) * dt,
        }
        out[use]["total"] = sum(out[use].values())
    return out


def utilization(solution: PlanSolution, scenario: Scenario) -> dict[str, float]:
    """Time-average capacity utilization in percent, per asset class.

    Trucks count as utilized while in transit; warehouses by stored mass
    over capacity; equipment by busy units over installed units.
    Entities with zero installed capacity are excluded from the average;
    an asset class with no capacity anywhere reports 0.
    """
    n = scenario.horizon.n_steps

    trucks = 0.0
    if scenario.paths and solution.fleet_size > 1e-9:
        in_transit = transit_occupancy(scenario, solution.loaded, solution.empty)
        trucks = 100.0 * float(in_transit.mean()) / solution.fleet_size

    warehouse_rates = [
        float((solution.product[loc_id][1:] + solution.raw[loc_id][1:]).mean())
        / solution.warehouse[loc_id]
        for loc_id in scenario.location_ids
        if solution.warehouse[loc_id] > 1e-9
    ]
    busy = equipment_occupancy(scenario, solution.process_starts)
    equip_rates = [
        float(busy[key].mean()) / units
        for key, units in solution.equipment.items()
        if units > 1e-9
    ]
    return {
        "trucks": trucks,
        "warehouse": 100.0 * float(np.mean(warehouse_rates)) if warehouse_rates else 0.0,
        "equipment": 100.0 * float(np.mean(equip_rates)) if equip_rates else 0.0,
    }


def cumulative_shift(
    solution_a: PlanSolution,
    solution_b: PlanSolution,
    step_hours: float | None = None,
) -> np.ndarray:
    """Running difference in consumed energy, a minus b, kWh per step.

    Positive values mean plan a consumed energy earlier than plan b. For
    plans serving the same demand the series returns to ~0 at the end of
    the cycle; its magnitude and sign trace how far consumption moved in
    time. ``step_hours`` defaults to the plans' own recorded step size.
    """
    pa = solution_a.total_power()
    pb = solution_b.total_power()
    if len(pa) != len(pb):
        raise ValueError(f"plans have {len(pa)} vs {len(pb)} steps")
    if step_hours is None:
        step_hours = float(solution_a.meta.get("step_hours", 1.0))
        if solution_b.meta.get("step_hours", step_hours) != step_hours:
            raise ValueError("plans disagree on step size")
    return np.cumsum((pa - pb) * step_hours)


def total_distance(
    solution: PlanSolution,
    scenario: Scenario,
    distances_km: Mapping[tuple[str, str], float],
) -> float:
    """Total distance driven (loaded plus empty), km."""
    total = 0.0
    for p in scenario.paths:
        if p.key not in distances_km:
            raise KeyError(f"no distance for path {p.origin}->{p.dest}")
        trips = float(solution.loaded[p.key].sum() + solution.empty[p.key].sum())
        total += trips * float(distances_km[p.key])
    return total


def build_report(solution: PlanSolution, scenario: Scenario) -> KpiReport:
    dt = scenario.horizon.step_hours
    pct_demand, pct_available = renewable_fractions(solution, scenario)
    breakdown = solution.breakdown
    distances = {
        p.key: p.distance_km for p in scenario.paths if p.distance_km is not None
    }
    distance = (
        total_distance(solution, scenario, distances)
        if scenario.paths and len(distances) == len(scenario.paths)
        else None
    )
    return KpiReport(
        renewable_pct_of_demand=pct_demand,
        renewable_pct_of_available=pct_available,
        total_energy_kwh=float(solution.total_power().sum()) * dt,
        energy_kwh=attribute_energy(solution, scenario),
        utilization_pct=utilization(solution, scenario),
        capex={
            "trucks": breakdown.truck_capex if breakdown else 0.0,
            "warehouse": breakdown.warehouse_capex if breakdown else 0.0,
            "equipment": breakdown.equipment_capex if breakdown else 0.0,
        },
        opex={
            "nonrenewable": breakdown.nonrenewable_cost if breakdown else 0.0,
            "base_energy": breakdown.base_energy_cost if breakdown else 0.0,
        },
        total_distance_km=distance,
        cumulative_energy_kwh=np.cumsum(solution.total_power() * dt),
    )


# ---------------------------------------------------------------------------
# serialization


def write_report_json(report: KpiReport, path: str | FilePath) -> None:
    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: KpiReport, path: str | FilePath) -> None:
    """Flat metric,value rows (stable ordering) for spreadsheet import."""
    rows: list[tuple[str, object]] = [
        ("renewable_pct_of_demand", report.renewable_pct_of_demand),
        ("renewable_pct_of_available", report.renewable_pct_of_available),
        ("total_energy_kwh", report.total_energy_kwh),
    ]
    for use in sorted(report.energy_kwh):
        for source in sorted(report.energy_kwh[use]):
            rows.append((f"energy_kwh.{use}.{source}", report.energy_kwh[use][source]))
    rows += [(f"utilization_pct.{k}", v)
             for k, v in sorted(report.utilization_pct.items())]
    rows += [(f"capex.{k}", v) for k, v in sorted(report.capex.items())]
    rows += [(f"opex.{k}", v) for k, v in sorted(report.opex.items())]
    rows.append(("total_distance_km", report.total_distance_km))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for metric, value in rows:
            writer.writerow([metric, "" if value is None else repr(float(value))])


def format_report(report: KpiReport) -> str:
    """Human-readable text table."""
    lines = [
        f"{'renewable share of demand':<32}{report.renewable_pct_of_demand:10.2f} %",
        f"{'renewable share of available':<32}{report.renewable_pct_of_available:10.2f} %",
        f"{'total consumption':<32}{report.total_energy_kwh:10.0f} kWh",
    ]
    for use in sorted(report.energy_kwh):
        for source in sorted(report.energy_kwh[use]):
            lines.append(
                f"{use + ' ' + source:<32}{report.energy_kwh[use][source]:10.0f} kWh"
            )
    for k, v in sorted(report.utilization_pct.items()):
        lines.append(f"{k + ' utilization':<32}{v:10.2f} %")
    for k, v in sorted(report.capex.items()):
        lines.append(f"{'capex ' + k:<32}{v:10.2f} $")
    for k, v in sorted(report.opex.items()):
        lines.append(f"{'opex ' + k:<32}{v:10.2f} $")
    if report.total_distance_km is not None:
        lines.append(f"{'distance driven':<32}{report.total_distance_km:10.0f} km")
    return "\n".join(lines)
