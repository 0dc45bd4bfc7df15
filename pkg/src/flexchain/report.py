"""Static figure rendering for solved plans.

Every function takes computed results and writes one PNG; nothing here
recomputes model quantities. The Agg backend is forced so rendering
works headless and byte-stable inputs give identical figures.
"""

from __future__ import annotations

from pathlib import Path as FilePath

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from flexchain.bess import BessResult
from flexchain.kpi import KpiReport
from flexchain.scenario import Scenario
from flexchain.solve import PlanSolution
from flexchain.sweep import SweepResult


def _finish(fig, path: str | FilePath) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cost_breakdown(report: KpiReport, path: str | FilePath) -> None:
    """Horizontal bars of capex and opex components over the horizon."""
    labels = []
    values = []
    for name, value in sorted(report.capex.items()):
        labels.append(f"capex {name}")
        values.append(value)
    for name, value in sorted(report.opex.items()):
        labels.append(f"opex {name}")
        values.append(value)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.barh(labels, values, color="steelblue")
    ax.set_xlabel("$ over horizon")
    ax.set_title("Cost breakdown")
    _finish(fig, path)


def plot_utilization(report: KpiReport, path: str | FilePath) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    items = sorted(report.utilization_pct.items())
    ax.bar([k for k, _ in items], [v for _, v in items], color="darkseagreen")
    ax.set_ylabel("time-average utilization %")
    ax.set_ylim(0, 100)
    ax.set_title("Capacity utilization")
    _finish(fig, path)


def plot_energy_sources(report: KpiReport, path: str | FilePath) -> None:
    """Stacked bars: energy by use, split into wind / solar / non-renewable."""
    uses = sorted(report.energy_kwh)
    sources = ("wind", "solar", "nonrenewable")
    colors = {"wind": "skyblue", "solar": "gold", "nonrenewable": "dimgray"}
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bottom = np.zeros(len(uses))
    for source in sources:
        vals = np.array([report.energy_kwh[use][source] / 1000.0 for use in uses])
        ax.bar(uses, vals, bottom=bottom, label=source, color=colors[source])
        bottom += vals
    ax.set_ylabel("MWh over horizon")
    ax.set_title("Energy by use and source")
    ax.legend()
    _finish(fig, path)


def plot_power_profile(
    solution: PlanSolution, scenario: Scenario, path: str | FilePath
) -> None:
    """Total draw vs renewable availability; shaded non-renewable share."""
    dt = scenario.horizon.step_hours
    hours = np.arange(scenario.horizon.n_steps) * dt
    draw = solution.total_power() / 1000.0
    avail = scenario.total_renewable_kw() / 1000.0
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(hours, avail, label="renewable available", color="seagreen", lw=1.0)
    ax.plot(hours, draw, label="total draw", color="navy", lw=1.0)
    ax.fill_between(hours, np.minimum(draw, avail), draw,
                    where=draw > avail, color="lightcoral", alpha=0.6,
                    label="non-renewable")
    ax.set_xlabel("hour")
    ax.set_ylabel("MW")
    ax.set_title("Power profile")
    ax.legend(loc="upper right", fontsize=8)
    _finish(fig, path)


def plot_cumulative_shift(
    series_by_label: dict[str, np.ndarray], step_hours: float, path: str | FilePath
) -> None:
    """Cumulative consumption differences (MWh) between plans."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    for label, series in series_by_label.items():
        hours = (np.arange(len(series)) + 1) * step_hours
        ax.plot(hours, series / 1000.0, label=label, lw=1.2)
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.set_xlabel("hour")
    ax.set_ylabel("MWh shifted earlier")
    ax.set_title("Cumulative consumption shift")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_bess_comparison(
    taxes: list[float],
    flexible_pct: list[float],
    bess_pct: list[float],
    capacities_kwh: list[float],
    path: str | FilePath,
) -> None:
    """Renewable share of the flexible plan vs the battery counterpart."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(len(taxes))
    ax.plot(x, flexible_pct, "o-", label="flexible supply chain", color="navy")
    ax.plot(x, bess_pct, "s-", label="fixed load + battery", color="darkorange")
    ax.set_xticks(x, [f"{t:g}" for t in taxes])
    ax.set_xlabel("carbon tax, $/tonne")
    ax.set_ylabel("renewable share of demand, %")
    ax2 = ax.twinx()
    ax2.bar(x, np.array(capacities_kwh) / 1000.0, width=0.3, alpha=0.25,
            color="gray", label="battery capacity")
    ax2.set_ylabel("battery capacity, MWh")
    ax.set_title("Demand flexibility vs stationary storage")
    ax.legend(loc="lower right", fontsize=8)
    _finish(fig, path)


def plot_sweep(result: SweepResult, path: str | FilePath) -> None:
    """Renewable share per cost-scale cell, one line per (clearing, tax)."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    groups: dict[tuple[str, float], list[tuple[str, float]]] = {}
    for cell in result.cells:
        if cell.status != "optimal":
            continue
        label = f"{cell.key.truck_scale:g}x/{cell.key.equip_scale:g}x"
        groups.setdefault((cell.key.clearing, cell.key.tax_per_tonne), []).append(
            (label, cell.renewable_pct)
        )
    for (clearing, tax), points in sorted(groups.items()):
        labels = [p[0] for p in points]
        ax.plot(labels, [p[1] for p in points], "o-",
                label=f"{clearing}, ${tax:g}/t")
    ax.set_xlabel("truck x equipment cost scale")
    ax.set_ylabel("renewable share of demand, %")
    ax.set_title("Sensitivity sweep")
    ax.tick_params(axis="x", labelsize=7)
    ax.legend(fontsize=7)
    _finish(fig, path)
