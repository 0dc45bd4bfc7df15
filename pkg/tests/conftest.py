"""Shared fixtures: a hand-sized scenario factory and solved demo plans.

Solves are cached at session scope; acceptance and unit tests share the
same solved plans instead of re-solving per test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from flexchain.demo import build_demo_scenario
from flexchain.scenario import (
    CostBook,
    ExogenousSeries,
    Horizon,
    Location,
    Path,
    ProcessSpec,
    Scenario,
    TruckSpec,
    validate_scenario,
)
from flexchain.solve import solve_scenario

TAX_LADDER = (0.0, 1.0, 50.0, 100.0, 250.0)


def make_scenario(
    n_steps: int = 2,
    step_hours: float = 1.0,
    locations: tuple[str, ...] = ("site",),
    paths: tuple[tuple, ...] = (),
    demand: dict[tuple[str, int], float] | None = None,
    raw: dict[tuple[str, int], float] | None = None,
    wind_nameplate_kw: float = 0.0,
    solar_nameplate_kw: float = 0.0,
    wind_cf: dict[str, np.ndarray] | None = None,
    solar_cf: dict[str, np.ndarray] | None = None,
    process_power_kw: float = 40.0,
    process_duration: int = 1,
    process_output_kg: float = 100.0,
    process_raw_kg: float = 100.0,
    truck_battery_kwh: float = 900.0,
    truck_load_kg: float = 20000.0,
    truck_empty_kg: float = 10000.0,
    truck_charge_hours: float = 2.0,
    k_truck: float = 0.2,
    k_store: float = 1e-4,
    k_equip: float = 0.5,
    k_power: float = 0.02,
    epsilon: float = 0.001,
    clearing: str = "per-step",
    validate: bool = True,
) -> Scenario:
    """Small scenario with hand-controllable coefficients."""
    demand = demand or {}
    raw = raw or {}
    zeros = {loc: np.zeros(n_steps) for loc in locations}

    def series(table: dict[tuple[str, int], float]) -> dict[str, np.ndarray]:
        out = {loc: np.zeros(n_steps) for loc in locations}
        for (loc, step), value in table.items():
            out[loc][step] += value
        return out

    scenario = Scenario(
        horizon=Horizon(n_steps=n_steps, step_hours=step_hours),
        locations=tuple(
            Location(loc, loc.title(), wind_nameplate_kw, solar_nameplate_kw)
            for loc in locations
        ),
        paths=tuple(Path(*p) for p in paths),
        truck=TruckSpec(
            battery_kwh=truck_battery_kwh,
            load_kg=truck_load_kg,
            empty_weight_kg=truck_empty_kg,
            full_charge_hours=truck_charge_hours,
            unit_cost=52560.0,
            lifetime_years=30.0,
        ),
        processes=(
            ProcessSpec(
                id="kiln",
                duration_steps=process_duration,
                power_kw=process_power_kw,
                output_kg=process_output_kg,
                raw_kg=process_raw_kg,
                equip_unit_cost=100000.0,
                equip_lifetime_years=40.0,
            ),
        ),
        costs=CostBook(
            k_truck=k_truck,
            k_store={loc: k_store for loc in locations},
            k_equip={"kiln": k_equip},
            k_power=k_power,
            epsilon=epsilon,
        ),
        exogenous=ExogenousSeries(
            product_injection=series(demand),
            raw_arrivals=series(raw),
            wind_cf=wind_cf or dict(zeros),
            solar_cf=solar_cf or dict(zeros),
        ),
        demand_clearing=clearing,
    )
    if validate:
        validate_scenario(scenario)
    return scenario


@pytest.fixture(scope="session")
def demo_scenario() -> Scenario:
    return build_demo_scenario()


@pytest.fixture(scope="session")
def demo_solutions(demo_scenario):
    """Demo plan solved at every ladder tax, keyed by $/tonne."""
    return {
        tax: solve_scenario(demo_scenario.with_carbon_tax(tax))
        for tax in TAX_LADDER
    }


@pytest.fixture(scope="session")
def fortnight_scenario() -> Scenario:
    """Two weeks at 2 h steps where the clearing window genuinely binds.

    One plant, no trucks. Week one is nearly calm, week two windy; raw
    meal drips in daily, so production can run at most a day ahead of
    its feedstock. Weekly clearing pins half the output inside the calm
    week; monthly clearing may chase the week-two wind with all of it.
    Storage is priced high enough that carrying finished product across
    the cycle boundary costs more than the week-one grid power it would
    avoid, so the weekly deadline genuinely binds.
    """
    n_steps, step_hours = 168, 2.0
    steps_per_day = int(24 / step_hours)
    demand = {}
    raw = {}
    for day in range(14):
        demand[("plant", day * steps_per_day + 10)] = -100_000.0
        raw[("plant", day * steps_per_day)] = 100_000.0

    hours = np.arange(n_steps) * step_hours
    calm = 0.02 + 0.10 * np.abs(np.sin(math.pi * hours / 24.0))
    windy = (0.75
             + 0.20 * np.sin(2 * math.pi * hours / 77.0)
             + 0.05 * np.sin(2 * math.pi * hours / 23.0))
    cf = np.clip(np.where(hours < 168.0, calm, windy), 0.0, 1.0)

    return make_scenario(
        n_steps=n_steps,
        step_hours=step_hours,
        locations=("plant",),
        demand=demand,
        raw=raw,
        wind_nameplate_kw=4200.0,
        wind_cf={"plant": cf},
        process_power_kw=200.0,
        process_output_kg=1000.0,
        process_raw_kg=1000.0,
        k_store=5e-5,
        k_equip=0.0713,
        clearing="weekly",
    )


@pytest.fixture(scope="session")
def fortnight_solutions(fortnight_scenario):
    """(clearing, tax) -> solution on the two-week horizon."""
    out = {}
    for clearing in ("weekly", "monthly"):
        variant = fortnight_scenario.with_clearing(clearing)
        for tax in (0.0, 50.0):
            out[(clearing, tax)] = solve_scenario(variant.with_carbon_tax(tax))
    return out
