"""Stationary-battery counterpart: same load, storage instead of flexibility.

The comparison freezes the supply chain's power-draw profile from a
zero-power-price plan (the schedule a cost-oblivious operator would
run), then asks how large a grid battery must be to reach the same
renewable utilization that the flexible supply chain achieves by
re-timing its own consumption. The battery shifts energy between steps;
the load itself never moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import lil_matrix

from flexchain.scenario import Scenario
from flexchain.solve import PlanSolution, SolverError

#: A frozen profile must come from a plan priced at zero; tolerance on the
#: recorded power price in $/kWh.
ZERO_PRICE_TOL = 1e-12


@dataclass(frozen=True)
class FixedLoadProfile:
    """Aggregate demand and renewable availability, kW per step."""

    demand_kw: np.ndarray
    renewable_kw: np.ndarray
    step_hours: float

    def __post_init__(self):
        if len(self.demand_kw) != len(self.renewable_kw):
            raise ValueError(
                f"demand has {len(self.demand_kw)} steps, "
                f"renewables {len(self.renewable_kw)}"
            )

    @property
    def n_steps(self) -> int:
        return len(self.demand_kw)

    @property
    def total_energy_kwh(self) -> float:
        return float(self.demand_kw.sum()) * self.step_hours


@dataclass(frozen=True)
class BessResult:
    """Sized battery and its operating trajectory."""

    capacity_kwh: float
    stored_kwh: np.ndarray        # grid points 0..n_steps
    nonrenewable_kw: np.ndarray
    curtailed_kw: np.ndarray
    renewable_consumed_kw: np.ndarray
    objective: float

    @property
    def renewable_pct_of_demand(self) -> float:
        demand = float(self.nonrenewable_kw.sum() + self.renewable_consumed_kw.sum())
        if demand <= 0:
            return 0.0
        return 100.0 * float(self.renewable_consumed_kw.sum()) / demand


def derive_fixed_profile(solution: PlanSolution, scenario: Scenario) -> FixedLoadProfile:
    """Aggregate a plan's power draws into a battery-sizing profile.

    The plan must have been optimized with a zero non-renewable power
    price, otherwise the profile would already embed demand flexibility
    and the comparison would be circular.
    """
    k_power = solution.meta.get("k_power")
    if k_power is None or abs(k_power) > ZERO_PRICE_TOL:
        raise ValueError(
            "fixed profile requires a plan solved at zero power price, "
            f"got k_power={k_power!r}"
        )
    demand = solution.total_power()
    if len(demand) != scenario.horizon.n_steps:
        raise ValueError("solution and scenario horizons disagree")
    return FixedLoadProfile(
        demand_kw=demand.copy(),
        renewable_kw=scenario.total_renewable_kw(),
        step_hours=scenario.horizon.step_hours,
    )


def size_battery(
    profile: FixedLoadProfile,
    capacity_rate: float,
    k_power: float,
    epsilon: float = 0.0,
) -> BessResult:
    """Cost-optimal battery capacity for a fixed load under a power price.

    Minimizes capacity_rate * horizon_hours * capacity plus the energy
    bill, subject to the storage balance per step, the capacity holding
    at every grid point, and a periodic state of charge. ``capacity_rate``
    is $/kWh of capacity per hour (a levelized build cost).

    Columns: stored energy at n+1 grid points, capacity, per-step
    non-renewable draw and curtailment.
    """
    n = profile.n_steps
    dt = profile.step_hours
    horizon_hours = n * dt
    demand = profile.demand_kw
    renew = profile.renewable_kw

    n_cols = (n + 1) + 1 + n + n
    col_stored = np.arange(n + 1)
    col_cap = n + 1
    col_z = n + 2 + np.arange(n)
    col_curt = n + 2 + n + np.arange(n)

    c = np.zeros(n_cols)
    c[col_cap] = capacity_rate * horizon_hours
    c[col_z] = k_power * dt

    a_eq = lil_matrix((n + 1, n_cols))
    b_eq = np.zeros(n + 1)
    for t in range(n):
        # storage balance: charge with surplus, discharge to cover deficit
        a_eq[t, col_stored[t + 1]] = 1.0
        a_eq[t, col_stored[t]] = -1.0
        a_eq[t, col_z[t]] = -dt
        a_eq[t, col_curt[t]] = dt
        b_eq[t] = dt * (renew[t] - demand[t])
    a_eq[n, col_stored[0]] = 1.0  # periodic state of charge
    a_eq[n, col_stored[n]] = -1.0

    a_ub = lil_matrix((n + 1, n_cols))
    b_ub = np.zeros(n + 1)
    for g in range(n + 1):
        a_ub[g, col_stored[g]] = 1.0
        a_ub[g, col_cap] = -1.0

    bounds = [(0.0, None)] * n_cols
    for t in range(n):
        bounds[col_curt[t]] = (0.0, float(renew[t]))  # cannot curtail more than arrives

    result = linprog(
        c,
        A_ub=a_ub.tocsr(),
        b_ub=b_ub,
        A_eq=a_eq.tocsr(),
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if result.status != 0:
        raise SolverError(f"battery sizing failed (status {result.status}): "
                          f"{result.message}")

    stored = np.asarray(result.x[col_stored])
    capacity = float(result.x[col_cap])

    # canonicalize the degenerate z / curtailment split from the storage
    # trajectory: net draw after the battery determines both uniquely
    net = demand + (stored[1:] - stored[:-1]) / dt - renew
    z = np.maximum(0.0, net)
    curtailed = np.maximum(0.0, -net)
    consumed = renew - curtailed

    objective = float(
        capacity_rate * horizon_hours * capacity
        + k_power * dt * z.sum()
        + epsilon * dt * demand.sum()
    )
    return BessResult(
        capacity_kwh=capacity,
        stored_kwh=stored,
        nonrenewable_kw=z,
        curtailed_kw=curtailed,
        renewable_consumed_kw=consumed,
        objective=objective,
    )


def battery_ladder(
    profile: FixedLoadProfile,
    capacity_rate: float,
    k_powers: list[float],
    epsilon: float = 0.0,
) -> list[BessResult]:
    """Size the battery at each power price (carbon-tax ladder)."""
    return [size_battery(profile, capacity_rate, k, epsilon) for k in k_powers]
