"""LP solving, solution extraction, and a brute-force integer oracle.

The backend is scipy's bundled HiGHS interface: deterministic,
single-process, no external solver installation. ``solve`` works on any
LinearProgram; ``solve_scenario`` is the build-solve-extract-validate
pipeline most callers want.

The non-renewable share z is degenerate whenever its price is zero (any
value above the renewable deficit is optimal), so extraction
canonicalizes it to the exact per-step deficit implied by the power
draws. This never changes feasibility or the objective value and makes
downstream metrics (renewable fractions, tax monotonicity)
solver-independent.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import time
from dataclasses import dataclass, field
from itertools import product as cartesian
from pathlib import Path as FilePath

import numpy as np
from scipy.optimize import linprog

from flexchain import model as model_mod
from flexchain.model import (
    LinearProgram,
    ObjectiveBreakdown,
    VarKind,
    build_lp,
    path_key,
    process_key,
)
from flexchain.scenario import Scenario, scenario_hash


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"


class SolverError(RuntimeError):
    """Backend failed in a way that is not plain infeasibility."""


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "highs"
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    time_limit_s: float | None = None


DEFAULT_CONFIG = SolverConfig()


@dataclass
class PlanSolution:
    """Extracted planning solution.

    State arrays have ``n_steps + 1`` entries (grid points), flow arrays
    ``n_steps``. ``meta`` records enough provenance to reproduce the
    run: scenario hash, power price, demand clearing, backend.
    """

    status: SolveStatus
    objective: float
    charge: dict[str, np.ndarray]
    parked: dict[str, np.ndarray]
    product: dict[str, np.ndarray]
    raw: dict[str, np.ndarray]
    power: dict[str, np.ndarray]
    nonrenewable: np.ndarray
    loaded: dict[tuple[str, str], np.ndarray]
    empty: dict[tuple[str, str], np.ndarray]
    process_starts: dict[tuple[str, str], np.ndarray]
    fleet_size: float
    warehouse: dict[str, float]
    equipment: dict[tuple[str, str], float]
    breakdown: ObjectiveBreakdown | None = None
    meta: dict = field(default_factory=dict)

    def total_power(self) -> np.ndarray:
        return sum(self.power.values()) if self.power else np.zeros(0)

    def total_energy_kwh(self) -> float:
        dt = float(self.meta.get("step_hours", 1.0))
        return float(self.total_power().sum()) * dt


def _linprog_options(config: SolverConfig) -> dict:
    options = {
        "presolve": True,
        "primal_feasibility_tolerance": config.feasibility_tol,
        "dual_feasibility_tolerance": config.optimality_tol,
    }
    if config.time_limit_s is not None:
        options["time_limit"] = config.time_limit_s
    return options


def _run_backend(lp: LinearProgram, config: SolverConfig):
    if config.backend != "highs":
        raise SolverError(f"unknown backend {config.backend!r}")
    c, a_ub, b_ub, a_eq, b_eq, bounds = lp.to_scipy()
    result = linprog(
        c,
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
        options=_linprog_options(config),
    )
    return result


def _canonical_nonrenewable(lp: LinearProgram, x: np.ndarray) -> np.ndarray:
    """Snap z to the per-step renewable deficit using the LP's own rows.

    Each power-balance row reads sum(p) - z <= available; the canonical
    z is max(0, sum(p) - available), the smallest feasible value.
    """
    z_cols = lp.index.cols(VarKind.NONRENEWABLE)
    for row in lp.rows_tagged("power_balance["):
        tag = lp.row_tags[row]
        step = int(tag[tag.rindex("[") + 1 : -1])
        coeffs = lp.row_coefficients(row)
        draw = sum(v * x[c] for c, v in coeffs.items() if c != z_cols[step])
        x[z_cols[step]] = max(0.0, draw - lp.rhs[row])
    return x


def solve(lp: LinearProgram, config: SolverConfig = DEFAULT_CONFIG) -> "RawSolution":
    """Solve a LinearProgram; return status, column values, objective."""
    started = time.monotonic()
    result = _run_backend(lp, config)
    elapsed = time.monotonic() - started
    if result.status == 0:
        x = np.asarray(result.x, dtype=float)
        x = _canonical_nonrenewable(lp, x)
        return RawSolution(
            status=SolveStatus.OPTIMAL,
            x=x,
            objective=float(lp.objective @ x),
            solve_seconds=elapsed,
        )
    if result.status == 2:
        return RawSolution(SolveStatus.INFEASIBLE, None, float("nan"), elapsed)
    if result.status == 1 or "time limit" in str(result.message).lower():
        return RawSolution(SolveStatus.TIME_LIMIT, None, float("nan"), elapsed)
    raise SolverError(f"backend failed (status {result.status}): {result.message}")


@dataclass
class RawSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float
    solve_seconds: float


def _series(index, kind: VarKind, entity: str, x: np.ndarray) -> np.ndarray:
    return x[index.cols(kind, entity)]


def extract_solution(
    scenario: Scenario, lp: LinearProgram, raw: RawSolution
) -> PlanSolution:
    """Unpack a solved column vector into named trajectories."""
    if raw.status is not SolveStatus.OPTIMAL or raw.x is None:
        return PlanSolution(
            status=raw.status, objective=raw.objective,
            charge={}, parked={}, product={}, raw={}, power={},
            nonrenewable=np.zeros(0), loaded={}, empty={}, process_starts={},
            fleet_size=0.0, warehouse={}, equipment={},
            meta=_solution_meta(scenario, raw),
        )
    index = lp.index
    x = raw.x
    has_trucks = bool(scenario.paths)
    n = scenario.horizon.n_steps
    dt = scenario.horizon.step_hours

    charge = {}
    parked = {}
    product = {}
    raw_stock = {}
    power = {}
    for loc_id in scenario.location_ids:
        charge[loc_id] = _series(index, VarKind.CHARGE, loc_id, x)
        product[loc_id] = _series(index, VarKind.PRODUCT, loc_id, x)
        raw_stock[loc_id] = _series(index, VarKind.RAW, loc_id, x)
        power[loc_id] = _series(index, VarKind.POWER, loc_id, x)
        if has_trucks:
            parked[loc_id] = _series(index, VarKind.PARKED, loc_id, x)
    loaded = {}
    empty = {}
    for p in scenario.paths:
        pk = path_key(p.origin, p.dest)
        loaded[p.key] = _series(index, VarKind.LOADED, pk, x)
        empty[p.key] = _series(index, VarKind.EMPTY, pk, x)
    starts = {}
    equipment = {}
    for proc in scenario.processes:
        for loc_id in scenario.location_ids:
            sk = process_key(proc.id, loc_id)
            starts[(proc.id, loc_id)] = _series(index, VarKind.PROCESS, sk, x)
            equipment[(proc.id, loc_id)] = float(x[index.col(VarKind.EQUIPMENT, sk)])
    fleet = float(x[index.col(VarKind.FLEET)]) if has_trucks else 0.0
    warehouse = {
        loc_id: float(x[index.col(VarKind.WAREHOUSE, loc_id)])
        for loc_id in scenario.location_ids
    }
    nonrenewable = x[index.cols(VarKind.NONRENEWABLE)]

    costs = scenario.costs
    breakdown = ObjectiveBreakdown(
        truck_capex=scenario.horizon.hours * costs.k_truck * fleet,
        warehouse_capex=scenario.horizon.hours
        * sum(costs.k_store[i] * warehouse[i] for i in scenario.location_ids),
        equipment_capex=scenario.horizon.hours
        * sum(
            costs.k_equip[pid] * units for (pid, _), units in equipment.items()
        ),
        nonrenewable_cost=costs.k_power * dt * float(nonrenewable.sum()),
        base_energy_cost=costs.epsilon * dt
        * float(sum(p.sum() for p in power.values())),
    )

    return PlanSolution(
        status=raw.status,
        objective=raw.objective,
        charge=charge,
        parked=parked,
        product=product,
        raw=raw_stock,
        power=power,
        nonrenewable=nonrenewable,
        loaded=loaded,
        empty=empty,
        process_starts=starts,
        fleet_size=fleet,
        warehouse=warehouse,
        equipment=equipment,
        breakdown=breakdown,
        meta=_solution_meta(scenario, raw),
    )


def _solution_meta(scenario: Scenario, raw: RawSolution) -> dict:
    return {
        "scenario_hash": scenario_hash(scenario),
        "k_power": scenario.costs.k_power,
        "epsilon": scenario.costs.epsilon,
        "demand_clearing": scenario.demand_clearing,
        "n_steps": scenario.horizon.n_steps,
        "step_hours": scenario.horizon.step_hours,
        "backend": "highs",
        "solve_seconds": raw.solve_seconds,
    }


def solve_scenario(
    scenario: Scenario, config: SolverConfig = DEFAULT_CONFIG
) -> PlanSolution:
    """Build, solve, and extract the planning LP for a scenario."""
    lp = build_lp(scenario)
    raw = solve(lp, config)
    return extract_solution(scenario, lp, raw)


# ---------------------------------------------------------------------------
# solution serialization


def save_solution(solution: PlanSolution, directory: str | FilePath) -> None:
    """Write a solution as delimited series files plus a JSON summary."""
    directory = FilePath(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def write_series(name: str, rows) -> None:
        with open(directory / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entity", "step", "value"])
            for entity, series in rows:
                for step, value in enumerate(series):
                    writer.writerow([entity, str(step), repr(float(value))])

    write_series("states.csv", [
        (f"{kind}:{loc}", series)
        for kind, table in (("charge", solution.charge), ("parked", solution.parked),
                            ("product", solution.product), ("raw", solution.raw))
        for loc, series in sorted(table.items())
    ])
    write_series("flows.csv", [
        (f"power:{loc}", series) for loc, series in sorted(solution.power.items())
    ] + [("nonrenewable:grid", solution.nonrenewable)] + [
        (f"{kind}:{o}>{d}", series)
        for kind, table in (("loaded", solution.loaded), ("empty", solution.empty))
        for (o, d), series in sorted(table.items())
    ] + [
        (f"process:{pid}@{loc}", series)
        for (pid, loc), series in sorted(solution.process_starts.items())
    ])

    summary = {
        "status": solution.status.value,
        "objective": solution.objective,
        "fleet_size": solution.fleet_size,
        "warehouse": dict(sorted(solution.warehouse.items())),
        "equipment": {
            f"{pid}@{loc}": units
            for (pid, loc), units in sorted(solution.equipment.items())
        },
        "breakdown": solution.breakdown.as_dict() if solution.breakdown else None,
        "meta": {k: v for k, v in solution.meta.items() if k != "solve_seconds"},
    }
    with open(directory / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_solution(directory: str | FilePath) -> PlanSolution:
    """Read back a solution directory written by save_solution."""
    directory = FilePath(directory)
    with open(directory / "summary.json") as fh:
        summary = json.load(fh)

    def read_series(name: str) -> dict[str, np.ndarray]:
        table: dict[str, list[float]] = {}
        with open(directory / name, newline="") as fh:
            for row in csv.DictReader(fh):
                table.setdefault(row["entity"], []).append(float(row["value"]))
        return {entity: np.array(values) for entity, values in table.items()}

    states = read_series("states.csv")
    flows = read_series("flows.csv")

    def by_prefix(table: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
        return {
            entity.split(":", 1)[1]: series
            for entity, series in table.items()
            if entity.startswith(prefix + ":")
        }

    def path_keyed(table: dict[str, np.ndarray]) -> dict[tuple[str, str], np.ndarray]:
        return {tuple(k.split(">")): v for k, v in table.items()}

    breakdown = None
    if summary.get("breakdown"):
        raw = summary["breakdown"]
        breakdown = ObjectiveBreakdown(
            truck_capex=raw["truck_capex"],
            warehouse_capex=raw["warehouse_capex"],
            equipment_capex=raw["equipment_capex"],
            nonrenewable_cost=raw["nonrenewable_cost"],
            base_energy_cost=raw["base_energy_cost"],
        )
    return PlanSolution(
        status=SolveStatus(summary["status"]),
        objective=summary["objective"],
        charge=by_prefix(states, "charge"),
        parked=by_prefix(states, "parked"),
        product=by_prefix(states, "product"),
        raw=by_prefix(states, "raw"),
        power=by_prefix(flows, "power"),
        nonrenewable=flows.get("nonrenewable:grid", np.zeros(0)),
        loaded=path_keyed(by_prefix(flows, "loaded")),
        empty=path_keyed(by_prefix(flows, "empty")),
        process_starts={
            tuple(k.split("@")): v for k, v in by_prefix(flows, "process").items()
        },
        fleet_size=summary["fleet_size"],
        warehouse=summary["warehouse"],
        equipment={
            tuple(k.split("@")): v for k, v in summary["equipment"].items()
        },
        breakdown=breakdown,
        meta=summary.get("meta", {}),
    )


# ---------------------------------------------------------------------------
# integer oracle


class OracleTooLarge(ValueError):
    """Instance exceeds the oracle's enumeration caps."""


#: Hard caps keeping full enumeration tractable.
ORACLE_MAX_LOCATIONS = 2
ORACLE_MAX_STEPS = 8
ORACLE_MAX_FLEET = 3
ORACLE_MAX_SCHEDULES = 2_000_000
ORACLE_MAX_LP_SOLVES = 40_000


def oracle_enumerate(
    scenario: Scenario,
    fleet_bound: int = ORACLE_MAX_FLEET,
    config: SolverConfig = DEFAULT_CONFIG,
) -> float:
    """Optimal objective with integral trucks, by exhaustive enumeration.

    Enumerates every integer dispatch schedule (loaded and empty counts
    per path and step, summing to at most ``fleet_bound`` per cell),
    every integer initial parked-truck placement and fleet size, prunes
    schedules that cannot conserve trucks, and solves the remaining LP
    (manufacturing, storage, power) with the truck columns fixed. The
    minimum over all candidates is the exact mixed-integer optimum,
    which upper-bounds the LP relaxation.

    Deliberately exponential; raises OracleTooLarge beyond desk size.
    """
    n = scenario.horizon.n_steps
    if len(scenario.locations) > ORACLE_MAX_LOCATIONS:
        raise OracleTooLarge(
            f"oracle handles at most {ORACLE_MAX_LOCATIONS} locations, "
            f"got {len(scenario.locations)}"
        )
    if n > ORACLE_MAX_STEPS:
        raise OracleTooLarge(
            f"oracle handles at most {ORACLE_MAX_STEPS} steps, got {n}"
        )
    if fleet_bound > ORACLE_MAX_FLEET:
        raise OracleTooLarge(
            f"oracle handles fleet bounds up to {ORACLE_MAX_FLEET}, got {fleet_bound}"
        )

    lp = build_lp(scenario)
    if not scenario.paths:
        raw = solve(lp, config)
        if raw.status is not SolveStatus.OPTIMAL:
            raise SolverError(f"oracle subproblem not optimal: {raw.status}")
        return raw.objective

    index = lp.index
    paths = scenario.paths
    cells = [(p, t) for p in paths for t in range(n)]
    # per-cell integer choices: loaded + empty dispatches, at most fleet_bound trucks
    choices = [
        (y, ye)
        for y in range(fleet_bound + 1)
        for ye in range(fleet_bound + 1)
        if y + ye <= fleet_bound
    ]
    n_schedules = len(choices) ** len(cells)
    if n_schedules > ORACLE_MAX_SCHEDULES:
        raise OracleTooLarge(
            f"{n_schedules} dispatch schedules exceed cap {ORACLE_MAX_SCHEDULES}"
        )

    loc_ids = scenario.location_ids
    best = float("inf")
    lp_solves = 0

    lower = lp.lower.copy()
    upper = lp.upper.copy()

    for assignment in cartesian(choices, repeat=len(cells)):
        dispatch = {p.key: np.zeros(n) for p in paths}
        dispatch_empty = {p.key: np.zeros(n) for p in paths}
        for (p, t), (y, ye) in zip(cells, assignment):
            dispatch[p.key][t] = y
            dispatch_empty[p.key][t] = ye

        # net truck flow per location and step: arrivals - departures
        net = {loc: np.zeros(n) for loc in loc_ids}
        for p in paths:
            total = dispatch[p.key] + dispatch_empty[p.key]
            net[p.origin] -= total
            net[p.dest] += np.roll(total, p.travel_steps)

        # minimal initial parked count keeping Y >= 0 through the cycle
        y0_min = {}
        feasible = True
        for loc in loc_ids:
            trajectory = np.cumsum(net[loc])
            y0_min[loc] = int(round(max(0.0, -trajectory.min())))
            if trajectory[-1] != 0:
                feasible = False  # net drift breaks the periodic closure
                break
        if not feasible:
            continue
        if sum(y0_min.values()) > fleet_bound:
            continue
        in_transit = model_mod.transit_occupancy(scenario, dispatch, dispatch_empty)
        if in_transit.max() > fleet_bound:
            continue

        y0_options = [
            range(y0_min[loc], fleet_bound + 1) for loc in loc_ids
        ]
        for y0 in cartesian(*y0_options):
            parked = {
                loc: np.concatenate([[y0[i]], y0[i] + np.cumsum(net[loc])])
                for i, loc in enumerate(loc_ids)
            }
            occupancy = in_transit + sum(parked[loc][1:] for loc in loc_ids)
            fleet_needed = int(round(occupancy.max())) if n else 0
            if fleet_needed > fleet_bound:
                continue

            lo = lower.copy()
            hi = upper.copy()
            for p in paths:
                pk = path_key(p.origin, p.dest)
                for t in range(n):
                    for kind, value in ((VarKind.LOADED, dispatch[p.key][t]),
                                        (VarKind.EMPTY, dispatch_empty[p.key][t])):
                        col = index.col(kind, pk, t)
                        lo[col] = hi[col] = value
            for i, loc in enumerate(loc_ids):
                col = index.col(VarKind.PARKED, loc, 0)
                lo[col] = hi[col] = float(y0[i])
            col = index.col(VarKind.FLEET)
            lo[col] = hi[col] = float(fleet_needed)

            lp_solves += 1
            if lp_solves > ORACLE_MAX_LP_SOLVES:
                raise OracleTooLarge(
                    f"oracle exceeded {ORACLE_MAX_LP_SOLVES} LP solves"
                )
            fixed = dataclasses.replace(lp, lower=lo, upper=hi)
            raw = solve(fixed, config)
            if raw.status is SolveStatus.OPTIMAL and raw.objective < best:
                best = raw.objective

    if not np.isfinite(best):
        raise SolverError("oracle found no feasible integer schedule")
    return best
