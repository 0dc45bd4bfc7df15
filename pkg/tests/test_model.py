"""LP assembly and solution-validation checks.

The hand instance used throughout: two locations a/b joined by a path
pair (3 steps, 300 kWh each way), four half-hour steps, one process of
2-step duration at 50 kW. Every expected row below was expanded by hand
from those numbers.
"""

import copy

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from flexchain.model import (
    InfeasibleScenarioError,
    VarKind,
    build_lp,
    cyclic_window_sum,
    empty_truck_energy,
    transit_occupancy,
    validate_solution,
)
from flexchain.scenario import Path
from flexchain.solve import PlanSolution, SolveStatus, solve_scenario


def hand_scenario(**overrides):
    defaults = dict(
        n_steps=4,
        step_hours=0.5,
        locations=("a", "b"),
        paths=(("a", "b", 3, 300.0), ("b", "a", 3, 300.0)),
        process_duration=2,
        process_power_kw=50.0,
    )
    defaults.update(overrides)
    return make_scenario(**defaults)


@pytest.fixture(scope="module")
def hand_lp():
    return build_lp(hand_scenario())


@pytest.fixture(scope="module")
def shipped_solution():
    """Hand instance with one truckload to move: raw at a, demand at b."""
    scn = hand_scenario(
        demand={("b", 3): -20000.0},
        raw={("a", 0): 20000.0},
        process_output_kg=20000.0,
        process_raw_kg=20000.0,
        wind_nameplate_kw=50.0,
        wind_cf={loc: np.ones(4) for loc in ("a", "b")},
    )
    sol = solve_scenario(scn)
    assert sol.status is SolveStatus.OPTIMAL
    return scn, sol


def row(lp, tag):
    i = lp.row_tags.index(tag)
    return lp.row_coefficients(i), str(lp.senses[i]), float(lp.rhs[i])


# -- dimensions and bounds -----------------------------------------------------


def test_hand_instance_dimensions(hand_lp):
    # 2 locations x (4 state series on 5 grid points + 4 power steps)
    # + 4 z + 2 paths x 8 dispatches + 2x4 process starts + 1 + 2 + 2 sizing
    assert hand_lp.n_cols == 81
    # 40 balances/rates + 16 caps + 6 closures + 4 fleet + 8 equip + 4 power
    assert hand_lp.n_rows == 78
    assert len(set(hand_lp.row_tags)) == hand_lp.n_rows
    assert set(hand_lp.senses) == {"=", "<"}


def test_raw_stock_starts_empty(hand_lp):
    index = hand_lp.index
    for loc in ("a", "b"):
        raw_cols = index.cols(VarKind.RAW, loc)
        assert hand_lp.upper[raw_cols[0]] == 0.0
        assert np.all(np.isinf(hand_lp.upper[raw_cols[1:]]))
    assert np.all(hand_lp.lower == 0.0)


def test_variable_naming_round_trip(hand_lp):
    index = hand_lp.index
    col = index.col(VarKind.LOADED, "a>b", 2)
    assert index.key_of(col).name() == "loaded[a>b][2]"
    assert index.key_of(index.col(VarKind.FLEET)).name() == "fleet"


def test_no_paths_drops_truck_columns():
    lp = build_lp(make_scenario())
    kinds = {key.kind for key in lp.index.keys}
    assert VarKind.PARKED not in kinds
    assert VarKind.LOADED not in kinds
    assert VarKind.EMPTY not in kinds
    assert VarKind.FLEET not in kinds
    assert not lp.rows_tagged("truck_balance")
    assert not lp.rows_tagged("fleet_cap")


# -- objective coefficients ----------------------------------------------------


def test_objective_coefficients(hand_lp):
    index = hand_lp.index
    c = hand_lp.objective
    horizon_hours = 2.0
    assert c[index.col(VarKind.FLEET)] == pytest.approx(horizon_hours * 0.2)
    for loc in ("a", "b"):
        assert c[index.col(VarKind.WAREHOUSE, loc)] == pytest.approx(
            horizon_hours * 1e-4
        )
        assert c[index.col(VarKind.EQUIPMENT, f"kiln@{loc}")] == pytest.approx(
            horizon_hours * 0.5
        )
        for t in range(4):
            assert c[index.col(VarKind.POWER, loc, t)] == pytest.approx(0.001 * 0.5)
    for t in range(4):
        assert c[index.col(VarKind.NONRENEWABLE, "", t)] == pytest.approx(0.02 * 0.5)
    # state, dispatch, and process columns carry no direct cost
    for kind in (VarKind.CHARGE, VarKind.PRODUCT, VarKind.RAW, VarKind.PARKED):
        for loc in ("a", "b"):
            assert np.all(c[index.cols(kind, loc)] == 0.0)
    assert np.all(c[index.cols(VarKind.LOADED, "a>b")] == 0.0)
    assert np.all(c[index.cols(VarKind.PROCESS, "kiln@a")] == 0.0)


# -- hand-expanded rows --------------------------------------------------------


def test_charge_balance_row(hand_lp):
    # dt=0.5 so each of the two active process lags draws 25 kWh; the
    # empty run on a 300 kWh path at 10t/30t weight ratio costs 100 kWh
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "charge_balance[a][0]")
    assert sense == "=" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.CHARGE, "a", 1): 1.0,
        index.col(VarKind.CHARGE, "a", 0): -1.0,
        index.col(VarKind.POWER, "a", 0): -0.5,
        index.col(VarKind.PROCESS, "kiln@a", 0): 25.0,
        index.col(VarKind.PROCESS, "kiln@a", 3): 25.0,
        index.col(VarKind.LOADED, "a>b", 0): 300.0,
        index.col(VarKind.EMPTY, "a>b", 0): 100.0,
    }


def test_truck_balance_row(hand_lp):
    # departures at step 1; arrivals are dispatches from b three steps
    # earlier, wrapping to step 2 of the previous cycle
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "truck_balance[a][1]")
    assert sense == "=" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.PARKED, "a", 2): 1.0,
        index.col(VarKind.PARKED, "a", 1): -1.0,
        index.col(VarKind.LOADED, "a>b", 1): 1.0,
        index.col(VarKind.EMPTY, "a>b", 1): 1.0,
        index.col(VarKind.LOADED, "b>a", 2): -1.0,
        index.col(VarKind.EMPTY, "b>a", 2): -1.0,
    }


def test_product_balance_row(hand_lp):
    # a 2-step process start finishes two steps later: step 2 starts
    # deliver into the step-0 balance of the next cycle
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "product_balance[b][0]")
    assert sense == "=" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.PRODUCT, "b", 1): 1.0,
        index.col(VarKind.PRODUCT, "b", 0): -1.0,
        index.col(VarKind.LOADED, "b>a", 0): 20000.0,
        index.col(VarKind.LOADED, "a>b", 1): -20000.0,
        index.col(VarKind.PROCESS, "kiln@b", 2): -100.0,
    }


def test_raw_balance_row(hand_lp):
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "raw_balance[a][2]")
    assert sense == "=" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.RAW, "a", 3): 1.0,
        index.col(VarKind.RAW, "a", 2): -1.0,
        index.col(VarKind.PROCESS, "kiln@a", 2): 100.0,
    }


def test_charge_rate_row(hand_lp):
    # half an hour at 900 kWh / 2 h per parked truck allows 225 kWh
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "charge_rate[a][1]")
    assert sense == "<" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.CHARGE, "a", 2): 1.0,
        index.col(VarKind.CHARGE, "a", 1): -1.0,
        index.col(VarKind.PARKED, "a", 1): -225.0,
    }


def test_fleet_cap_row(hand_lp):
    # at grid point 2 a 3-step trip is still under way if dispatched at
    # steps 1, 0, or 3 (the last from the previous cycle)
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "fleet_cap[2]")
    assert sense == "<" and rhs == 0.0
    expected = {
        index.col(VarKind.FLEET): -1.0,
        index.col(VarKind.PARKED, "a", 2): 1.0,
        index.col(VarKind.PARKED, "b", 2): 1.0,
    }
    for pk in ("a>b", "b>a"):
        for kind in (VarKind.LOADED, VarKind.EMPTY):
            for t in (1, 0, 3):
                expected[index.col(kind, pk, t)] = 1.0
    assert coeffs == expected


def test_equipment_occupancy_row(hand_lp):
    # a 2-step batch holds its equipment for 3 grid slots: start, run, unload
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "equip_cap[kiln@a][0]")
    assert sense == "<" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.EQUIPMENT, "kiln@a"): -1.0,
        index.col(VarKind.PROCESS, "kiln@a", 0): 1.0,
        index.col(VarKind.PROCESS, "kiln@a", 3): 1.0,
        index.col(VarKind.PROCESS, "kiln@a", 2): 1.0,
    }


def test_power_balance_row(hand_lp):
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "power_balance[1]")
    assert sense == "<" and rhs == 0.0  # no renewables in the bare instance
    assert coeffs == {
        index.col(VarKind.POWER, "a", 1): 1.0,
        index.col(VarKind.POWER, "b", 1): 1.0,
        index.col(VarKind.NONRENEWABLE, "", 1): -1.0,
    }


def test_periodic_rows(hand_lp):
    index = hand_lp.index
    coeffs, sense, rhs = row(hand_lp, "product_periodic[a]")
    assert sense == "=" and rhs == 0.0
    assert coeffs == {
        index.col(VarKind.PRODUCT, "a", 0): 1.0,
        index.col(VarKind.PRODUCT, "a", 4): -1.0,
    }


def test_renewables_enter_power_balance_rhs():
    scn = hand_scenario(
        wind_nameplate_kw=40.0,
        wind_cf={loc: np.array([1.0, 0.5, 0.0, 0.25]) for loc in ("a", "b")},
    )
    lp = build_lp(scn)
    _, _, rhs = row(lp, "power_balance[0]")
    assert rhs == pytest.approx(80.0)
    _, _, rhs = row(lp, "power_balance[3]")
    assert rhs == pytest.approx(20.0)


# -- helper functions ----------------------------------------------------------


def test_empty_truck_energy():
    path = Path("a", "b", 3, 300.0)
    assert empty_truck_energy(path, 1.0 / 3.0) == pytest.approx(100.0)
    assert empty_truck_energy(path, 0.0) == 0.0
    with pytest.raises(ValueError):
        empty_truck_energy(path, 1.5)


def test_cyclic_window_sum_hand_case():
    series = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(
        cyclic_window_sum(series, 2), [5.0, 3.0, 5.0, 7.0]
    )
    np.testing.assert_allclose(cyclic_window_sum(series, 1), series)


@given(
    values=st.lists(st.floats(-100.0, 100.0), min_size=1, max_size=24),
    window=st.integers(1, 24),
)
def test_cyclic_window_sum_mass(values, window):
    series = np.array(values)
    window = min(window, len(series))
    out = cyclic_window_sum(series, window)
    # each entry is counted in exactly `window` positions around the cycle
    assert out.sum() == pytest.approx(window * series.sum(), rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(
        cyclic_window_sum(series, len(series)),
        np.full(len(series), series.sum()),
        atol=1e-9,
    )


def test_transit_occupancy_single_dispatch():
    scn = hand_scenario()
    loaded = {("a", "b"): np.array([1.0, 0, 0, 0]), ("b", "a"): np.zeros(4)}
    empty = {key: np.zeros(4) for key in loaded}
    # dispatched at step 0 on a 3-step path: on the road at grid points 1..3
    np.testing.assert_allclose(
        transit_occupancy(scn, loaded, empty), [1.0, 1.0, 1.0, 0.0]
    )


# -- structural feasibility precheck -------------------------------------------


def test_build_rejects_demand_beyond_raw():
    scn = make_scenario(
        demand={("site", 0): -500.0}, raw={("site", 1): 100.0}, validate=False
    )
    with pytest.raises(InfeasibleScenarioError, match="raw arrivals"):
        build_lp(scn)


def test_build_rejects_net_positive_injection():
    scn = make_scenario(demand={("site", 0): 50.0}, validate=False)
    with pytest.raises(InfeasibleScenarioError, match="cannot absorb"):
        build_lp(scn)


# -- solved-plan invariants ----------------------------------------------------


def test_solved_plan_validates_clean(shipped_solution):
    scn, sol = shipped_solution
    assert validate_solution(scn, sol) == []


def test_solved_plan_mass_closure(shipped_solution):
    scn, sol = shipped_solution
    produced = sum(
        proc.output_kg * sol.process_starts[(proc.id, loc)].sum()
        for proc in scn.processes
        for loc in scn.location_ids
    )
    withdrawn = -sum(s.sum() for s in scn.exogenous.product_injection.values())
    assert produced == pytest.approx(withdrawn, rel=1e-6)


def test_solved_plan_canonical_deficit(shipped_solution):
    scn, sol = shipped_solution
    draw = sol.total_power()
    avail = scn.total_renewable_kw()
    np.testing.assert_allclose(
        sol.nonrenewable, np.maximum(0.0, draw - avail), atol=1e-9
    )
    # equivalent statement: consumed renewables are min(draw, available)
    np.testing.assert_allclose(
        draw - sol.nonrenewable, np.minimum(draw, avail), atol=1e-9
    )


def test_solved_plan_objective_matches_breakdown(shipped_solution):
    _, sol = shipped_solution
    assert sol.breakdown is not None
    assert sol.breakdown.total == pytest.approx(sol.objective, rel=1e-9)


def test_solved_plan_fleet_covers_transit(shipped_solution):
    scn, sol = shipped_solution
    in_transit = transit_occupancy(scn, sol.loaded, sol.empty)
    parked = sum(sol.parked[loc][1:] for loc in scn.location_ids)
    assert np.all(in_transit + parked <= sol.fleet_size + 1e-6)
    # a 3-step trip each way on a 4-step cycle needs more than one truck
    assert sol.fleet_size > 1.0


def test_objective_scales_with_throughput():
    def solved(scale):
        scn = hand_scenario(
            demand={("b", 3): -20000.0 * scale},
            raw={("a", 0): 20000.0 * scale},
            process_output_kg=20000.0,
            process_raw_kg=20000.0,
        )
        sol = solve_scenario(scn)
        assert sol.status is SolveStatus.OPTIMAL
        return sol.objective

    base = solved(1.0)
    assert solved(3.0) == pytest.approx(3.0 * base, rel=1e-6)


# -- validator catches broken plans --------------------------------------------


def test_validator_flags_perturbed_charge(shipped_solution):
    scn, sol = shipped_solution
    broken = copy.deepcopy(sol)
    broken.charge["a"][2] += 1.0
    tags = {v.tag for v in validate_solution(scn, broken)}
    assert "charge_balance[a][1]" in tags
    assert "charge_balance[a][2]" in tags
    assert all(tag.startswith("charge_") for tag in tags)


def test_validator_flags_idle_plan():
    scn = make_scenario(
        n_steps=4,
        demand={("site", 3): -200.0},
        raw={("site", 0): 200.0},
    )
    idle = PlanSolution(
        status=SolveStatus.OPTIMAL,
        objective=0.0,
        charge={"site": np.zeros(5)},
        parked={},
        product={"site": np.zeros(5)},
        raw={"site": np.zeros(5)},
        power={"site": np.zeros(4)},
        nonrenewable=np.zeros(4),
        loaded={},
        empty={},
        process_starts={("kiln", "site"): np.zeros(4)},
        fleet_size=0.0,
        warehouse={"site": 0.0},
        equipment={("kiln", "site"): 0.0},
    )
    tags = {v.tag for v in validate_solution(scn, idle)}
    assert "product_balance[site][3]" in tags
    assert "raw_balance[site][0]" in tags
