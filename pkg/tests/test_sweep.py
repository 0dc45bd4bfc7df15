"""Sweep grid mechanics: ordering, merging, failure capture, floors."""

import csv
import json

import numpy as np
import pytest

from conftest import make_scenario
from flexchain.sweep import (
    CSV_COLUMNS,
    CellKey,
    SweepSpec,
    _at_floor,
    default_workers,
    minimum_feasible_floor,
    run_sweep,
    write_sweep_csv,
    write_sweep_json,
)


@pytest.fixture(scope="module")
def small_base():
    return make_scenario(
        n_steps=4,
        step_hours=0.5,
        locations=("a", "b"),
        paths=(("a", "b", 3, 300.0, 150.0), ("b", "a", 3, 300.0, 150.0)),
        process_duration=2,
        process_power_kw=50.0,
        demand={("b", 3): -20000.0},
        raw={("a", 0): 20000.0},
        process_output_kg=20000.0,
        process_raw_kg=20000.0,
        wind_nameplate_kw=50.0,
        wind_cf={loc: np.ones(4) for loc in ("a", "b")},
    )


def test_grid_order_is_deterministic():
    spec = SweepSpec(
        tax_points=(0.0, 50.0),
        truck_cost_scales=(1.0, 2.0),
        clearings=("per-step", "weekly"),
    )
    cells = spec.cells("per-step")
    assert len(cells) == 8
    assert cells[0] == CellKey(1.0, 1.0, 0.0, "per-step")
    assert cells[1] == CellKey(1.0, 1.0, 50.0, "per-step")
    assert cells[2] == CellKey(1.0, 1.0, 0.0, "weekly")
    assert cells[4] == CellKey(2.0, 1.0, 0.0, "per-step")


def test_empty_clearings_keep_base_mode():
    spec = SweepSpec(tax_points=(0.0,))
    assert spec.cells("monthly") == [CellKey(1.0, 1.0, 0.0, "monthly")]


def test_sweep_solves_every_cell(small_base):
    spec = SweepSpec(tax_points=(0.0, 100.0), truck_cost_scales=(1.0, 100.0))
    result = run_sweep(small_base, spec)
    assert len(result.cells) == 4
    assert [c.key for c in result.cells] == spec.cells("per-step")
    assert all(c.status == "optimal" for c in result.cells)
    for cell in result.cells:
        assert np.isfinite(cell.objective)
        assert cell.fleet_size > 0.0
        assert 0.0 <= cell.renewable_pct <= 100.0
        assert cell.distance_km is not None and cell.distance_km > 0.0

    # taxes raise cost at fixed scales; dearer trucks raise cost at fixed tax
    by_key = {c.key: c for c in result.cells}
    assert (
        by_key[CellKey(1.0, 1.0, 100.0, "per-step")].objective
        >= by_key[CellKey(1.0, 1.0, 0.0, "per-step")].objective - 1e-9
    )
    assert (
        by_key[CellKey(100.0, 1.0, 0.0, "per-step")].objective
        > by_key[CellKey(1.0, 1.0, 0.0, "per-step")].objective
    )


def test_sweep_floor_tagging(small_base):
    spec = SweepSpec(tax_points=(0.0,), truck_cost_scales=(1.0, 100.0))
    result = run_sweep(small_base, spec)
    floors = result.floors["per-step"]
    assert floors["fleet"] > 0.0
    assert floors["equipment"] > 0.0
    # tags must agree with the recorded floors for every solved cell
    for cell in result.cells:
        assert cell.fleet_at_floor == _at_floor(cell.fleet_size, floors["fleet"])
        assert cell.equipment_at_floor == _at_floor(
            cell.equipment_units, floors["equipment"]
        )
        assert cell.fleet_size >= floors["fleet"] * (1 - 1e-6)
    # when trucks cost 100x, holding any slack fleet is indefensible
    dear = result.cell(CellKey(100.0, 1.0, 0.0, "per-step"))
    assert dear.fleet_at_floor


def test_minimum_floor_rejects_unknown_quantity(small_base):
    with pytest.raises(ValueError, match="unknown sized quantity"):
        minimum_feasible_floor(small_base, "warehouse")


def test_sweep_records_cell_failures(small_base):
    spec = SweepSpec(tax_points=(0.0, -5.0))
    result = run_sweep(small_base, spec)
    good, bad = result.cells
    assert good.status == "optimal"
    assert bad.status == "error"
    assert "non-negative" in bad.error
    assert np.isnan(bad.objective)


def test_sweep_records_infeasible_cells(tmp_path):
    stranded = make_scenario(
        locations=("a", "b"),
        demand={("b", 1): -150.0},
        raw={("a", 0): 150.0},
    )
    result = run_sweep(stranded, SweepSpec(tax_points=(0.0,)))
    assert result.cells[0].status == "infeasible"
    assert result.floors == {"per-step": {}}  # no feasible sizing exists

    write_sweep_csv(result, tmp_path / "sweep.csv")
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["status"] == "infeasible"
    assert rows[0]["objective"] == ""


def test_parallel_matches_serial(small_base, tmp_path):
    spec = SweepSpec(tax_points=(0.0, 100.0))
    serial = run_sweep(small_base, spec, workers=1)
    parallel = run_sweep(small_base, spec, workers=2)
    write_sweep_csv(serial, tmp_path / "serial.csv")
    write_sweep_csv(parallel, tmp_path / "parallel.csv")
    assert (tmp_path / "serial.csv").read_bytes() == (
        tmp_path / "parallel.csv"
    ).read_bytes()


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.delenv("FLEXCHAIN_WORKERS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("FLEXCHAIN_WORKERS", "6")
    assert default_workers() == 6
    monkeypatch.setenv("FLEXCHAIN_WORKERS", "zero?")
    assert default_workers() == 1
    monkeypatch.setenv("FLEXCHAIN_WORKERS", "-3")
    assert default_workers() == 1


def test_sweep_serialization(small_base, tmp_path):
    spec = SweepSpec(tax_points=(0.0, 100.0))
    result = run_sweep(small_base, spec)
    write_sweep_csv(result, tmp_path / "sweep.csv")
    write_sweep_json(result, tmp_path / "sweep.json")

    with open(tmp_path / "sweep.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert tuple(header) == CSV_COLUMNS
    assert len(rows) == 2
    booleans = {row[header.index("fleet_at_floor")] for row in rows}
    assert booleans <= {"true", "false"}

    payload = json.loads((tmp_path / "sweep.json").read_text())
    assert len(payload["cells"]) == 2
    assert payload["floors"]["per-step"]["fleet"] > 0.0
    first = payload["cells"][0]
    assert first["key"]["tax_per_tonne"] == 0.0
    assert first["status"] == "optimal"
    assert first["report"]["total_energy_kwh"] > 0.0
