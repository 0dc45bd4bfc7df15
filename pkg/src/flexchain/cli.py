"""Command-line interface.

Three subcommands, each reading a scenario directory and writing an
output directory of delimited files, JSON summaries, rendered figures,
and a run manifest::

    flexchain solve SCENARIO_DIR --out DIR [--tax T] [--clearing MODE]
    flexchain bess  SCENARIO_DIR --out DIR --taxes 0,50,250
    flexchain sweep SCENARIO_DIR --out DIR --grid GRID_TOML

Exit codes: 0 success, 1 infeasible or solver failure, 2 bad input.
Output files are deterministic for a given scenario and options; the
manifest's timestamp is informational only.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path as FilePath

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from flexchain import __version__, bess as bess_mod, kpi as kpi_mod, report
from flexchain.scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    scenario_hash,
)
from flexchain.solve import (
    PlanSolution,
    SolverConfig,
    SolveStatus,
    save_solution,
    solve_scenario,
)
from flexchain.sweep import (
    SweepSpec,
    run_sweep,
    write_sweep_csv,
    write_sweep_json,
)
from flexchain.model import validate_solution

logger = logging.getLogger("flexchain")

EXIT_OK = 0
EXIT_SOLVE_FAILED = 1
EXIT_BAD_INPUT = 2


class CliError(Exception):
    """Bad input reported to stderr without a traceback."""


class SolveFailure(Exception):
    """Solve did not reach optimality."""


def _write_manifest(out_dir: FilePath, command: str, scenario: Scenario,
                    options: dict, outputs: list[str]) -> None:
    manifest = {
        "tool": "flexchain",
        "version": __version__,
        "command": command,
        "scenario_hash": scenario_hash(scenario),
        "options": options,
        "outputs": sorted(outputs),
        "written_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(scenario_dir: str, clearing: str | None) -> Scenario:
    try:
        scenario = load_scenario(scenario_dir)
        if clearing:
            scenario = scenario.with_clearing(clearing)
        return scenario
    except ScenarioError as exc:
        raise CliError(f"scenario load failed: {exc}") from None


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(time_limit_s=args.time_limit)


def _solve_checked(scenario: Scenario, config: SolverConfig) -> PlanSolution:
    solution = solve_scenario(scenario, config)
    if solution.status is not SolveStatus.OPTIMAL:
        raise SolveFailure(f"solve ended with status {solution.status.value}")
    violations = validate_solution(scenario, solution)
    if violations:
        worst = max(violations, key=lambda v: v.magnitude)
        logger.warning("solution has %d residual violations, worst %s",
                       len(violations), worst)
    return solution


def cmd_solve(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario_dir, args.clearing)
    if args.tax is not None:
        scenario = scenario.with_carbon_tax(args.tax)
    out_dir = FilePath(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    solution = _solve_checked(scenario, _solver_config(args))
    save_solution(solution, out_dir)
    kpis = kpi_mod.build_report(solution, scenario)
    kpi_mod.write_report_json(kpis, out_dir / "kpis.json")
    kpi_mod.write_report_csv(kpis, out_dir / "kpis.csv")
    print(kpi_mod.format_report(kpis))

    outputs = ["states.csv", "flows.csv", "summary.json", "kpis.json", "kpis.csv"]
    if not args.no_figures:
        report.plot_cost_breakdown(kpis, out_dir / "cost_breakdown.png")
        report.plot_utilization(kpis, out_dir / "utilization.png")
        report.plot_energy_sources(kpis, out_dir / "energy_sources.png")
        report.plot_power_profile(solution, scenario, out_dir / "power_profile.png")
        outputs += ["cost_breakdown.png", "utilization.png", "energy_sources.png",
                    "power_profile.png"]
    _write_manifest(out_dir, "solve", scenario,
                    {"tax": args.tax, "clearing": scenario.demand_clearing},
                    outputs)
    return EXIT_OK


def cmd_bess(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario_dir, args.clearing)
    taxes = _parse_taxes(args.taxes)
    out_dir = FilePath(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _solver_config(args)

    # reference plan at zero power price fixes the load profile
    base = _solve_checked(scenario.with_carbon_tax(0.0), config)
    profile = bess_mod.derive_fixed_profile(base, scenario)

    rows = []
    for tax in taxes:
        taxed = scenario.with_carbon_tax(tax)
        flexible = _solve_checked(taxed, config)
        flex_pct, _ = kpi_mod.renewable_fractions(flexible, taxed)
        sized = bess_mod.size_battery(
            profile,
            capacity_rate=scenario.costs.k_battery,
            k_power=taxed.costs.k_power,
            epsilon=scenario.costs.epsilon,
        )
        rows.append({
            "tax_per_tonne": tax,
            "battery_kwh": sized.capacity_kwh,
            "bess_renewable_pct": sized.renewable_pct_of_demand,
            "flexible_renewable_pct": flex_pct,
            "bess_objective": sized.objective,
            "flexible_objective": flexible.objective,
        })

    with open(out_dir / "bess.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rows[0].keys())
        for row in rows:
            writer.writerow([repr(float(v)) for v in row.values()])
    with open(out_dir / "bess.json", "w") as fh:
        json.dump({"rows": rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    outputs = ["bess.csv", "bess.json"]
    if not args.no_figures:
        report.plot_bess_comparison(
            taxes,
            [r["flexible_renewable_pct"] for r in rows],
            [r["bess_renewable_pct"] for r in rows],
            [r["battery_kwh"] for r in rows],
            out_dir / "bess_comparison.png",
        )
        outputs.append("bess_comparison.png")
    _write_manifest(out_dir, "bess", scenario,
                    {"taxes": taxes, "clearing": scenario.demand_clearing}, outputs)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario_dir, None)
    spec = _load_grid(args.grid)
    out_dir = FilePath(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = run_sweep(scenario, spec, _solver_config(args), workers=args.workers)
    write_sweep_csv(result, out_dir / "sweep.csv")
    write_sweep_json(result, out_dir / "sweep.json")
    outputs = ["sweep.csv", "sweep.json"]
    if not args.no_figures:
        report.plot_sweep(result, out_dir / "sweep.png")
        outputs.append("sweep.png")
    _write_manifest(out_dir, "sweep", scenario, {
        "tax_points": list(spec.tax_points),
        "truck_cost_scales": list(spec.truck_cost_scales),
        "equip_cost_scales": list(spec.equip_cost_scales),
        "clearings": list(spec.clearings),
    }, outputs)

    failed = [c for c in result.cells if c.status != "optimal"]
    if failed:
        logger.error("%d of %d sweep cells failed", len(failed), len(result.cells))
        return EXIT_SOLVE_FAILED
    return EXIT_OK


def _parse_taxes(raw: str) -> list[float]:
    try:
        taxes = [float(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise CliError(f"bad tax list {raw!r}, expected e.g. 0,50,250") from None
    if not taxes:
        raise CliError("tax list is empty")
    if any(t < 0 for t in taxes):
        raise CliError("taxes must be non-negative")
    return taxes


def _load_grid(path: str) -> SweepSpec:
    grid_path = FilePath(path)
    if not grid_path.exists():
        raise CliError(f"grid file {path} does not exist")
    try:
        with open(grid_path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"grid file {path}: {exc}") from None
    if "tax_points" not in raw:
        raise CliError(f"grid file {path}: missing tax_points")
    try:
        return SweepSpec(
            tax_points=tuple(float(t) for t in raw["tax_points"]),
            truck_cost_scales=tuple(
                float(s) for s in raw.get("truck_cost_scales", [1.0])
            ),
            equip_cost_scales=tuple(
                float(s) for s in raw.get("equip_cost_scales", [1.0])
            ),
            clearings=tuple(str(c) for c in raw.get("clearings", [])),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"grid file {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexchain",
        description="Plan an electrified supply chain against renewable supply.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario_dir", help="scenario directory")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--time-limit", type=float, default=None,
                       help="solver time limit, seconds")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering")

    p_solve = sub.add_parser("solve", help="size and schedule one plan")
    common(p_solve)
    p_solve.add_argument("--tax", type=float, default=None,
                         help="carbon tax, $/tonne CO2 (overrides scenario price)")
    p_solve.add_argument("--clearing", default=None,
                         choices=("per-step", "weekly", "monthly"))
    p_solve.set_defaults(func=cmd_solve)

    p_bess = sub.add_parser(
        "bess", help="compare against a stationary battery on a tax ladder"
    )
    common(p_bess)
    p_bess.add_argument("--taxes", default="0,50,250",
                        help="comma-separated carbon taxes, $/tonne")
    p_bess.add_argument("--clearing", default=None,
                        choices=("per-step", "weekly", "monthly"))
    p_bess.set_defaults(func=cmd_bess)

    p_sweep = sub.add_parser("sweep", help="run a sensitivity grid")
    common(p_sweep)
    p_sweep.add_argument("--grid", required=True,
                         help="TOML grid spec (tax_points, cost scales, clearings)")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="parallel workers (default: FLEXCHAIN_WORKERS env "
                              "var, else 1)")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        logger.error("%s", exc)
        return EXIT_BAD_INPUT
    except SolveFailure as exc:
        logger.error("%s", exc)
        return EXIT_SOLVE_FAILED
    except Exception as exc:  # pragma: no cover - unexpected failure path
        logger.exception("unexpected failure: %s", exc)
        return EXIT_SOLVE_FAILED


if __name__ == "__main__":
    sys.exit(main())
