#!/usr/bin/env python3
"""
Build and check continuous Morse energy functions of flows on the circle,
the torus and the sphere.

Each command writes its own artifacts; `all` runs every stage in order.

Usage:
  python -m energyforge analyze --spec sphere_north_south --out out/   # chain recurrence
  python -m energyforge order --spec sphere_north_south --out out/     # fixed points and Smale order
  python -m energyforge build --spec sphere_north_south --out out/     # energy function
  python -m energyforge verify --spec sphere_north_south --out out/    # numerical checks of out/energy_grid.csv
  python -m energyforge plot --spec sphere_north_south --out out/      # energy.svg
  python -m energyforge all --spec sphere_north_south --out out/

Exit codes: 0 success, 1 verification failed, 2 invalid spec or missing
file, 3 integration failure, 4 flow outside the admissible class,
5 construction failure (the message names the stage).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from energyforge import constants
from energyforge.cli import artifacts
from energyforge.cli.pipeline import PipelineRun
from energyforge.cli.plotting import plot_energy
from energyforge.config import RunConfig
from energyforge.energy_builder.field import write_energy_grid
from energyforge.energy_builder.grid import make_grid
from energyforge.energy_builder.stages import build_energy
from energyforge.errors import (
    EnergyForgeError,
    HyperbolicityError,
    IntegrationError,
    OrderingError,
    ScaffoldError,
    SpecError,
)
from energyforge.settings import Settings
from energyforge.verify.report import run_checks
from energyforge.verify.self_test import self_test

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_SPEC = 2
EXIT_INTEGRATION = 3
EXIT_NOT_ADMISSIBLE = 4
EXIT_SCAFFOLD = 5


def _banner(title: str) -> None:
    print(f"\n{'=' * 60}")
    print(title)
    print(f"{'=' * 60}")


def _wrote(path: Path) -> None:
    print(f"Wrote {path}")


def _grid_rows(path: Path) -> int:
    with open(path, newline="") as f:
        return max(sum(1 for _ in csv.reader(f)) - 1, 0)


# ── Commands ────────────────────────────────────────────────────


def cmd_analyze(run: PipelineRun) -> int:
    _banner(f"Chain recurrence: {run.spec.name}")
    analysis = run.analysis
    report = artifacts.chain_report(run.spec.name, analysis)
    _wrote(artifacts.write_yaml(run.output(artifacts.CHAIN_REPORT), report))
    _wrote(artifacts.write_transition_graph(analysis, run.output(artifacts.TRANSITION_GRAPH)))
    print(f"  {report['recurrent_boxes']} recurrent boxes in {len(report['components'])} chain components")
    return EXIT_OK


def cmd_order(run: PipelineRun) -> int:
    _banner(f"Fixed points and Smale order: {run.spec.name}")
    spectrum = run.spectrum
    document = artifacts.fixed_points_document(run.records, run.owners, run.system.manifold)
    _wrote(artifacts.write_yaml(run.output(artifacts.FIXED_POINTS), document))
    _wrote(artifacts.write_yaml(run.output(artifacts.ORDER_REPORT), artifacts.order_document(spectrum)))
    print("  order: " + ", ".join(f"p{i} {r.kind}" for i, r in enumerate(spectrum.ordered, start=1)))
    return EXIT_OK


def cmd_build(run: PipelineRun) -> int:
    _banner(f"Energy function: {run.spec.name} (grid {run.config.grid})")
    # screening (exit 4) comes before the manifold check of the construction (exit 5)
    spectrum = run.spectrum
    make_grid(run.system.manifold, run.config.grid)
    field = build_energy(run.system, spectrum, resolution=run.config.grid, workers=run.workers)
    config = run.config
    settings = {
        "spec": run.spec.name,
        "grid": config.grid,
        "seed": config.seed,
        "tol_int": run.system.tol,
        "tol_hyp": config.tol_hyp,
        "tol_event": config.tol_event,
    }
    _wrote(write_energy_grid(field, run.output(artifacts.ENERGY_GRID)))
    _wrote(artifacts.write_yaml(run.output(artifacts.LEVEL_SETS), artifacts.level_sets_document(field)))
    _wrote(artifacts.write_yaml(run.output(artifacts.BUILD_LOG), artifacts.build_log_document(field, settings)))
    print(f"  k={field.k}, values in [{field.values.min():.6f}, {field.values.max():.6f}]")
    return EXIT_OK


def cmd_verify(run: PipelineRun) -> int:
    _banner(f"Verification: {run.spec.name} (seed {run.config.seed})")
    field = run.load_field()
    report = run_checks(field, run.system, run.spectrum, run.analysis, seed=run.config.seed, workers=run.workers)
    mutations = None
    if run.config.self_test:
        mutations = self_test(field, run.system, run.spectrum, seed=run.config.seed, workers=run.workers)
    document = artifacts.verify_document(report, mutations)
    _wrote(artifacts.write_yaml(run.output(artifacts.VERIFY_REPORT), document))

    sections = list(report.sections) + ([mutations] if mutations is not None else [])
    for section in sections:
        status = "PASS" if section.passed else "FAIL"
        line = f"  {section.name:<20} {status}"
        if section.problems:
            issues = section.problems
            line += ": " + "; ".join(issues[:3]) + (f" (+{len(issues) - 3} more)" if len(issues) > 3 else "")
        print(line)
    return EXIT_OK if document["passed"] else EXIT_VERIFY_FAILED


def cmd_plot(run: PipelineRun) -> int:
    _banner(f"Plot: {run.spec.name}")
    grid_path = run.out_dir / artifacts.ENERGY_GRID
    if not grid_path.exists():
        raise SpecError(f"energy grid file not found: {grid_path}; run 'build' first")
    field = run.load_field() if _grid_rows(grid_path) else None
    level_sets_path = run.out_dir / artifacts.LEVEL_SETS
    level_sets = artifacts.load_yaml(level_sets_path).get("level_sets", []) if level_sets_path.exists() else []
    spectrum = run.spectrum if field is not None else None
    _wrote(plot_energy(run.output(artifacts.ENERGY_PLOT), run.system.manifold, field, spectrum, level_sets))
    return EXIT_OK


def cmd_all(run: PipelineRun) -> int:
    for stage in run.config.stages:
        code = COMMANDS[stage](run)
        if code != EXIT_OK:
            return code
    return EXIT_OK


# ── CLI ─────────────────────────────────────────────────────────

COMMANDS = {
    "analyze": cmd_analyze,
    "order": cmd_order,
    "build": cmd_build,
    "verify": cmd_verify,
    "plot": cmd_plot,
    "all": cmd_all,
}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--spec",
        required=True,
        help="Flow spec: a YAML file or the name of a shipped catalog spec.",
    )
    common.add_argument("--out", default="out", help="Output directory (default: out).")
    common.add_argument(
        "--grid",
        type=int,
        default=constants.DEFAULT_GRID,
        help=f"Energy grid resolution, at least {constants.MIN_GRID} (default: {constants.DEFAULT_GRID}).",
    )
    common.add_argument("--seed", type=int, default=0, help="Seed of the verification samples (default: 0).")
    common.add_argument("--tol-int", type=float, default=None, help="Integrator tolerance (default: from the flow spec).")
    common.add_argument(
        "--tol-hyp",
        type=float,
        default=constants.HYPERBOLICITY_TOL,
        help=f"Smallest |Re mu| accepted as hyperbolic (default: {constants.HYPERBOLICITY_TOL}).",
    )
    common.add_argument(
        "--tol-event",
        type=float,
        default=constants.EVENT_TIME_TOL,
        help=f"Time resolution of event location (default: {constants.EVENT_TIME_TOL}).",
    )
    common.add_argument(
        "--self-test",
        action="store_true",
        help="Also check that mutated inputs trip the checker (verify and all).",
    )

    parser = argparse.ArgumentParser(
        prog="energyforge",
        description="Build and verify continuous Morse energy functions of flows.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s all --spec torus_height_gradient --out out/torus --grid 128
  %(prog)s verify --spec sphere_north_south --out out/sphere --self-test
""",
    )
    subparsers = parser.add_subparsers(dest="command", help="Action to perform")
    subparsers.add_parser("analyze", parents=[common], help="Chain recurrent set and transition graph")
    subparsers.add_parser("order", parents=[common], help="Fixed points, invariant manifolds and Smale order")
    subparsers.add_parser("build", parents=[common], help="Construct the energy function on a grid")
    subparsers.add_parser("verify", parents=[common], help="Check the energy grid written by 'build'")
    subparsers.add_parser("plot", parents=[common], help="Draw contours, separatrices and fixed points")
    subparsers.add_parser("all", parents=[common], help="analyze, order, build, verify and plot")
    return parser.parse_args(argv)


def _location(e: HyperbolicityError) -> str:
    if e.location is None:
        return ""
    return f" (chart {e.location.chart}, at {tuple(round(c, 6) for c in e.location.coords)})"


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    command = args.command
    if not command:
        valid = ", ".join(COMMANDS)
        print(f"Error: no command specified. Use one of: {valid}", file=sys.stderr)
        return EXIT_SPEC

    try:
        settings = Settings()
        config = RunConfig(
            spec_path=Path(args.spec),
            out_dir=Path(args.out),
            grid=args.grid,
            tol_int=args.tol_int,
            tol_hyp=args.tol_hyp,
            tol_event=args.tol_event,
            seed=args.seed,
            self_test=args.self_test,
        )
    except SpecError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SPEC

    handler = COMMANDS[command]
    try:
        return handler(PipelineRun(config, settings))
    except (FileNotFoundError, SpecError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except IntegrationError as e:
        print(f"Error: integration failed: {e}", file=sys.stderr)
        return EXIT_INTEGRATION
    except HyperbolicityError as e:
        print(f"Error: {e}{_location(e)}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    except OrderingError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    except ScaffoldError as e:
        print(f"Error: energy construction failed at {e}", file=sys.stderr)
        return EXIT_SCAFFOLD
    except EnergyForgeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
