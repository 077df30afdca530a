"""
Artifact files written by the CLI commands.

YAML is dumped with sorted keys and repr-precision floats; CSV rows are
written in a fixed order. Identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, List, Sequence

import numpy as np
import yaml

from energyforge.chain_recurrence.analysis import ChainAnalysis, ChainWitness, chain_witness
from energyforge.energy_builder.field import EnergyField
from energyforge.fixed_points.detect import FixedPointRecord
from energyforge.smale_order.order import OrderedSpectrum
from energyforge.verify.checks import CheckSection
from energyforge.verify.report import MorseCheckReport

CHAIN_REPORT = "chain_report.yaml"
TRANSITION_GRAPH = "transition_graph.csv"
FIXED_POINTS = "fixed_points.yaml"
ORDER_REPORT = "order_report.yaml"
ENERGY_GRID = "energy_grid.csv"
LEVEL_SETS = "level_sets.yaml"
BUILD_LOG = "build_log.yaml"
VERIFY_REPORT = "verify_report.yaml"
ENERGY_PLOT = "energy.svg"


def plain(value: Any) -> Any:
    """Nested builtins only, so safe_dump accepts the document."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_yaml(path: Path, document: dict) -> Path:
    with open(path, "w") as f:
        yaml.safe_dump(plain(document), f, sort_keys=True, default_flow_style=False)
    return path


def load_yaml(path: Path) -> dict:
    with open(path) as f:
        return yaml.safe_load(f) or {}


# ── analyze ──


def witness_document(witness: ChainWitness, manifold) -> dict:
    return {
        "boxes": list(witness.boxes),
        "steps": witness.steps,
        "length": float(witness.length),
        "points": [
            {"chart": manifold.chart_ids[int(c)], "coords": [float(v) for v in y], "time": float(t)}
            for c, y, t in zip(witness.charts, witness.coords, witness.times)
        ],
    }


def chain_report(name: str, analysis: ChainAnalysis) -> dict:
    graph = analysis.graph
    cover = graph.cover
    manifold = cover.manifold
    components = []
    for index, members in enumerate(analysis.components):
        where = analysis.representative(index)
        box = int(cover.locate(*where.as_arrays())[0])
        witness = chain_witness(graph, box, box)
        components.append(
            {
                "index": index,
                "boxes": len(members),
                "layer": analysis.component_layer(index),
                "representative": {"chart": manifold.chart_ids[where.chart], "coords": list(where.coords)},
                "witness": None if witness is None else witness_document(witness, manifold),
            }
        )
    return {
        "spec": name,
        "manifold": manifold.kind,
        "cover": {"resolution": cover.resolution, "boxes": cover.size, "diameter": float(cover.diameter)},
        "graph": {
            "tau": float(graph.tau),
            "epsilon": float(graph.epsilon),
            "samples_per_box": graph.samples_per_box,
            "edges": graph.n_edges,
        },
        "recurrent_boxes": int(np.sum(analysis.recurrent)),
        "condensation_classes": analysis.dag.number_of_nodes(),
        "top_layer": int(analysis.lyapunov.max()) if len(analysis.lyapunov) else 0,
        "components": components,
    }


def write_transition_graph(analysis: ChainAnalysis, path: Path) -> Path:
    graph = analysis.graph
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("source", "target", "source_layer", "target_layer"))
        for a, b in zip(graph.sources.tolist(), graph.targets.tolist()):
            writer.writerow((a, b, int(analysis.lyapunov[a]), int(analysis.lyapunov[b])))
    return path


# ── order ──


def fixed_points_document(records: Sequence[FixedPointRecord], owners: Sequence[int], manifold) -> dict:
    return {
        "count": len(records),
        "fixed_points": [
            {"record": n, **r.describe(), "chart": manifold.chart_ids[r.location.chart], "component": owners[n]}
            for n, r in enumerate(records)
        ],
    }


def order_document(spectrum: OrderedSpectrum) -> dict:
    return {**spectrum.describe(), "closure_violations": spectrum.closure_violations()}


# ── build ──


def level_sets_document(field: EnergyField) -> dict:
    return {"k": field.k, "manifold": field.grid.manifold.kind, "level_sets": list(field.level_sets)}


def build_log_document(field: EnergyField, run: dict) -> dict:
    return {"run": run, "field": field.describe(), "stages": list(field.diagnostics)}


# ── verify ──


def verify_document(report: MorseCheckReport, self_test: CheckSection = None) -> dict:
    document = report.describe()
    if self_test is not None:
        document["self_test"] = self_test.describe()
        document["passed"] = bool(document["passed"] and self_test.passed)
    return document


def scaffold_points(geometry: Any) -> List[list]:
    """Flatten nested scaffold geometry into [chart id, coords...] rows."""
    if isinstance(geometry, dict):
        return [row for key in sorted(geometry) for row in scaffold_points(geometry[key])]
    if isinstance(geometry, list) and geometry and isinstance(geometry[0], str):
        return [geometry]
    if isinstance(geometry, list):
        return [row for item in geometry for row in scaffold_points(item)]
    return []
