"""
Vector-graphics picture of a built energy function: contours at the levels
j - 1/3 and j + 1/3, separatrices of every saddle, labelled fixed points and
the exported scaffold samples. One panel per chart.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from energyforge import constants  # noqa: E402
from energyforge.cli.artifacts import scaffold_points  # noqa: E402
from energyforge.energy_builder.field import EnergyField  # noqa: E402
from energyforge.manifold_flow.manifolds import Manifold  # noqa: E402
from energyforge.smale_order.order import OrderedSpectrum  # noqa: E402
from energyforge.utils import logger  # noqa: E402

SVG_HASH_SALT = "energyforge"
# consecutive trace samples farther apart than this straddle a seam or a chart switch
SEAM_JUMP = 0.5

CONTOUR_COLOR = "tab:blue"
SEPARATRIX_COLOR = "tab:red"
SCAFFOLD_COLOR = "0.55"
KIND_MARKERS = {"sink": "v", "saddle": "X", "source": "^"}


def contour_levels(k: int, low: float, high: float) -> List[float]:
    levels = sorted({j + s * constants.LEVEL_STEP for j in range(1, k + 1) for s in (-1, 1)})
    return [v for v in levels if low < v < high]


def _legend(ax) -> None:
    handles = [
        Line2D([], [], color=CONTOUR_COLOR, label="phi = j -+ 1/3"),
        Line2D([], [], color=SEPARATRIX_COLOR, label="separatrices"),
        Line2D([], [], color="k", marker="o", linestyle="", label="fixed points (index)"),
        Line2D([], [], color=SCAFFOLD_COLOR, marker=".", linestyle="", label="scaffold samples"),
    ]
    ax.legend(handles=handles, loc="upper right", fontsize=6)


def _polylines(charts: np.ndarray, coords: np.ndarray, chart: int) -> List[np.ndarray]:
    """Runs of consecutive samples in `chart` without a seam jump."""
    runs, current = [], []
    for c, y in zip(charts.tolist(), coords):
        if c != chart or (current and np.max(np.abs(y - current[-1])) > SEAM_JUMP):
            if len(current) > 1:
                runs.append(np.array(current))
            current = [] if c != chart else [y]
            continue
        current.append(y)
    if len(current) > 1:
        runs.append(np.array(current))
    return runs


def _draw_fixed_points(ax, manifold: Manifold, spectrum: OrderedSpectrum, chart: int, extent) -> None:
    for position, record in enumerate(spectrum.ordered, start=1):
        charts, coords = record.location.as_arrays()
        with np.errstate(all="ignore"):
            local = manifold.to_chart(charts, coords, chart)[0]
        if not np.all(np.isfinite(local)) or np.any(np.abs(local) > extent):
            continue
        ax.plot(*local, marker=KIND_MARKERS[record.kind], color="k", linestyle="", markersize=6)
        ax.annotate(f"p{position} ({record.index})", local, textcoords="offset points", xytext=(4, 4), fontsize=7)


def _draw_surface_panel(ax, field: EnergyField, spectrum: OrderedSpectrum, level_sets, chart: int) -> None:
    grid = field.grid
    manifold = grid.manifold
    axis = grid.lower + grid.spacing * np.arange(grid.shape[0])
    block = field.values[chart * grid.nodes_per_chart : (chart + 1) * grid.nodes_per_chart].reshape(grid.shape)
    levels = contour_levels(field.k, float(np.min(field.values)), float(np.max(field.values)))
    if levels:
        ax.contour(axis, axis, block.T, levels=levels, colors=CONTOUR_COLOR, linewidths=0.7)
    extent = abs(grid.lower) if not grid.periodic else 1.0

    for record, (stable, unstable) in zip(spectrum.records, spectrum.traces):
        if record.kind != "saddle":
            continue
        for trace in (stable, unstable):
            for branch in trace.branches:
                for run in _polylines(branch.charts, branch.coords, chart):
                    ax.plot(run[:, 0], run[:, 1], color=SEPARATRIX_COLOR, linewidth=0.8)

    chart_id = manifold.chart_ids[chart]
    rows = [row for entry in level_sets for row in scaffold_points(entry.get("scaffold", {})) if row[0] == chart_id]
    if rows:
        points = np.array([row[1:] for row in rows], dtype=float)
        ax.plot(points[:, 0], points[:, 1], ".", color=SCAFFOLD_COLOR, markersize=1.5)

    _draw_fixed_points(ax, manifold, spectrum, chart, extent)
    low, high = (0.0, 1.0) if grid.periodic else (grid.lower, -grid.lower)
    ax.set_xlim(low, high)
    ax.set_ylim(low, high)
    ax.set_aspect("equal")
    ax.set_title(f"chart {chart_id}", fontsize=8)


def _draw_circle_panel(ax, field: EnergyField, spectrum: OrderedSpectrum, level_sets) -> None:
    _, coords = field.grid.node_coords()
    x = np.append(coords[:, 0], 1.0)
    ax.plot(x, np.append(field.values, field.values[0]), color=CONTOUR_COLOR, linewidth=0.8)
    for level in contour_levels(field.k, float(np.min(field.values)), float(np.max(field.values))):
        ax.axhline(level, color=CONTOUR_COLOR, linestyle="--", linewidth=0.5)
    rows = [row for entry in level_sets for row in scaffold_points(entry.get("scaffold", {}))]
    if rows:
        xs = np.array([row[1] for row in rows], dtype=float)
        ys = field.evaluate(np.zeros(len(xs), dtype=int), xs[:, None])
        ax.plot(xs, ys, ".", color=SCAFFOLD_COLOR, markersize=3)
    for position, record in enumerate(spectrum.ordered, start=1):
        x0 = record.location.coords[0]
        ax.plot([x0], [position], marker=KIND_MARKERS[record.kind], color="k", linestyle="")
        ax.annotate(f"p{position} ({record.index})", (x0, position), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("x")
    ax.set_ylabel("phi")


def plot_energy(
    path: Path,
    manifold: Manifold,
    field: Optional[EnergyField],
    spectrum: Optional[OrderedSpectrum],
    level_sets: Sequence[dict] = (),
) -> Path:
    """Write the SVG; a missing field gives an empty canvas with the legend."""
    matplotlib.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    panels = len(manifold.chart_ids) if manifold.dimension == 2 else 1
    fig, axes = plt.subplots(1, panels, figsize=(5 * panels, 5), squeeze=False)
    axes = axes[0]
    if field is not None and spectrum is not None:
        if manifold.dimension == 1:
            _draw_circle_panel(axes[0], field, spectrum, level_sets)
        else:
            for chart, ax in enumerate(axes):
                _draw_surface_panel(ax, field, spectrum, level_sets, chart)
    else:
        logger.warning("No energy values to draw; writing an empty canvas")
    _legend(axes[-1])
    fig.suptitle(f"energy function on the {manifold.kind}", fontsize=9)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
