"""
The finished energy function: node values over the whole manifold, with
the region each node was assigned in and the stage that assigned it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from energyforge.energy_builder.grid import EnergyGrid
from energyforge.energy_builder.state import PATCHED, REGION_TAGS, UNDEFINED
from energyforge.errors import SpecError
from energyforge.fixed_points.detect import FixedPointRecord, locations

GRID_COLUMNS = ("chart", "ix", "iy", "x", "y", "phi", "region_tag")


@dataclass(frozen=True, eq=False)
class EnergyField:
    grid: EnergyGrid
    values: np.ndarray
    tags: np.ndarray
    stages: np.ndarray
    k: int
    # (position, kind, value at the nearest node) for p_1, ..., p_k
    fixed_point_values: Tuple[Tuple[int, str, float], ...] = ()
    diagnostics: Tuple[dict, ...] = ()
    level_sets: Tuple[dict, ...] = field(default=(), repr=False)

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def evaluate(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        return eval_energy(self, charts, coords)

    def tag_counts(self) -> dict:
        return {name: int(np.sum(self.tags == code)) for code, name in enumerate(REGION_TAGS) if code != UNDEFINED}

    def interface_jump(self) -> float:
        """Largest |phi(a) - phi(b)| / h over neighbouring nodes from different regions."""
        worst = 0.0
        for axis in range(self.grid.dimension):
            a, b = self.grid.neighbour_pairs(axis)
            differ = (self.tags[a] != self.tags[b]) | (self.stages[a] != self.stages[b])
            if np.any(differ):
                jump = np.abs(self.values[a[differ]] - self.values[b[differ]])
                worst = max(worst, float(np.max(jump)))
        return worst / self.spacing

    def describe(self) -> dict:
        return {
            "grid": self.grid.describe(),
            "k": self.k,
            "value_range": [float(np.min(self.values)), float(np.max(self.values))],
            "region_nodes": self.tag_counts(),
            "patched_nodes": int(np.sum(self.tags == PATCHED)),
            "interface_jump_per_cell": float(self.interface_jump()),
            "fixed_points": [
                {"position": position, "kind": kind, "value": float(value)}
                for position, kind, value in self.fixed_point_values
            ],
        }


def eval_energy(field: EnergyField, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of the node values inside the cell holding each point."""
    return field.grid.interpolate(field.values, charts, coords)


def fixed_point_values(grid: EnergyGrid, values: np.ndarray, ordered: Sequence[FixedPointRecord]):
    charts, coords = locations(ordered)
    nodes = grid.nearest_node(charts, coords)
    return tuple((position, r.kind, float(values[n])) for position, (r, n) in enumerate(zip(ordered, nodes), start=1))


# ── Grid file ──


def _number(value: float) -> str:
    return repr(float(value))


def grid_rows(field: EnergyField) -> List[List[str]]:
    grid = field.grid
    charts, index = grid.node_index(np.arange(grid.size))
    _, coords = grid.node_coords()
    rows = []
    for node in range(grid.size):
        chart_id = grid.manifold.chart_ids[int(charts[node])]
        ix = str(int(index[node, 0]))
        iy = str(int(index[node, 1])) if grid.dimension == 2 else ""
        x = _number(coords[node, 0])
        y = _number(coords[node, 1]) if grid.dimension == 2 else ""
        rows.append([chart_id, ix, iy, x, y, _number(field.values[node]), REGION_TAGS[field.tags[node]]])
    return rows


def write_energy_grid(field: EnergyField, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(GRID_COLUMNS)
        writer.writerows(grid_rows(field))
    return path


def read_energy_grid(grid: EnergyGrid, path: str | Path, k: int) -> EnergyField:
    """Rebuild an EnergyField on `grid` from a grid file.

    Raises:
        SpecError: the file is missing, has the wrong columns or does not match the grid.
    """
    path = Path(path)
    if not path.exists():
        raise SpecError(f"energy grid file not found: {path}")
    values = np.full(grid.size, np.nan)
    tags = np.full(grid.size, UNDEFINED, dtype=np.int8)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != GRID_COLUMNS:
            raise SpecError(f"{path}: expected columns {list(GRID_COLUMNS)}, got: {header!r}")
        for line, row in enumerate(reader, start=2):
            try:
                chart = grid.manifold.chart_index(row[0])
                index = [int(row[1])] + ([int(row[2])] if grid.dimension == 2 else [])
                node = int(grid.node_id(np.array([chart]), np.array([index]))[0])
                values[node] = float(row[5])
                tags[node] = REGION_TAGS.index(row[6])
            except (IndexError, ValueError) as e:
                raise SpecError(f"{path}:{line}: malformed grid row {row!r}: {e}") from None
    if np.any(~np.isfinite(values)):
        raise SpecError(f"{path}: {int(np.sum(~np.isfinite(values)))} grid nodes have no value")
    return EnergyField(grid=grid, values=values, tags=tags, stages=np.zeros(grid.size, dtype=np.int16), k=k)
