"""
Node grids over the charts of a closed manifold.

circle    N nodes on [0, 1), periodic
torus     N x N nodes on [0, 1)^2, periodic in both axes
sphere    (N+1) x (N+1) nodes per stereographic chart on
          [-SPHERE_GRID_HALF_WIDTH, SPHERE_GRID_HALF_WIDTH]^2

Values live in flat arrays indexed by node id; node ids run chart by chart
in C order of the per-chart index tuple.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from energyforge import constants
from energyforge.errors import ScaffoldError
from energyforge.manifold_flow.manifolds import Manifold


@dataclass(frozen=True, eq=False)
class EnergyGrid:
    manifold: Manifold
    resolution: int
    lower: float
    spacing: float
    shape: Tuple[int, ...]
    periodic: bool

    @property
    def dimension(self) -> int:
        return self.manifold.dimension

    @property
    def chart_count(self) -> int:
        return len(self.manifold.chart_ids)

    @property
    def nodes_per_chart(self) -> int:
        return int(np.prod(self.shape))

    @property
    def size(self) -> int:
        return self.chart_count * self.nodes_per_chart

    def node_index(self, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(chart, index tuple) of flat node ids; the index has shape (m, n)."""
        ids = np.asarray(ids, dtype=int)
        charts, local = np.divmod(ids, self.nodes_per_chart)
        index = np.column_stack(np.unravel_index(local, self.shape))
        return charts, index

    def node_id(self, charts: np.ndarray, index: np.ndarray) -> np.ndarray:
        index = np.atleast_2d(np.asarray(index, dtype=int))
        if self.periodic:
            index = np.mod(index, self.resolution)
        local = np.ravel_multi_index(tuple(index.T), self.shape)
        return np.asarray(charts, dtype=int) * self.nodes_per_chart + local

    def node_coords(self, ids: np.ndarray = None) -> Tuple[np.ndarray, np.ndarray]:
        if ids is None:
            ids = np.arange(self.size)
        charts, index = self.node_index(ids)
        return charts, self.lower + self.spacing * index.astype(float)

    def home_mask(self) -> np.ndarray:
        """Nodes lying in the region their chart owns; each point of M is home in at least one chart."""
        charts, coords = self.node_coords()
        return self.manifold.home_mask(charts, coords)

    def neighbour_pairs(self, axis: int) -> Tuple[np.ndarray, np.ndarray]:
        """Pairs (a, b) of node ids with b one step after a along `axis`."""
        charts, index = self.node_index(np.arange(self.size))
        if self.periodic:
            keep = np.ones(self.size, dtype=bool)
        else:
            keep = index[:, axis] < self.shape[axis] - 1
        step = np.zeros(self.dimension, dtype=int)
        step[axis] = 1
        a = np.flatnonzero(keep)
        b = self.node_id(charts[keep], index[keep] + step)
        return a, b

    def neighbours(self, ids: np.ndarray) -> np.ndarray:
        """Axis neighbours of each node, shape (m, 2n); -1 where a grid border cuts them off."""
        charts, index = self.node_index(ids)
        columns = []
        for axis in range(self.dimension):
            for delta in (-1, 1):
                shifted = index.copy()
                shifted[:, axis] += delta
                if self.periodic:
                    columns.append(self.node_id(charts, shifted))
                else:
                    inside = (shifted[:, axis] >= 0) & (shifted[:, axis] < self.shape[axis])
                    column = np.full(len(ids), -1, dtype=int)
                    if np.any(inside):
                        column[inside] = self.node_id(charts[inside], shifted[inside])
                    columns.append(column)
        return np.column_stack(columns)

    def _cells(self, charts: np.ndarray, coords: np.ndarray):
        charts, coords = self.manifold.normalize(np.asarray(charts, dtype=int), np.atleast_2d(coords))
        t = (coords - self.lower) / self.spacing
        base = np.floor(t).astype(int)
        if not self.periodic:
            base = np.clip(base, 0, np.array(self.shape) - 2)
        frac = t - base
        return charts, base, frac

    def interpolate(self, values: np.ndarray, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of node values at arbitrary points, in the point's own chart."""
        charts, base, frac = self._cells(charts, coords)
        result = np.zeros(len(charts))
        for corner in itertools.product((0, 1), repeat=self.dimension):
            corner = np.array(corner)
            weight = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=1)
            result += weight * values[self.node_id(charts, base + corner)]
        return result

    def nearest_node(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        charts, coords = self.manifold.normalize(np.asarray(charts, dtype=int), np.atleast_2d(coords))
        index = np.rint((coords - self.lower) / self.spacing).astype(int)
        if not self.periodic:
            index = np.clip(index, 0, np.array(self.shape) - 1)
        return self.node_id(charts, index)

    def describe(self) -> dict:
        return {
            "manifold": self.manifold.kind,
            "resolution": self.resolution,
            "lower": float(self.lower),
            "spacing": float(self.spacing),
            "shape": list(self.shape),
            "charts": list(self.manifold.chart_ids),
        }


def make_grid(manifold: Manifold, resolution: int = constants.DEFAULT_GRID) -> EnergyGrid:
    """Node grid for the closed manifold `manifold`.

    Raises:
        ScaffoldError: (stage 0) the manifold is not closed or the resolution is too coarse.
    """
    if not manifold.closed:
        raise ScaffoldError(f"energy functions are built on closed manifolds only, not {manifold.kind}", stage=0)
    if resolution < constants.MIN_GRID:
        raise ScaffoldError(f"grid resolution {resolution} is below the minimum {constants.MIN_GRID}", stage=0)
    n = manifold.dimension
    if manifold.kind == "sphere":
        width = constants.SPHERE_GRID_HALF_WIDTH
        return EnergyGrid(
            manifold=manifold,
            resolution=resolution,
            lower=-width,
            spacing=2.0 * width / resolution,
            shape=(resolution + 1,) * n,
            periodic=False,
        )
    return EnergyGrid(
        manifold=manifold,
        resolution=resolution,
        lower=0.0,
        spacing=1.0 / resolution,
        shape=(resolution,) * n,
        periodic=True,
    )
