"""
Level-set extraction on energy grids.

On surfaces the sublevel boundary {F = level} is traced by marching squares
with linear interpolation along cell edges; segments are chained into
polylines through the grid edges they share. Ambiguous cells (two diagonal
corners inside) are split by the value at the cell centre. On the circle
every crossing between neighbouring nodes is its own component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from energyforge.energy_builder.grid import EnergyGrid
from energyforge.manifold_flow.manifolds import Manifold

# corner offsets c0..c3 and, per corner, the two cell edges that touch it
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_CORNER_EDGES = ((3, 0), (0, 1), (1, 2), (2, 3))


@dataclass(frozen=True, eq=False)
class Contour:
    """One boundary component: a polyline on a surface, a single point on the circle."""

    charts: np.ndarray
    coords: np.ndarray
    closed: bool
    # arclength at each vertex, starting from 0
    arclength: np.ndarray
    perimeter: float

    def __len__(self) -> int:
        return len(self.charts)

    def describe(self, manifold: Manifold) -> dict:
        return {
            "closed": bool(self.closed),
            "length": float(self.perimeter),
            "points": point_rows(manifold, self.charts, self.coords),
        }


def point_rows(manifold: Manifold, charts: np.ndarray, coords: np.ndarray) -> List[list]:
    """[chart id, coordinates...] per point, for YAML export."""
    return [[manifold.chart_ids[int(c)], *[float(v) for v in y]] for c, y in zip(charts, np.atleast_2d(coords))]


def _polyline(manifold: Manifold, charts: np.ndarray, coords: np.ndarray, closed: bool) -> Contour:
    if len(charts) > 1:
        steps = manifold.distance(charts[:-1], coords[:-1], charts[1:], coords[1:])
    else:
        steps = np.zeros(0)
    arclength = np.concatenate([[0.0], np.cumsum(steps)])
    perimeter = float(arclength[-1])
    if closed and len(charts) > 1:
        perimeter += float(manifold.distance(charts[-1:], coords[-1:], charts[:1], coords[:1])[0])
    return Contour(charts=charts, coords=coords, closed=closed, arclength=arclength, perimeter=perimeter)


def _walk(graph: nx.Graph, start: Hashable) -> List[Hashable]:
    order = [start]
    previous, current = None, start
    while True:
        ahead = sorted(n for n in graph.neighbors(current) if n != previous)
        if not ahead or ahead[0] == start:
            return order
        previous, current = current, ahead[0]
        order.append(current)


def _edge_point(grid: EnergyGrid, values: np.ndarray, level: float, key: Tuple) -> Tuple[int, np.ndarray]:
    chart, axis, index = key
    index = np.array(index)
    step = np.zeros(2, dtype=int)
    step[axis] = 1
    a, b = grid.node_id(np.array([chart, chart]), np.array([index, index + step]))
    fa, fb = values[a], values[b]
    # p = e1 - sdf1 / (sdf2 - sdf1) * (e2 - e1), with sdf = F - level
    frac = (level - fa) / (fb - fa)
    return chart, grid.lower + grid.spacing * (index + frac * step)


def _surface_segments(grid: EnergyGrid, values: np.ndarray, level: float) -> nx.Graph:
    graph = nx.Graph()
    field = values.reshape((grid.chart_count,) + grid.shape)
    n = grid.resolution
    limit = n if grid.periodic else grid.shape[0] - 1
    for chart in range(grid.chart_count):
        f = field[chart]
        if grid.periodic:
            corners = [np.roll(f, (-di, -dj), axis=(0, 1))[:limit, :limit] for di, dj in _CORNERS]
        else:
            corners = [f[di : di + limit, dj : dj + limit] for di, dj in _CORNERS]
        inside = [c < level for c in corners]
        mixed = np.zeros((limit, limit), dtype=bool)
        for k in range(1, 4):
            mixed |= inside[k] != inside[0]
        for i, j in zip(*np.nonzero(mixed)):
            corner_in = [bool(c[i, j]) for c in inside]
            edges = [
                (chart, 0, ((i % n) if grid.periodic else i, j)),
                (chart, 1, ((i + 1) % n if grid.periodic else i + 1, j)),
                (chart, 0, (i, (j + 1) % n if grid.periodic else j + 1)),
                (chart, 1, (i, j)),
            ]
            crossed = [corner_in[e] != corner_in[(e + 1) % 4] for e in range(4)]
            if sum(crossed) == 2:
                a, b = [edges[e] for e in range(4) if crossed[e]]
                graph.add_edge(a, b)
                continue
            centre = float(np.mean([c[i, j] for c in corners])) < level
            for corner, (ea, eb) in enumerate(_CORNER_EDGES):
                if corner_in[corner] != centre:
                    graph.add_edge(edges[ea], edges[eb])
    return graph


def _surface_contours(grid: EnergyGrid, values: np.ndarray, level: float) -> List[Contour]:
    manifold = grid.manifold
    graph = _surface_segments(grid, values, level)
    contours = []
    for component in sorted(nx.connected_components(graph), key=min):
        ends = sorted(n for n in component if graph.degree(n) == 1)
        closed = not ends
        order = _walk(graph, ends[0] if ends else min(component))
        points = [_edge_point(grid, values, level, key) for key in order]
        charts = np.array([c for c, _ in points], dtype=int)
        coords = np.array([y for _, y in points])
        if grid.periodic:
            charts, coords = manifold.normalize(charts, coords)
        if np.mean(manifold.home_mask(charts, coords)) <= 0.5:
            continue
        contours.append(_polyline(manifold, charts, coords, closed))
    return contours


def _circle_contours(grid: EnergyGrid, values: np.ndarray, level: float) -> List[Contour]:
    n = grid.resolution
    contours = []
    for i in range(n):
        fa, fb = values[i], values[(i + 1) % n]
        if (fa < level) != (fb < level):
            x = grid.lower + grid.spacing * (i + (level - fa) / (fb - fa))
            charts, coords = grid.manifold.normalize(np.zeros(1, dtype=int), np.array([[x]]))
            contours.append(_polyline(grid.manifold, charts, coords, closed=False))
    return contours


class BoundaryContours:
    """Components of {F = level} with nearest-point location."""

    def __init__(self, grid: EnergyGrid, level: float, contours: Sequence[Contour]):
        self.grid = grid
        self.level = float(level)
        self.contours = tuple(contours)
        manifold = grid.manifold
        self._offsets = np.cumsum([0] + [len(c) for c in self.contours])
        if self.contours:
            self._charts = np.concatenate([c.charts for c in self.contours])
            self._coords = np.concatenate([c.coords for c in self.contours], axis=0)
            self._owner = np.repeat(np.arange(len(self.contours)), [len(c) for c in self.contours])
            self._tree = cKDTree(manifold.embed(self._charts, self._coords), boxsize=manifold.kdtree_boxsize)
        else:
            self._tree = None

    def __len__(self) -> int:
        return len(self.contours)

    def _project(self, vertex: np.ndarray, neighbour: np.ndarray, charts: np.ndarray, coords: np.ndarray):
        manifold = self.grid.manifold
        frac = np.zeros(len(vertex))
        dist = np.full(len(vertex), np.inf)
        for chart in np.unique(self._charts[vertex]):
            rows = np.flatnonzero(self._charts[vertex] == chart)
            base = self._coords[vertex[rows]]
            point = manifold.displacement(chart, base, charts[rows], coords[rows])
            along = manifold.displacement(chart, base, self._charts[neighbour[rows]], self._coords[neighbour[rows]])
            sq = np.sum(along * along, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.clip(np.where(sq > 0, np.sum(point * along, axis=1) / sq, 0.0), 0.0, 1.0)
            frac[rows] = t
            dist[rows] = np.linalg.norm(point - t[:, None] * along, axis=1)
        return frac, dist

    def locate(self, charts: np.ndarray, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(component, arclength position, distance in chart units) of the nearest boundary point.

        Components are -1 when there is no boundary at all.
        """
        charts, coords = self.grid.manifold.normalize(np.asarray(charts, dtype=int), np.atleast_2d(coords))
        m = len(charts)
        if self._tree is None or m == 0:
            return np.full(m, -1), np.zeros(m), np.full(m, np.inf)
        _, vertex = self._tree.query(self.grid.manifold.embed(charts, coords))
        owner = self._owner[vertex]
        start = self._offsets[owner]
        size = self._offsets[owner + 1] - start
        local = vertex - start
        closed = np.array([c.closed for c in self.contours])[owner]
        perimeter = np.array([c.perimeter for c in self.contours])[owner]
        arc = np.concatenate([c.arclength for c in self.contours])

        ahead = np.where(closed, (local + 1) % size, np.minimum(local + 1, size - 1)) + start
        behind = np.where(closed, (local - 1) % size, np.maximum(local - 1, 0)) + start
        t_ahead, d_ahead = self._project(vertex, ahead, charts, coords)
        t_behind, d_behind = self._project(vertex, behind, charts, coords)
        step_ahead = np.where(local + 1 < size, arc[np.minimum(ahead, len(arc) - 1)] - arc[vertex], 0.0)
        step_ahead = np.where(closed & (local + 1 == size), perimeter - arc[vertex], step_ahead)
        step_behind = np.where(local > 0, arc[vertex] - arc[behind], perimeter - arc[behind])
        step_behind = np.where(closed | (local > 0), step_behind, 0.0)

        use_ahead = d_ahead <= d_behind
        position = np.where(use_ahead, arc[vertex] + t_ahead * step_ahead, arc[vertex] - t_behind * step_behind)
        position = np.where(closed & (perimeter > 0), np.mod(position, np.where(perimeter > 0, perimeter, 1.0)), position)
        return owner, position, np.minimum(d_ahead, d_behind)

    def describe(self) -> dict:
        return {
            "level": self.level,
            "components": [c.describe(self.grid.manifold) for c in self.contours],
        }


def extract_contours(grid: EnergyGrid, values: np.ndarray, level: float) -> BoundaryContours:
    """Components of {values = level} for a finite node field."""
    if grid.dimension == 1:
        contours = _circle_contours(grid, values, level)
    else:
        contours = _surface_contours(grid, values, level)
    return BoundaryContours(grid, level, contours)


def count_components(points: np.ndarray, spacing: float, boxsize=None) -> int:
    """Connected components of a sampled point set, joining samples closer than 1.5 * spacing."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        return 0
    graph = nx.Graph()
    graph.add_nodes_from(range(len(points)))
    graph.add_edges_from(cKDTree(points, boxsize=boxsize).query_pairs(1.5 * spacing))
    return nx.number_connected_components(graph)

