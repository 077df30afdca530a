"""
Box covers of the supported manifolds.

Each chart carries a uniform grid of `resolution` boxes per axis:

    circle, torus   [0, 1)^n, periodic
    plane-disk      [-R, R]^2, boxes meeting the disk
    sphere          [-1, 1]^2 in both charts, boxes meeting the unit disk the
                    chart owns (the two closed disks cover the sphere)

Boxes are addressed by a flat id; `box_charts[id]` and `box_index[id]` give
the chart and integer multi-index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from energyforge import constants
from energyforge.errors import SpecError
from energyforge.manifold_flow.manifolds import FlatPeriodic, Manifold, PlaneDisk, Sphere


@dataclass(frozen=True, eq=False)
class BoxCover:
    manifold: Manifold
    resolution: int
    lower: float
    width: float
    periodic: bool
    box_charts: np.ndarray
    box_index: np.ndarray
    # lookup[chart][multi-index] -> box id, -1 where the grid has no box
    lookup: np.ndarray
    diameter: float

    @property
    def size(self) -> int:
        return len(self.box_charts)

    @property
    def dimension(self) -> int:
        return self.box_index.shape[1]

    def box_lower(self, boxes: Optional[np.ndarray] = None) -> np.ndarray:
        index = self.box_index if boxes is None else self.box_index[boxes]
        return self.lower + index * self.width

    def centers(self, boxes: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        boxes = np.arange(self.size) if boxes is None else np.asarray(boxes)
        return self.box_charts[boxes], self.box_lower(boxes) + 0.5 * self.width

    def sample_points(self, samples_per_box: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Corner-grid plus center samples of every box.

        Uses the smallest q >= 2 points per axis with q^n + 1 >= samples_per_box.
        Returns (owner box id, chart, coords) per sample.
        """
        n = self.dimension
        q = 2
        while q ** n + 1 < samples_per_box:
            q += 1
        axis = np.linspace(0.0, 1.0, q)
        offsets = np.array(list(itertools.product(axis, repeat=n)) + [[0.5] * n])
        owner = np.repeat(np.arange(self.size), len(offsets))
        coords = self.box_lower(owner) + np.tile(offsets, (self.size, 1)) * self.width
        if self.periodic:
            coords = np.mod(coords, 1.0)
        if isinstance(self.manifold, PlaneDisk):
            norms = np.linalg.norm(coords, axis=1)
            scale = np.minimum(1.0, self.manifold.radius / np.maximum(norms, 1e-300))
            coords = coords * scale[:, None]
        charts = self.box_charts[owner]
        return owner, charts, coords

    def _chart_radius(self, local: np.ndarray, radius: np.ndarray) -> np.ndarray:
        if isinstance(self.manifold, Sphere):
            # chordal distance ~ 2 |du| / (1 + |u|^2); widen for the far side of the ball
            reach = np.linalg.norm(local, axis=1) + radius
            return radius * (1.0 + reach * reach) / 2.0
        return radius

    def boxes_within(self, charts: np.ndarray, coords: np.ndarray, radius) -> Tuple[np.ndarray, np.ndarray]:
        """All (point, box) pairs with the box closer than `radius` to the point.

        Distances are metric distances, approximated in chart coordinates on
        the sphere. Returns two aligned arrays (point index, box id).
        """
        charts = np.asarray(charts, dtype=int)
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        radius = np.broadcast_to(np.asarray(radius, dtype=float), (len(charts),))
        n = self.dimension
        found_points, found_boxes = [], []
        for chart in range(self.lookup.shape[0]):
            local = self.manifold.to_chart(charts, coords, chart)
            with np.errstate(invalid="ignore"):
                r_chart = self._chart_radius(local, radius)
                near = np.all(np.isfinite(local), axis=1)
                if not self.periodic:
                    span = max(abs(self.lower), abs(self.lower + self.resolution * self.width))
                    near &= np.all(np.abs(local) <= span + r_chart[:, None] + self.width, axis=1)
            points = np.flatnonzero(near)
            if len(points) == 0:
                continue
            local = local[points]
            r_chart = r_chart[points]
            base = np.floor((local - self.lower) / self.width).astype(int)
            reach = int(np.ceil(float(np.max(r_chart)) / self.width)) + 1
            reach = min(reach, self.resolution)
            for offset in itertools.product(range(-reach, reach + 1), repeat=n):
                index = base + np.array(offset)
                if self.periodic:
                    index = np.mod(index, self.resolution)
                    valid = np.ones(len(points), dtype=bool)
                else:
                    valid = np.all((index >= 0) & (index < self.resolution), axis=1)
                    index = np.clip(index, 0, self.resolution - 1)
                boxes = self.lookup[(chart,) + tuple(index.T)]
                valid &= boxes >= 0
                center = self.lower + (index + 0.5) * self.width
                delta = local - center
                if self.periodic:
                    delta = delta - np.round(delta)
                gap = np.maximum(np.abs(delta) - 0.5 * self.width, 0.0)
                valid &= np.linalg.norm(gap, axis=1) <= r_chart
                found_points.append(points[valid])
                found_boxes.append(boxes[valid])
        if not found_points:
            return np.empty(0, dtype=int), np.empty(0, dtype=int)
        pairs = np.unique(
            np.column_stack([np.concatenate(found_points), np.concatenate(found_boxes)]), axis=0
        )
        return pairs[:, 0], pairs[:, 1]

    def locate(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Id of a box containing each point, -1 if none does."""
        charts = np.asarray(charts, dtype=int)
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        result = np.full(len(charts), -1, dtype=int)
        # own chart first, then every chart in turn
        candidates = [charts] + [np.full(len(charts), c) for c in range(self.lookup.shape[0])]
        for target in candidates:
            todo = np.flatnonzero(result < 0)
            if len(todo) == 0:
                break
            local = np.empty((len(todo), self.dimension))
            for chart in np.unique(target[todo]):
                sel = target[todo] == chart
                local[sel] = self.manifold.to_chart(charts[todo[sel]], coords[todo[sel]], int(chart))
            with np.errstate(invalid="ignore"):
                index = np.floor((local - self.lower) / self.width)
            ok = np.all(np.isfinite(index), axis=1)
            index = np.where(np.isfinite(index), index, 0).astype(int)
            if self.periodic:
                index = np.mod(index, self.resolution)
            else:
                # closed upper faces belong to the last box
                on_edge = np.isclose(local, self.lower + self.resolution * self.width)
                index = np.where(on_edge, self.resolution - 1, index)
                ok &= np.all((index >= 0) & (index < self.resolution), axis=1)
                index = np.clip(index, 0, self.resolution - 1)
            boxes = self.lookup[(target[todo],) + tuple(index.T)]
            hit = ok & (boxes >= 0)
            result[todo[hit]] = boxes[hit]
        return result

    @cached_property
    def face_pairs(self) -> np.ndarray:
        """Pairs (a, b), a < b, of boxes sharing a face (wrap-around and chart overlap included)."""
        pairs = []
        for axis in range(self.dimension):
            step = np.zeros(self.dimension, dtype=int)
            step[axis] = 1
            index = self.box_index + step
            if self.periodic:
                index = np.mod(index, self.resolution)
                valid = np.ones(self.size, dtype=bool)
            else:
                valid = index[:, axis] < self.resolution
                index = np.clip(index, 0, self.resolution - 1)
            other = self.lookup[(self.box_charts,) + tuple(index.T)]
            valid &= other >= 0
            pairs.append(np.column_stack([np.arange(self.size)[valid], other[valid]]))
        if self.lookup.shape[0] > 1:
            charts, centers = self.centers()
            for chart in range(self.lookup.shape[0]):
                mine = np.flatnonzero(charts == chart)
                rim = mine[np.linalg.norm(centers[mine], axis=1) > 1.0 - 2.0 * self.width]
                if len(rim) == 0:
                    continue
                points, boxes = self.boxes_within(
                    charts[rim], centers[rim], np.full(len(rim), 0.5 * self.diameter)
                )
                cross = self.box_charts[boxes] != chart
                pairs.append(np.column_stack([rim[points[cross]], boxes[cross]]))
        pairs = np.concatenate(pairs, axis=0) if pairs else np.empty((0, 2), dtype=int)
        pairs = np.sort(pairs, axis=1)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        return np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)


def _closest_norm(lower: np.ndarray, width: float) -> np.ndarray:
    closest = np.clip(0.0, lower, lower + width)
    return np.linalg.norm(closest, axis=1)


def make_cover(manifold: Manifold, resolution: Optional[int] = None) -> BoxCover:
    """Uniform box cover of `manifold` with `resolution` boxes per chart axis."""
    n = manifold.dimension
    resolution = constants.DEFAULT_COVER_RESOLUTION[n] if resolution is None else int(resolution)
    if resolution < 2:
        raise SpecError(f"cover resolution must be at least 2, got: {resolution!r}")
    grid = np.array(list(itertools.product(range(resolution), repeat=n)), dtype=int)

    if isinstance(manifold, FlatPeriodic):
        lower, width, periodic = 0.0, 1.0 / resolution, True
        keep = [np.ones(len(grid), dtype=bool)]
    elif isinstance(manifold, PlaneDisk):
        lower, width, periodic = -manifold.radius, 2.0 * manifold.radius / resolution, False
        keep = [_closest_norm(lower + grid * width, width) < manifold.radius]
    elif isinstance(manifold, Sphere):
        lower, width, periodic = -1.0, 2.0 / resolution, False
        inside = _closest_norm(lower + grid * width, width) < constants.SPHERE_HOME_RADIUS
        keep = [inside, inside]
    else:
        raise SpecError(f"no box cover for manifold kind {manifold.kind!r}")

    lookup = np.full((len(keep),) + (resolution,) * n, -1, dtype=int)
    box_charts, box_index = [], []
    for chart, mask in enumerate(keep):
        chosen = grid[mask]
        start = sum(len(c) for c in box_charts)
        lookup[(chart,) + tuple(chosen.T)] = start + np.arange(len(chosen))
        box_charts.append(np.full(len(chosen), chart, dtype=int))
        box_index.append(chosen)
    box_charts = np.concatenate(box_charts)
    box_index = np.concatenate(box_index, axis=0)

    if isinstance(manifold, Sphere):
        corners = lower + box_index * width
        diag_a = manifold.distance(box_charts, corners, box_charts, corners + width)
        diag_b = manifold.distance(
            box_charts, corners + np.array([width, 0.0]), box_charts, corners + np.array([0.0, width])
        )
        diameter = float(max(np.max(diag_a), np.max(diag_b)))
    else:
        diameter = width * float(np.sqrt(n))

    return BoxCover(
        manifold=manifold,
        resolution=resolution,
        lower=lower,
        width=width,
        periodic=periodic,
        box_charts=box_charts,
        box_index=box_index,
        lookup=lookup,
        diameter=diameter,
    )
