"""
Chart-based descriptions of the supported 1- and 2-manifolds.

Points travel as a pair of arrays: integer chart indices of shape (m,) and
chart coordinates of shape (m, n). Every manifold knows how to normalize
points (wrap-around, chart switching), how to express points in a given
chart, and how to measure distances in its metric.

    circle      one periodic chart [0, 1), flat metric
    torus       one periodic chart [0, 1)^2, flat wrap-around metric
    sphere      two stereographic charts; "south" has the south pole at its
                origin (u = (X, Y) / (1 - Z)), "north" the north pole
                (w = (X, Y) / (1 + Z)); w = u / |u|^2 on the overlap; chordal
                metric of the unit sphere
    plane-disk  one chart, the closed disk of radius R, Euclidean metric
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from energyforge import constants
from energyforge.errors import SpecError

MANIFOLD_KINDS = ("circle", "torus", "sphere", "plane-disk")


@dataclass(frozen=True)
class ChartPoint:
    chart: int
    coords: Tuple[float, ...]

    @classmethod
    def of(cls, chart: int, coords) -> "ChartPoint":
        return cls(int(chart), tuple(float(c) for c in np.atleast_1d(coords)))

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([self.chart]), np.array([self.coords], dtype=float)


def _wrap_unit(coords: np.ndarray) -> np.ndarray:
    wrapped = np.mod(coords, 1.0)
    # mod of a tiny negative number lands on 1.0 in floating point
    return np.where(wrapped >= 1.0 - 1e-13, 0.0, wrapped)


def _wrap_displacement(delta: np.ndarray) -> np.ndarray:
    return delta - np.round(delta)


class Manifold(ABC):
    kind: str
    dimension: int
    chart_ids: Tuple[str, ...]

    @property
    def coordinate_names(self) -> Tuple[str, ...]:
        return ("x",) if self.dimension == 1 else ("x", "y")

    @property
    def closed(self) -> bool:
        return True

    def chart_index(self, chart_id: str) -> int:
        try:
            return self.chart_ids.index(chart_id)
        except ValueError:
            raise SpecError(
                f"unknown chart {chart_id!r} for {self.kind}; expected one of {list(self.chart_ids)}"
            ) from None

    @abstractmethod
    def normalize(self, charts: np.ndarray, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return equivalent points in canonical form (wrapped, preferred chart)."""

    def outside(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Mask of points outside the domain (only plane-disks have an outside)."""
        return np.zeros(len(charts), dtype=bool)

    @abstractmethod
    def to_chart(self, charts: np.ndarray, coords: np.ndarray, target: int) -> np.ndarray:
        """Coordinates of the points in chart `target`."""

    def displacement(self, base_chart: int, base: np.ndarray, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Chart-coordinate offsets of the points from `base` (one point or one per row), in chart `base_chart`."""
        return self.to_chart(charts, coords, base_chart) - np.atleast_2d(np.asarray(base, dtype=float))

    def from_displacement(self, base_chart: int, base: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        offsets = np.atleast_2d(offsets)
        charts = np.full(offsets.shape[0], base_chart, dtype=int)
        return self.normalize(charts, np.atleast_2d(np.asarray(base, dtype=float)) + offsets)

    @abstractmethod
    def embed(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Coordinates used for nearest-neighbour queries."""

    @property
    def kdtree_boxsize(self) -> Optional[float]:
        return None

    @abstractmethod
    def distance(self, charts_a, coords_a, charts_b, coords_b) -> np.ndarray:
        """Metric distance between paired points."""

    def check_invariants(self, velocity) -> None:
        """Validate chart transitions and domain conditions; raise SpecError."""

    def home_mask(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Mask of points lying in the region their chart owns."""
        return np.ones(len(charts), dtype=bool)


class FlatPeriodic(Manifold):
    """Circle (n=1) or torus (n=2) as the periodic unit cube."""

    chart_ids = ("main",)

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.kind = "circle" if dimension == 1 else "torus"

    def normalize(self, charts, coords):
        return np.asarray(charts, dtype=int), _wrap_unit(np.asarray(coords, dtype=float))

    def to_chart(self, charts, coords, target):
        return np.asarray(coords, dtype=float)

    def displacement(self, base_chart, base, charts, coords):
        return _wrap_displacement(np.asarray(coords, dtype=float) - np.atleast_2d(np.asarray(base, dtype=float)))

    def embed(self, charts, coords):
        return _wrap_unit(np.asarray(coords, dtype=float))

    @property
    def kdtree_boxsize(self):
        return 1.0

    def distance(self, charts_a, coords_a, charts_b, coords_b):
        delta = _wrap_displacement(np.asarray(coords_a, dtype=float) - np.asarray(coords_b, dtype=float))
        return np.linalg.norm(np.atleast_2d(delta), axis=1)


class PlaneDisk(Manifold):
    kind = "plane-disk"
    dimension = 2
    chart_ids = ("main",)

    def __init__(self, radius: float, trapping: bool = True):
        if not np.isfinite(radius) or radius <= 0:
            raise SpecError(f"manifold.radius must be a positive number, got: {radius!r}")
        self.radius = float(radius)
        self.trapping = bool(trapping)

    @property
    def closed(self) -> bool:
        return False

    def normalize(self, charts, coords):
        return np.asarray(charts, dtype=int), np.asarray(coords, dtype=float)

    def outside(self, charts, coords):
        return np.linalg.norm(np.atleast_2d(coords), axis=1) > self.radius * (1.0 + 1e-12)

    def to_chart(self, charts, coords, target):
        return np.asarray(coords, dtype=float)

    def embed(self, charts, coords):
        return np.asarray(coords, dtype=float)

    def distance(self, charts_a, coords_a, charts_b, coords_b):
        return np.linalg.norm(np.atleast_2d(np.asarray(coords_a) - np.asarray(coords_b)), axis=1)

    def check_invariants(self, velocity) -> None:
        if not self.trapping:
            return
        angles = np.linspace(0.0, 2.0 * np.pi, constants.TRAPPING_SAMPLES, endpoint=False)
        boundary = self.radius * np.column_stack([np.cos(angles), np.sin(angles)])
        v = velocity(np.zeros(len(angles), dtype=int), boundary)
        inward = np.einsum("ij,ij->i", v, boundary)
        if np.any(inward >= 0.0):
            worst = int(np.argmax(inward))
            raise SpecError(
                f"field does not point strictly inward on the plane-disk boundary "
                f"(radius {self.radius}); first failure at {tuple(boundary[worst].round(6))}"
            )


class Sphere(Manifold):
    kind = "sphere"
    dimension = 2
    chart_ids = ("south", "north")

    @staticmethod
    def _invert(coords: np.ndarray) -> np.ndarray:
        sq = np.sum(coords * coords, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return coords / sq

    def normalize(self, charts, coords):
        charts = np.array(charts, dtype=int, copy=True)
        coords = np.array(coords, dtype=float, copy=True)
        far = np.linalg.norm(coords, axis=1) > constants.SPHERE_SWITCH_RADIUS
        if np.any(far):
            coords[far] = self._invert(coords[far])
            charts[far] = 1 - charts[far]
        return charts, coords

    def to_chart(self, charts, coords, target):
        coords = np.array(coords, dtype=float, copy=True)
        other = np.asarray(charts) != target
        if np.any(other):
            coords[other] = self._invert(coords[other])
        return coords

    def embed(self, charts, coords):
        coords = np.asarray(coords, dtype=float)
        sq = np.sum(coords * coords, axis=1)
        denom = 1.0 + sq
        z = (sq - 1.0) / denom
        z = np.where(np.asarray(charts) == 0, z, -z)
        return np.column_stack([2.0 * coords[:, 0] / denom, 2.0 * coords[:, 1] / denom, z])

    def distance(self, charts_a, coords_a, charts_b, coords_b):
        return np.linalg.norm(self.embed(charts_a, coords_a) - self.embed(charts_b, coords_b), axis=1)

    def home_mask(self, charts, coords):
        return np.linalg.norm(np.atleast_2d(coords), axis=1) <= constants.SPHERE_HOME_RADIUS

    @staticmethod
    def transition_jacobian(coords: np.ndarray) -> np.ndarray:
        """Jacobians of u -> u / |u|^2 at each point, shape (m, 2, 2)."""
        sq = np.sum(coords * coords, axis=1)
        eye = np.eye(2)[None, :, :] * sq[:, None, None]
        outer = 2.0 * np.einsum("mi,mj->mij", coords, coords)
        return (eye - outer) / (sq * sq)[:, None, None]

    def overlap_samples(self) -> np.ndarray:
        inner, outer = constants.SPHERE_OVERLAP
        count = constants.CHART_ROUNDTRIP_SAMPLES
        radii = np.linspace(inner, outer, 8)
        angles = np.linspace(0.0, 2.0 * np.pi, count // 8, endpoint=False) + 0.1
        r, a = np.meshgrid(radii, angles)
        return np.column_stack([(r * np.cos(a)).ravel(), (r * np.sin(a)).ravel()])

    def check_invariants(self, velocity) -> None:
        samples = self.overlap_samples()
        roundtrip = self._invert(self._invert(samples))
        error = float(np.max(np.abs(roundtrip - samples)))
        if error > constants.CHART_ROUNDTRIP_TOL:
            raise SpecError(f"sphere chart transitions are not mutually inverse (error {error:.3e})")
        south = np.zeros(len(samples), dtype=int)
        north = np.ones(len(samples), dtype=int)
        v_south = velocity(south, samples)
        v_north = velocity(north, self._invert(samples))
        pushed = np.einsum("mij,mj->mi", self.transition_jacobian(samples), v_south)
        scale = np.maximum(np.linalg.norm(v_north, axis=1), 1.0)
        mismatch = float(np.max(np.linalg.norm(pushed - v_north, axis=1) / scale))
        if mismatch > constants.FIELD_CONSISTENCY_TOL:
            raise SpecError(
                f"sphere field expressions disagree on the chart overlap "
                f"(relative mismatch {mismatch:.3e} > {constants.FIELD_CONSISTENCY_TOL})"
            )


def make_manifold(kind: str, radius: Optional[float] = None, trapping: bool = True) -> Manifold:
    if kind == "circle":
        return FlatPeriodic(1)
    if kind == "torus":
        return FlatPeriodic(2)
    if kind == "sphere":
        return Sphere()
    if kind == "plane-disk":
        if radius is None:
            raise SpecError("manifold.radius is required for plane-disk")
        return PlaneDisk(radius, trapping)
    raise SpecError(f"manifold.kind must be one of {list(MANIFOLD_KINDS)}, got: {kind!r}")
