"""
Linearizing charts and local Morse functions at hyperbolic fixed points.

A chart frame is the affine map y -> F (y - p) whose inverse E has the
eigen-directions of the linearization as columns, unstable directions
first. In frame coordinates the linear part of the field is block
diagonal, so the local quadratic

    phi(y) = c - sum_{i < index} x_i^2 + sum_{i >= index} x_i^2,  x = F (y - p) / scale

strictly decreases along the linearized flow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from energyforge import constants
from energyforge.errors import HyperbolicityError, OutOfChartError
from energyforge.manifold_flow.manifolds import ChartPoint, FlatPeriodic, Manifold, PlaneDisk, Sphere
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import logger


@dataclass(frozen=True, eq=False)
class ChartFrame:
    manifold: Manifold
    chart: int
    origin: np.ndarray
    # local = matrix @ (y - origin); y - origin = inverse @ local
    matrix: np.ndarray
    inverse: np.ndarray
    orthogonal: bool = False

    @property
    def stretch(self) -> float:
        """Operator norm of the inverse frame map."""
        return float(np.linalg.norm(self.inverse, 2))

    def to_local(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        offsets = self.manifold.displacement(self.chart, self.origin, np.asarray(charts), np.atleast_2d(coords))
        return offsets @ self.matrix.T

    def from_local(self, local: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.manifold.from_displacement(self.chart, self.origin, np.atleast_2d(local) @ self.inverse.T)


def _normalize_columns(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors / np.linalg.norm(vectors, axis=0, keepdims=True)
    # sign convention: largest component positive
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    return vectors * np.where(signs == 0, 1.0, signs)


def eigen_frame(jacobian: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Columns spanning unstable then stable directions, and whether the frame is orthogonal.

    Real diagonalizable linearizations give the eigenvector frame, sorted by
    decreasing real part inside each group. Otherwise the ordered real Schur
    form supplies an orthonormal frame of the two invariant subspaces.

    Raises:
        HyperbolicityError: the invariant subspaces cannot be split.
    """
    n = jacobian.shape[0]
    mu, vectors = np.linalg.eig(jacobian)
    scale = max(1.0, float(np.max(np.abs(mu))))
    if np.all(np.abs(mu.imag) <= 1e-9 * scale):
        order = sorted(range(n), key=lambda k: (mu[k].real < 0, -mu[k].real))
        frame = _normalize_columns(vectors.real[:, order])
        if np.linalg.cond(frame) < 1e8:
            return frame, False

    schur, basis, unstable = scipy.linalg.schur(jacobian, output="real", sort="rhp")
    expected = int(np.sum(mu.real > 0))
    upper = basis[:, :unstable]
    residual = jacobian @ upper - upper @ (upper.T @ jacobian @ upper)
    if unstable != expected or (unstable and float(np.max(np.abs(residual))) > 1e-8 * scale):
        raise HyperbolicityError(
            f"cannot split the linearization into invariant subspaces (eigenvalues {np.round(mu, 6).tolist()})"
        )
    return basis, True


def _domain_cap(manifold: Manifold) -> float:
    if isinstance(manifold, FlatPeriodic):
        return 0.25
    if isinstance(manifold, Sphere):
        return 0.5
    if isinstance(manifold, PlaneDisk):
        return 0.5 * manifold.radius
    return 0.25


def _remainder_samples(n: int, radius: float) -> np.ndarray:
    if n == 1:
        return np.array([[radius], [-radius], [0.5 * radius], [-0.5 * radius]])
    count = constants.REMAINDER_SAMPLES // 2
    angles = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    circle = np.column_stack([np.cos(angles), np.sin(angles)])
    return np.concatenate([radius * circle, 0.5 * radius * circle])


def linearization_radius(
    system: FlowSystem,
    location: ChartPoint,
    jacobian: np.ndarray,
    neighbours: Sequence[ChartPoint] = (),
) -> float:
    """Largest tried radius on which the field stays within 10% of its linearization.

    Candidates shrink geometrically from the cap set by the domain and by
    the nearest other fixed point.
    """
    manifold = system.manifold
    origin = np.asarray(location.coords)
    cap = _domain_cap(manifold)
    for other in neighbours:
        offset = manifold.displacement(location.chart, origin, np.array([other.chart]), np.array([other.coords]))
        with np.errstate(invalid="ignore"):
            distance = float(np.linalg.norm(offset))
        if np.isfinite(distance) and distance > 0:
            cap = min(cap, constants.CHART_SEPARATION_SHARE * distance)

    radius = cap
    for _ in range(80):
        offsets = _remainder_samples(manifold.dimension, radius)
        v = system.velocity(np.full(len(offsets), location.chart), origin[None, :] + offsets)
        linear = offsets @ jacobian.T
        remainder = np.linalg.norm(v - linear, axis=1) / np.linalg.norm(linear, axis=1)
        if float(np.max(remainder)) < constants.REMAINDER_FRACTION:
            return radius
        radius *= 0.8
    raise HyperbolicityError(
        f"field is not close to its linearization near {location.coords}", location=location
    )


def build_chart(record, system: FlowSystem, neighbours: Sequence[ChartPoint] = ()) -> Tuple[ChartFrame, float]:
    """Affine eigenframe chart at a fixed point and its validity radius r_p."""
    frame_columns, orthogonal = eigen_frame(record.jacobian)
    inverse = frame_columns
    matrix = inverse.T.copy() if orthogonal else np.linalg.inv(inverse)
    frame = ChartFrame(
        manifold=system.manifold,
        chart=record.location.chart,
        origin=np.asarray(record.location.coords, dtype=float),
        matrix=matrix,
        inverse=inverse,
        orthogonal=orthogonal,
    )
    if orthogonal:
        local_jacobian = matrix @ record.jacobian @ inverse
        signs = np.where(np.arange(len(inverse)) < record.index, -1.0, 1.0)
        energy_rate = np.diag(signs) @ local_jacobian
        symmetric = energy_rate + energy_rate.T
        if float(np.max(np.linalg.eigvalsh(symmetric))) >= 0.0:
            raise HyperbolicityError(
                f"local quadratic does not decrease along the linear flow at {record.location.coords}",
                location=record.location,
            )
        logger.warning(f"Using an orthogonal invariant-subspace frame at {record.location.coords}")
    radius = linearization_radius(system, record.location, record.jacobian, neighbours)
    return frame, radius


@dataclass(frozen=True, eq=False)
class LocalMorseChart:
    """Local energy function c - |x_u|^2 + |x_s|^2 in scaled frame coordinates."""

    frame: ChartFrame
    index: int
    level: float
    scale: float
    ball: float = constants.CHART_BALL

    def coordinates(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        return self.frame.to_local(charts, coords) / self.scale

    def unstable_sq(self, local: np.ndarray) -> np.ndarray:
        return np.sum(local[:, : self.index] ** 2, axis=1)

    def stable_sq(self, local: np.ndarray) -> np.ndarray:
        return np.sum(local[:, self.index:] ** 2, axis=1)

    def evaluate_local(self, local: np.ndarray) -> np.ndarray:
        local = np.atleast_2d(local)
        return self.level - self.unstable_sq(local) + self.stable_sq(local)

    def evaluate(self, charts: np.ndarray, coords: np.ndarray, strict: bool = True) -> np.ndarray:
        local = self.coordinates(charts, coords)
        if strict:
            with np.errstate(invalid="ignore"):
                outside = ~(np.linalg.norm(local, axis=1) <= self.ball * (1.0 + 1e-12))
            if np.any(outside):
                raise OutOfChartError(
                    f"point {np.atleast_2d(coords)[np.argmax(outside)].tolist()} lies outside the chart ball "
                    f"of the fixed point at {self.frame.origin.tolist()}"
                )
        return self.evaluate_local(local)

    def point_at(self, local: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.frame.from_local(self.scale * np.atleast_2d(local))

    def at_level(self, level: float) -> "LocalMorseChart":
        return replace(self, level=float(level))

    def rescaled(self, factor: float) -> "LocalMorseChart":
        return replace(self, scale=self.scale * factor)


def local_morse(record, level: float, scale: float = None, ball: float = constants.CHART_BALL) -> LocalMorseChart:
    """Local Morse chart at `record` with value `level` at the fixed point.

    The default scale fits the chart ball |x| <= ball inside the ball of
    radius r_p around the fixed point.
    """
    if scale is None:
        scale = record.r_p / (record.frame.stretch * ball)
    return LocalMorseChart(frame=record.frame, index=record.index, level=float(level), scale=float(scale), ball=ball)
