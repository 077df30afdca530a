"""Fixed point detection and classification."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize

from energyforge import constants
from energyforge.chain_recurrence.cover import BoxCover
from energyforge.errors import HyperbolicityError
from energyforge.fixed_points.charts import ChartFrame, build_chart
from energyforge.manifold_flow.manifolds import ChartPoint
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import chunk_slices, logger, parallel_map

KINDS = ("sink", "saddle", "source")


def kind_of(index: int, dimension: int) -> str:
    if index == 0:
        return "sink"
    if index == dimension:
        return "source"
    return "saddle"


@dataclass(frozen=True, eq=False)
class FixedPointRecord:
    """A hyperbolic zero of the field with its linearization.

    `index` counts eigenvalues with positive real part. `frame` and `r_p`
    are filled in once every fixed point is known.
    """

    location: ChartPoint
    index: int
    kind: str
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    frame: Optional[ChartFrame] = None
    r_p: Optional[float] = None

    @property
    def dimension(self) -> int:
        return self.jacobian.shape[0]

    def describe(self) -> dict:
        return {
            "chart": self.location.chart,
            "coords": [float(c) for c in self.location.coords],
            "index": self.index,
            "kind": self.kind,
            "eigenvalues": [[float(mu.real), float(mu.imag)] for mu in self.eigenvalues],
            "r_p": None if self.r_p is None else float(self.r_p),
        }


def jacobian(system: FlowSystem, location: ChartPoint, step: float = constants.JACOBIAN_STEP) -> np.ndarray:
    """Central-difference Jacobian of the field in the chart of `location`."""
    n = system.dimension
    base = np.asarray(location.coords, dtype=float)
    offsets = step * np.eye(n)
    points = np.concatenate([base + offsets, base - offsets])
    v = system.velocity(np.full(2 * n, location.chart), points)
    return ((v[:n] - v[n:]) / (2.0 * step)).T


def classify(system: FlowSystem, location: ChartPoint, tol_hyp: float = constants.HYPERBOLICITY_TOL) -> FixedPointRecord:
    """Linearize at a zero and count unstable eigenvalues.

    Raises:
        HyperbolicityError: some eigenvalue has |Re| < tol_hyp.
    """
    matrix = jacobian(system, location)
    mu = np.linalg.eigvals(matrix)
    weakest = float(np.min(np.abs(mu.real)))
    if weakest < tol_hyp:
        raise HyperbolicityError(
            f"non-hyperbolic fixed point at {tuple(round(c, 8) for c in location.coords)} "
            f"(chart {location.chart}): eigenvalues {np.round(mu, 6).tolist()}, min |Re| = {weakest:.3g}",
            location=location,
        )
    index = int(np.sum(mu.real > 0))
    order = np.lexsort((mu.imag, -mu.real))
    return FixedPointRecord(
        location=location,
        index=index,
        kind=kind_of(index, len(mu)),
        jacobian=matrix,
        eigenvalues=mu[order],
    )


def _candidate_boxes(system: FlowSystem, cover: BoxCover) -> np.ndarray:
    """Boxes on whose samples every field component takes both signs (or zero)."""
    owner, charts, coords = cover.sample_points(constants.DEFAULT_SAMPLES_PER_BOX)
    per_box = len(owner) // cover.size
    v = system.velocity(charts, coords).reshape(cover.size, per_box, -1)
    changes = np.all((v.min(axis=1) <= 0.0) & (v.max(axis=1) >= 0.0), axis=1)
    return np.flatnonzero(changes)


def _refine(system: FlowSystem, chart: int, start: np.ndarray) -> Optional[np.ndarray]:
    def residual(y):
        return system.velocity(np.array([chart]), y[None, :])[0]

    solution = optimize.root(residual, start, method="hybr", options={"xtol": 1e-14})
    root = solution.x
    if not np.all(np.isfinite(root)):
        return None
    if float(np.linalg.norm(residual(root))) > constants.FIXED_POINT_TOL:
        return None
    return root


def find_fixed_points(
    system: FlowSystem,
    cover: BoxCover,
    tol_hyp: float = constants.HYPERBOLICITY_TOL,
    workers: int = 1,
) -> List[FixedPointRecord]:
    """Locate, classify and chart every zero of the field.

    Candidates are boxes where all field components change sign; each is
    refined by a damped Newton iteration from the box center. Zeros closer
    than DUPLICATE_TOL are merged. Records are sorted by index, then chart,
    then coordinates.

    Raises:
        HyperbolicityError: a zero is not hyperbolic.
    """
    manifold = system.manifold
    candidates = _candidate_boxes(system, cover)
    centers_charts, centers = cover.centers(candidates)
    logger.info(f"Refining {len(candidates)} candidate boxes for fixed points")

    def refine(part: slice):
        return [_refine(system, int(c), y) for c, y in zip(centers_charts[part], centers[part])]

    roots = [r for chunk in parallel_map(refine, chunk_slices(len(candidates), 64), workers) for r in chunk]

    zeros: List[ChartPoint] = []
    for chart, root in zip(centers_charts.tolist(), roots):
        if root is None:
            continue
        charts, coords = manifold.normalize(np.array([chart]), root[None, :])
        if manifold.outside(charts, coords)[0]:
            continue
        point = ChartPoint.of(charts[0], coords[0])
        if zeros:
            known_c = np.array([z.chart for z in zeros])
            known_y = np.array([z.coords for z in zeros])
            gaps = manifold.distance(np.repeat(charts, len(zeros)), np.repeat(coords, len(zeros), axis=0), known_c, known_y)
            if float(np.min(gaps)) < constants.DUPLICATE_TOL:
                continue
        zeros.append(point)

    records = [classify(system, point, tol_hyp) for point in zeros]
    records.sort(key=lambda r: (r.index, r.location.chart, r.location.coords))
    charted = []
    for record in records:
        neighbours = [other.location for other in records if other is not record]
        frame, radius = build_chart(record, system, neighbours)
        charted.append(replace(record, frame=frame, r_p=radius))

    summary = ", ".join(f"{r.kind}@{tuple(round(c, 4) for c in r.location.coords)}" for r in charted)
    logger.info(f"Found {len(charted)} fixed points: {summary}")
    return charted


def locations(records: Sequence[FixedPointRecord]):
    """Charts and coordinates of the records as two aligned arrays."""
    charts = np.array([r.location.chart for r in records], dtype=int)
    coords = np.array([r.location.coords for r in records], dtype=float).reshape(len(records), -1)
    return charts, coords
