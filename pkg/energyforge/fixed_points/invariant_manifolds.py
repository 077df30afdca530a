"""Numerical traces of stable and unstable manifolds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from energyforge import constants
from energyforge.fixed_points.detect import FixedPointRecord, locations
from energyforge.manifold_flow.integrator import BACKWARD, FORWARD, TrajectorySegment, trace_batch
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import logger

STABLE = "stable"
UNSTABLE = "unstable"


@dataclass(frozen=True, eq=False)
class InvariantManifoldTrace:
    owner: int
    stability: str
    branches: Tuple[TrajectorySegment, ...]
    # fixed point each branch arrives at; None when truncated or escaped
    limits: Tuple[Optional[int], ...]

    def samples(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self.branches:
            return np.empty(0, dtype=int), np.empty((0, 0))
        charts = np.concatenate([b.charts for b in self.branches])
        coords = np.concatenate([b.coords for b in self.branches], axis=0)
        return charts, coords

    @property
    def escaped(self) -> bool:
        return any(b.escaped for b in self.branches)


def _nearest(system: FlowSystem, records: Sequence[FixedPointRecord], charts, coords, exclude: int):
    """Index of and distance to the nearest record other than `exclude`, per point."""
    best = np.full(len(charts), np.inf)
    which = np.full(len(charts), -1, dtype=int)
    fixed_charts, fixed_coords = locations(records)
    for j in range(len(records)):
        if j == exclude:
            continue
        gap = system.manifold.distance(
            charts, coords, np.full(len(charts), fixed_charts[j]), np.repeat(fixed_coords[j][None, :], len(charts), axis=0)
        )
        closer = gap < best
        best[closer] = gap[closer]
        which[closer] = j
    return which, best


def trace_invariant_manifold(
    system: FlowSystem,
    records: Sequence[FixedPointRecord],
    owner: int,
    stability: str,
    t_max: float = constants.TRACE_T_MAX,
) -> InvariantManifoldTrace:
    """Trace the stable or unstable manifold of `records[owner]`.

    One branch starts at each of p +- BRANCH_OFFSET * e along every
    eigen-direction e of the chosen subspace and is integrated forward
    (unstable) or backward (stable) until it comes within BRANCH_ARRIVAL_TOL
    of another fixed point, leaves the domain or reaches t_max.
    """
    record = records[owner]
    columns = range(record.index) if stability == UNSTABLE else range(record.index, record.dimension)
    directions = [record.frame.inverse[:, k] / np.linalg.norm(record.frame.inverse[:, k]) for k in columns]
    if not directions:
        return InvariantManifoldTrace(owner, stability, (), ())

    offsets = constants.BRANCH_OFFSET * np.array([s * d for d in directions for s in (1.0, -1.0)])
    charts, coords = system.manifold.from_displacement(record.location.chart, record.location.coords, offsets)

    def arrived(c, y):
        _, gap = _nearest(system, records, c, y, exclude=owner)
        return gap < constants.BRANCH_ARRIVAL_TOL

    direction = FORWARD if stability == UNSTABLE else BACKWARD
    branches = trace_batch(system, charts, coords, direction, t_max, stop=arrived)

    ends_c = np.array([b.charts[-1] for b in branches])
    ends_y = np.array([b.coords[-1] for b in branches])
    which, gap = _nearest(system, records, ends_c, ends_y, exclude=owner)
    limits = tuple(
        int(j) if (g < constants.BRANCH_ARRIVAL_TOL and not b.escaped) else None
        for j, g, b in zip(which, gap, branches)
    )
    return InvariantManifoldTrace(owner, stability, tuple(branches), limits)


def trace_all(
    system: FlowSystem, records: Sequence[FixedPointRecord], t_max: float = constants.TRACE_T_MAX
) -> List[Tuple[InvariantManifoldTrace, InvariantManifoldTrace]]:
    """(stable, unstable) traces of every fixed point."""
    traces = []
    for owner, record in enumerate(records):
        stable = trace_invariant_manifold(system, records, owner, STABLE, t_max)
        unstable = trace_invariant_manifold(system, records, owner, UNSTABLE, t_max)
        logger.info(
            f"{record.kind} {owner}: unstable branches end at {list(unstable.limits)}, "
            f"stable branches start from {list(stable.limits)}"
        )
        traces.append((stable, unstable))
    return traces
