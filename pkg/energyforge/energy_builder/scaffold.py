"""
Scaffolds for extending the energy function over one more fixed point.

A saddle scaffold collects, in the saddle's local chart x = (x_u, x_s):

    lower level     x_u^2 - x_s^2 = 1/3   (two branches inside the chart ball)
    attaching arcs  the part of the lower level with x_s^2 <= 1/4
    arc ends        x_u^2 = 7/12, x_s^2 = 1/4   (four points)
    arc midpoints   x_s = 0   (two points on the unstable manifold)

The attaching arcs are pushed forward onto the boundary of the previous
sublevel set, giving their footprints there together with the entry time
t_1 of every sample. Around each footprint a collar blends t_1 into the
unit time used on the rest of the facing boundary components. The level
profile is the chart value along the backward orbit of an arc end, from
the lower level up to the upper level at time t_2.

A source scaffold is the sphere |x|^2 = 1/3 around the source and the set
of boundary components its forward orbits reach.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, FrozenSet, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from energyforge import constants
from energyforge.energy_builder.grid import EnergyGrid
from energyforge.energy_builder.level_sets import BoundaryContours, count_components, extract_contours, point_rows
from energyforge.errors import EventNotFoundError, ScaffoldError
from energyforge.fixed_points.charts import LocalMorseChart, local_morse
from energyforge.fixed_points.detect import FixedPointRecord
from energyforge.fixed_points.invariant_manifolds import InvariantManifoldTrace
from energyforge.manifold_flow.integrator import BACKWARD, FORWARD, flow_batch, hit_time, hit_times
from energyforge.manifold_flow.manifolds import ChartPoint
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import logger

EventFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

LOWER_SQ = constants.LEVEL_STEP
END_UNSTABLE_SQ = constants.LEVEL_STEP + constants.D_RADIUS_SQ


def finite_event(values: np.ndarray, fill: float) -> np.ndarray:
    """Replace non-finite event values (far side of a stereographic chart) by `fill`."""
    values = np.asarray(values, dtype=float)
    return np.where(np.isfinite(values), values, fill)


def chart_event(chart: LocalMorseChart, level: float, fill: float) -> EventFunction:
    def g(charts, coords):
        with np.errstate(over="ignore", invalid="ignore"):
            return finite_event(chart.evaluate(charts, coords, strict=False) - level, fill)

    return g


# ── Level profile ──


@dataclass(frozen=True, eq=False)
class LevelProfile:
    """Chart value along the backward orbit of an arc end, as a function of backward time."""

    t2: float
    times: np.ndarray
    values: np.ndarray
    spline: CubicSpline

    def __call__(self, t) -> np.ndarray:
        return self.spline(np.clip(np.asarray(t, dtype=float), 0.0, self.t2))


def level_profile(system: FlowSystem, chart: LocalMorseChart, end_local, stage: int) -> LevelProfile:
    """Tabulate psi(t) from an arc end up to the upper level.

    Raises:
        ScaffoldError: the backward orbit never reaches the upper level, or psi is not increasing.
    """
    charts, coords = chart.point_at(np.asarray(end_local, dtype=float))
    start = ChartPoint.of(charts[0], coords[0])
    upper = chart.level + constants.LEVEL_STEP
    try:
        t2, _ = hit_time(system, start, chart_event(chart, upper, fill=-1.0), BACKWARD, constants.HIT_T_MAX)
    except EventNotFoundError:
        raise ScaffoldError("backward orbit of an arc end never reaches the upper level", stage=stage) from None
    times = np.linspace(0.0, t2, constants.PSI_SAMPLES)
    values = [float(chart.evaluate(charts, coords, strict=False)[0])]
    for t in times[1:]:
        c, y = flow_batch(system, charts, coords, -t)
        values.append(float(chart.evaluate(c, y, strict=False)[0]))
    values = np.array(values)
    if not np.all(np.diff(values) > 0):
        raise ScaffoldError("level profile along the arc end orbit is not increasing", stage=stage)
    return LevelProfile(t2=float(t2), times=times, values=values, spline=CubicSpline(times, values))


# ── Attaching arcs ──


@dataclass(frozen=True, eq=False)
class ArcFootprint:
    """Image of one attaching arc on a facing boundary component.

    Positions are measured along the component from the image of the arc
    end with x_s = -1/2, in the direction of the other end.
    """

    component: int
    start: float
    direction: float
    perimeter: float
    positions: np.ndarray
    t1: np.ndarray
    collar: float

    @property
    def length(self) -> float:
        return float(self.positions[-1])

    def relative(self, position: np.ndarray) -> np.ndarray:
        if self.perimeter <= 0:
            return np.zeros_like(position)
        return np.mod(self.direction * (position - self.start), self.perimeter)

    @property
    def ends(self) -> Tuple[float, float]:
        end = self.start + self.direction * self.length
        return float(self.start), float(np.mod(end, self.perimeter))


def _circular_gap(a: float, b: float, perimeter: float) -> float:
    d = abs(a - b) % perimeter
    return min(d, perimeter - d)


def _footprint(
    component: int, positions: np.ndarray, t1: np.ndarray, perimeter: float, stage: int
) -> ArcFootprint:
    steps = np.diff(positions)
    steps = steps - perimeter * np.round(steps / perimeter)
    total = float(np.sum(steps))
    if total == 0.0:
        raise ScaffoldError("attaching arc collapses to a point on the boundary", stage=stage)
    direction = 1.0 if total > 0 else -1.0
    relative = np.maximum.accumulate(np.concatenate([[0.0], np.cumsum(direction * steps)]))
    return ArcFootprint(
        component=component,
        start=float(positions[0]),
        direction=direction,
        perimeter=perimeter,
        positions=relative,
        t1=t1,
        collar=0.0,
    )


def _with_collars(footprints, stage: int):
    """Collar depth min(perimeter / 4, gap / 3), the gap running to the nearest other footprint end."""
    result = []
    for arc in footprints:
        depth = min(arc.perimeter / 4.0, (arc.perimeter - arc.length) / 3.0)
        for other in footprints:
            if other is arc or other.component != arc.component:
                continue
            if np.any(arc.relative(np.array(other.ends)) <= arc.length):
                raise ScaffoldError("attaching arcs overlap on a boundary component", stage=stage)
            gap = min(_circular_gap(a, b, arc.perimeter) for a in arc.ends for b in other.ends)
            depth = min(depth, gap / 3.0)
        if depth <= 0:
            raise ScaffoldError("no room for a collar around an attaching arc", stage=stage)
        result.append(replace(arc, collar=float(depth)))
    return tuple(result)


# ── Saddle scaffold ──


def attaching_arc_samples(count: int = constants.SCAFFOLD_SAMPLES) -> np.ndarray:
    """Local samples of the two attaching arcs, shape (2, count, 2), x_s running from -1/2 to 1/2."""
    half = np.sqrt(constants.D_RADIUS_SQ)
    x_s = np.linspace(-half, half, count)
    x_u = np.sqrt(LOWER_SQ + x_s * x_s)
    return np.stack([np.column_stack([sign * x_u, x_s]) for sign in (1.0, -1.0)])


def lower_level_samples(count: int = 4 * constants.SCAFFOLD_SAMPLES, ball: float = constants.CHART_BALL) -> np.ndarray:
    """Local samples of the lower level set inside the chart ball."""
    reach = np.sqrt(max(ball * ball - LOWER_SQ, 0.0) / 2.0)
    x_s = np.linspace(-reach, reach, count)
    x_u = np.sqrt(LOWER_SQ + x_s * x_s)
    return np.concatenate([np.column_stack([sign * x_u, x_s]) for sign in (1.0, -1.0)])


def arc_ends() -> np.ndarray:
    u, s = np.sqrt(END_UNSTABLE_SQ), np.sqrt(constants.D_RADIUS_SQ)
    return np.array([[u, s], [u, -s], [-u, s], [-u, -s]])


def arc_midpoints() -> np.ndarray:
    u = np.sqrt(LOWER_SQ)
    return np.array([[u, 0.0], [-u, 0.0]])


def _crossings(offsets: np.ndarray, values: np.ndarray, level: float, closed: bool, keep: np.ndarray) -> np.ndarray:
    """Points where `values` passes `level` between consecutive samples, for pairs touching `keep`."""
    if len(values) < 2:
        return np.zeros((0, offsets.shape[1]))
    a = np.arange(len(values) - 1)
    b = a + 1
    if closed:
        a, b = np.append(a, len(values) - 1), np.append(b, 0)
    with np.errstate(invalid="ignore"):
        above = values > level
        pairs = (above[a] != above[b]) & np.isfinite(values[a]) & np.isfinite(values[b]) & (keep[a] | keep[b])
    a, b = a[pairs], b[pairs]
    frac = (level - values[a]) / (values[b] - values[a])
    return offsets[a] + frac[:, None] * (offsets[b] - offsets[a])


def saddle_topology(
    grid: EnergyGrid, values: np.ndarray, chart: LocalMorseChart, unstable: InvariantManifoldTrace
) -> Dict[str, int]:
    """Component counts of the scaffold of a saddle, read back from built node values.

    lower level     pieces of {phi = i - 1/3} inside the chart ball
    attaching arcs  their part with x_s^2 <= 1/4
    arc ends        points of the lower level where x_s^2 = 1/4
    arc midpoints   points where the traced unstable branches cross the lower level
    """
    manifold = grid.manifold
    level = chart.level - constants.LEVEL_STEP
    origin = (chart.frame.chart, chart.frame.origin)
    inside_parts, arc_parts, end_parts = [], [], []
    for contour in extract_contours(grid, values, level).contours:
        with np.errstate(all="ignore"):
            local = chart.coordinates(contour.charts, contour.coords)
            offsets = manifold.displacement(*origin, contour.charts, contour.coords)
            inside = np.linalg.norm(local, axis=1) <= chart.ball
            stable_sq = np.sum(local[:, chart.index :] ** 2, axis=1)
        inside_parts.append(offsets[inside])
        arc_parts.append(offsets[inside & (stable_sq <= constants.D_RADIUS_SQ)])
        end_parts.append(_crossings(offsets, stable_sq, constants.D_RADIUS_SQ, contour.closed, inside))

    mid_parts = []
    for branch in unstable.branches:
        with np.errstate(all="ignore"):
            offsets = manifold.displacement(*origin, branch.charts, branch.coords)
        along = grid.interpolate(values, branch.charts, branch.coords)
        mid_parts.append(_crossings(offsets, along, level, False, np.ones(len(along), dtype=bool)))

    def components(parts) -> int:
        parts = [p[np.all(np.isfinite(p), axis=1)] for p in parts]
        parts = [p for p in parts if len(p)]
        return count_components(np.concatenate(parts), grid.spacing) if parts else 0

    return {
        "lower_level": components(inside_parts),
        "attaching_arcs": components(arc_parts),
        "arc_ends": components(end_parts),
        "arc_midpoints": components(mid_parts),
    }


@dataclass(frozen=True, eq=False)
class SaddleScaffold:
    stage: int
    chart: LocalMorseChart
    footprints: Tuple[ArcFootprint, ...]
    facing: FrozenSet[int]
    profile: LevelProfile
    rescales: int
    midpoint_t1: Tuple[float, ...]

    def time_cap(self, component: np.ndarray, position: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(T_1, on-footprint mask) at located boundary points.

        T_1 is t_1 on a footprint, L_1 = t_1(end) + tau (1 - t_1(end)) across
        its collar (tau = collar parameter, 0 at the arc end) and 1 elsewhere.
        """
        cap = np.ones(len(component))
        on_arc = np.zeros(len(component), dtype=bool)
        for arc in self.footprints:
            mine = np.flatnonzero(component == arc.component)
            if len(mine) == 0:
                continue
            rel = arc.relative(position[mine])
            inside = rel <= arc.length
            cap[mine[inside]] = np.interp(rel[inside], arc.positions, arc.t1)
            on_arc[mine[inside]] = True
            before = ~inside & (rel >= arc.perimeter - arc.collar)
            tau = (arc.perimeter - rel[before]) / arc.collar
            cap[mine[before]] = arc.t1[0] + tau * (1.0 - arc.t1[0])
            after = ~inside & ~before & (rel <= arc.length + arc.collar)
            tau = (rel[after] - arc.length) / arc.collar
            cap[mine[after]] = arc.t1[-1] + tau * (1.0 - arc.t1[-1])
        return cap, on_arc

    def geometry(self) -> Dict[str, list]:
        """Scaffold sample sets mapped to manifold charts."""
        manifold = self.chart.frame.manifold
        sets = {
            "lower_level": lower_level_samples(constants.SCAFFOLD_SAMPLES, self.chart.ball),
            "attaching_arcs": attaching_arc_samples().reshape(-1, 2),
            "arc_ends": arc_ends(),
            "arc_midpoints": arc_midpoints(),
        }
        return {name: point_rows(manifold, *self.chart.point_at(local)) for name, local in sets.items()}

    def describe(self) -> dict:
        return {
            "kind": "saddle",
            "stage": self.stage,
            "chart_scale": float(self.chart.scale),
            "rescales": self.rescales,
            "t2": float(self.profile.t2),
            "facing_components": sorted(int(c) for c in self.facing),
            "footprints": [
                {
                    "component": int(arc.component),
                    "length": float(arc.length),
                    "collar": float(arc.collar),
                    "t1_min": float(np.min(arc.t1)),
                    "t1_max": float(np.max(arc.t1)),
                }
                for arc in self.footprints
            ],
            "midpoint_t1": [float(t) for t in self.midpoint_t1],
        }


def _push_to_boundary(system, chart, local, boundary: EventFunction, contours: BoundaryContours, stage: int):
    charts, coords = chart.point_at(local)
    hits = hit_times(system, charts, coords, boundary, FORWARD, constants.HIT_T_MAX)
    if not np.all(hits.found):
        raise ScaffoldError(
            f"{int(np.sum(~hits.found))} forward orbits from the scaffold miss the previous boundary", stage=stage
        )
    if not np.all(hits.times > 0):
        raise ScaffoldError("scaffold samples already lie on the previous boundary (t_1 <= 0)", stage=stage)
    component, position, distance = contours.locate(hits.charts, hits.coords)
    far = distance > 2.0 * contours.grid.spacing
    if np.any(far):
        raise ScaffoldError(
            f"{int(np.sum(far))} scaffold hits lie off the extracted boundary contours", stage=stage
        )
    return hits.times, component, position


def _fit_chart(chart: LocalMorseChart, probe: np.ndarray, boundary: EventFunction, stage: int):
    """Halve the chart scale until every probe lies outside the previous sublevel set."""
    for rescales in range(constants.MAX_RESCALES + 1):
        charts, coords = chart.point_at(probe)
        if np.all(boundary(charts, coords) > 0):
            return chart, rescales
        chart = chart.rescaled(0.5)
    raise ScaffoldError(
        f"scaffold still meets the previous sublevel set after {constants.MAX_RESCALES} chart rescales", stage=stage
    )


def saddle_scaffold(
    system: FlowSystem,
    record: FixedPointRecord,
    stage: int,
    boundary: EventFunction,
    contours: BoundaryContours,
) -> SaddleScaffold:
    """Scaffold for the saddle p_i = `record` at `stage` = i.

    `boundary` is the event function of the previous sublevel set (negative
    inside) and `contours` its boundary components.
    """
    if record.dimension != 2 or record.index != 1:
        raise ScaffoldError(f"saddle scaffolds exist for index-1 points on surfaces, got index {record.index}", stage)
    arcs = attaching_arc_samples()
    chart, rescales = _fit_chart(local_morse(record, stage), arcs.reshape(-1, 2), boundary, stage)
    if rescales:
        logger.info(f"Stage {stage}: saddle chart rescaled {rescales} times to clear the previous sublevel set")

    footprints = []
    for branch in arcs:
        t1, component, position = _push_to_boundary(system, chart, branch, boundary, contours, stage)
        if len(np.unique(component)) != 1:
            raise ScaffoldError("an attaching arc lands on more than one boundary component", stage=stage)
        c = int(component[0])
        footprints.append(_footprint(c, position, t1, contours.contours[c].perimeter, stage))
    footprints = _with_collars(footprints, stage)
    midpoint_t1, _, _ = _push_to_boundary(system, chart, arc_midpoints(), boundary, contours, stage)

    ends = arc_ends()
    profile = level_profile(system, chart, ends[0], stage)
    for end in ends[1:]:
        other = level_profile(system, chart, end, stage)
        spread = float(np.max(np.abs(other(profile.times) - profile.values)))
        if spread > constants.PSI_CONSTANCY_TOL:
            logger.warning(f"Stage {stage}: level profile differs by {spread:.2e} between arc ends")

    scaffold = SaddleScaffold(
        stage=stage,
        chart=chart,
        footprints=footprints,
        facing=frozenset(arc.component for arc in footprints),
        profile=profile,
        rescales=rescales,
        midpoint_t1=tuple(float(t) for t in midpoint_t1),
    )
    logger.info(
        f"Stage {stage}: saddle scaffold with t_2={profile.t2:.5f}, "
        f"facing components {sorted(scaffold.facing)} of {len(contours)}"
    )
    return scaffold


# ── Source scaffold ──


def source_sphere_samples(dimension: int, count: int = constants.SCAFFOLD_SAMPLES) -> np.ndarray:
    radius = np.sqrt(constants.LEVEL_STEP)
    if dimension == 1:
        return np.array([[radius], [-radius]])
    angles = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass(frozen=True, eq=False)
class SourceScaffold:
    stage: int
    chart: LocalMorseChart
    facing: FrozenSet[int]
    rescales: int
    t1_range: Tuple[float, float]

    def geometry(self) -> Dict[str, list]:
        manifold = self.chart.frame.manifold
        sphere = source_sphere_samples(manifold.dimension)
        return {"sphere": point_rows(manifold, *self.chart.point_at(sphere))}

    def sphere_event(self) -> EventFunction:
        """Positive inside the sphere |x|^2 = 1/3, negative outside."""
        return chart_event(self.chart, self.chart.level - constants.LEVEL_STEP, fill=-1.0)

    def describe(self) -> dict:
        return {
            "kind": "source",
            "stage": self.stage,
            "chart_scale": float(self.chart.scale),
            "rescales": self.rescales,
            "facing_components": sorted(int(c) for c in self.facing),
            "t1_min": float(self.t1_range[0]),
            "t1_max": float(self.t1_range[1]),
        }


def source_scaffold(
    system: FlowSystem,
    record: FixedPointRecord,
    stage: int,
    boundary: EventFunction,
    contours: BoundaryContours,
) -> SourceScaffold:
    sphere = source_sphere_samples(record.dimension)
    probe = np.concatenate([sphere, np.zeros((1, record.dimension))])
    chart, rescales = _fit_chart(local_morse(record, stage), probe, boundary, stage)
    if rescales:
        logger.info(f"Stage {stage}: source chart rescaled {rescales} times to clear the previous sublevel set")
    t1, component, _ = _push_to_boundary(system, chart, sphere, boundary, contours, stage)
    return SourceScaffold(
        stage=stage,
        chart=chart,
        facing=frozenset(int(c) for c in component),
        rescales=rescales,
        t1_range=(float(np.min(t1)), float(np.max(t1))),
    )
