"""
Adaptive Runge-Kutta-Fehlberg integration of flows on charted manifolds.

All routines work on batches: `charts` of shape (m,) and `coords` of shape
(m, n). A batch shares one adaptive step size, which keeps every vector
field evaluation a single numpy call over the active points. Points that
are done (event found, stop condition met) drop out of the batch.

The 4(5) pair advances with the fifth-order weights and uses the embedded
difference as the local error estimate. Accepted steps are normalized
through the manifold (torus wrap-around, sphere chart switching) and never
exceed the system's max step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from energyforge import constants
from energyforge.errors import (
    DomainExitError,
    EventNotFoundError,
    EventPreconditionError,
    IntegrationError,
)
from energyforge.manifold_flow.manifolds import ChartPoint
from energyforge.manifold_flow.system import FlowSystem

FORWARD = "forward"
BACKWARD = "backward"

EventFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def direction_sign(direction: str) -> float:
    if direction == FORWARD:
        return 1.0
    if direction == BACKWARD:
        return -1.0
    raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}, got: {direction!r}")


@dataclass(frozen=True)
class TrajectorySegment:
    """Samples (time, chart point) of one orbit, times strictly monotone."""

    times: np.ndarray
    charts: np.ndarray
    coords: np.ndarray
    direction: str
    escaped: bool = False

    def __len__(self) -> int:
        return len(self.times)

    def point(self, index: int) -> ChartPoint:
        return ChartPoint.of(self.charts[index], self.coords[index])

    @property
    def end(self) -> ChartPoint:
        return self.point(-1)


@dataclass
class HitResult:
    """Outcome of a batched event search; `found[i]` is False where g kept its sign."""

    found: np.ndarray
    times: np.ndarray
    charts: np.ndarray
    coords: np.ndarray


def rkf45_step(system: FlowSystem, charts: np.ndarray, y0: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """One Runge-Kutta-Fehlberg step per point with signed step sizes h.

    Returns the fifth-order update and the per-component error estimate.
    All stages stay in the starting chart of each point.
    """
    f = system.velocity
    h = np.reshape(h, (-1, 1))
    k1 = f(charts, y0)
    k2 = f(charts, y0 + 0.25 * h * k1)
    k3 = f(charts, y0 + 3.0 * h * k1 / 32.0 + 9.0 * h * k2 / 32.0)
    k4 = f(charts, y0 + 1932.0 * h * k1 / 2197.0 - 7200.0 * h * k2 / 2197.0 + 7296.0 * h * k3 / 2197.0)
    k5 = f(charts, y0 + 439.0 * h * k1 / 216.0 - 8.0 * h * k2 + 3680.0 * h * k3 / 513.0 - 845.0 * h * k4 / 4104.0)
    k6 = f(charts, y0 - 8.0 * h * k1 / 27.0 + 2.0 * h * k2 - 3544.0 * h * k3 / 2565.0
           + 1859.0 * h * k4 / 4104.0 - 11.0 * h * k5 / 40.0)
    y1 = y0 + 16.0 * h * k1 / 135.0 + 6656.0 * h * k3 / 12825.0 + 28561.0 * h * k4 / 56430.0 \
        - 9.0 * h * k5 / 50.0 + 2.0 * h * k6 / 55.0
    err = np.abs(h * k1 / 360.0 - 128.0 * h * k3 / 4275.0 - 2197.0 * h * k4 / 75240.0
                 + h * k5 / 50.0 + 2.0 * h * k6 / 55.0)
    return y1, err


AcceptHook = Callable[[float, float, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], Optional[np.ndarray]]


def _march(
    system: FlowSystem,
    charts: np.ndarray,
    coords: np.ndarray,
    sign: float,
    t_max: float,
    tol: Optional[float] = None,
    active: Optional[np.ndarray] = None,
    on_accept: Optional[AcceptHook] = None,
    exited: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Advance the active points by time t_max in direction `sign`.

    on_accept(t, h, idx, charts0, coords0, charts1, coords1) is called after
    every accepted step with the indices of the stepped points; it may
    return a boolean mask over idx of points that stay active.

    Points leaving a plane-disk raise DomainExitError unless an `exited`
    mask is given, in which case they are marked there and stop.
    """
    tol = system.tol if tol is None else tol
    charts = np.array(charts, dtype=int, copy=True)
    coords = np.array(np.atleast_2d(coords), dtype=float, copy=True)
    active = np.ones(len(charts), dtype=bool) if active is None else active.copy()
    manifold = system.manifold
    t = 0.0
    h = min(system.max_step, t_max)
    while t_max - t > 1e-15 and np.any(active):
        h = min(h, system.max_step, t_max - t)
        idx = np.flatnonzero(active)
        c0 = charts[idx]
        y0 = coords[idx]
        y1, err = rkf45_step(system, c0, y0, np.full(len(idx), sign * h))
        ratio = float(np.max(err / (tol * (1.0 + np.abs(y0)))))
        if not np.isfinite(ratio):
            ratio = 1e6
        if ratio <= 1.0:
            c1, y1 = manifold.normalize(c0, y1)
            left = manifold.outside(c1, y1)
            if np.any(left) and exited is None:
                where = tuple(np.round(y1[np.argmax(left)], 6))
                raise DomainExitError(f"orbit left the {manifold.kind} domain near {where} at t={sign * (t + h):.6g}")
            charts[idx] = c1
            coords[idx] = y1
            keep = on_accept(t, h, idx, c0, y0, c1, y1) if on_accept is not None else None
            t += h
            if keep is not None:
                active[idx[~keep]] = False
            if np.any(left):
                exited[idx[left]] = True
                active[idx[left]] = False
        factor = constants.STEP_SAFETY * (max(ratio, 1e-12) ** -0.2)
        h = h * min(constants.STEP_GROW_MAX, max(constants.STEP_SHRINK_MIN, factor))
        if h < constants.MIN_STEP and t_max - t > constants.MIN_STEP:
            raise IntegrationError(f"step size underflow at t={sign * t:.6g}")
    return charts, coords


def flow_batch(
    system: FlowSystem,
    charts: np.ndarray,
    coords: np.ndarray,
    duration: float,
    tol: Optional[float] = None,
    exited: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Apply the time-`duration` map to every point of the batch.

    With an `exited` mask, points that leave a plane-disk are flagged there
    and keep their exit position instead of raising DomainExitError.
    """
    charts = np.asarray(charts, dtype=int)
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if duration == 0.0:
        return system.manifold.normalize(charts, coords)
    sign = 1.0 if duration > 0 else -1.0
    return _march(system, charts, coords, sign, abs(duration), tol, exited=exited)


def integrate(system: FlowSystem, start: ChartPoint, duration: float, tol: Optional[float] = None) -> TrajectorySegment:
    """Integrate one orbit for a signed duration, keeping every accepted step."""
    if tol is not None and tol <= 0:
        raise ValueError(f"tol must be positive, got: {tol!r}")
    charts, coords = start.as_arrays()
    charts, coords = system.manifold.normalize(charts, coords)
    sign = 1.0 if duration >= 0 else -1.0
    times: List[float] = [0.0]
    chart_samples: List[int] = [int(charts[0])]
    coord_samples: List[np.ndarray] = [coords[0].copy()]

    def record(t, h, idx, c0, y0, c1, y1):
        times.append(sign * (t + h))
        chart_samples.append(int(c1[0]))
        coord_samples.append(y1[0].copy())
        return None

    if duration != 0.0:
        _march(system, charts, coords, sign, abs(duration), tol, on_accept=record)
    return TrajectorySegment(
        times=np.array(times),
        charts=np.array(chart_samples, dtype=int),
        coords=np.array(coord_samples),
        direction=FORWARD if sign > 0 else BACKWARD,
    )


def trace_batch(
    system: FlowSystem,
    charts: np.ndarray,
    coords: np.ndarray,
    direction: str,
    t_max: float,
    stop: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> List[TrajectorySegment]:
    """Integrate several orbits, recording samples, until t_max or `stop`.

    stop(charts, coords) returns a mask of points that are finished; a
    finished orbit keeps its last sample as endpoint. Orbits leaving a
    plane-disk end there and are marked `escaped`.
    """
    sign = direction_sign(direction)
    charts, coords = system.manifold.normalize(np.asarray(charts, dtype=int), np.atleast_2d(coords))
    samples = [([0.0], [int(c)], [y.copy()]) for c, y in zip(charts, coords)]
    active = np.ones(len(charts), dtype=bool)
    if stop is not None:
        active &= ~stop(charts, coords)

    def record(t, h, idx, c0, y0, c1, y1):
        for j, i in enumerate(idx):
            samples[i][0].append(sign * (t + h))
            samples[i][1].append(int(c1[j]))
            samples[i][2].append(y1[j].copy())
        if stop is None:
            return None
        return ~stop(c1, y1)

    escaped = np.zeros(len(charts), dtype=bool)
    _march(system, charts, coords, sign, t_max, active=active, on_accept=record, exited=escaped)
    return [
        TrajectorySegment(np.array(ts), np.array(cs, dtype=int), np.array(ys), direction, bool(gone))
        for (ts, cs, ys), gone in zip(samples, escaped)
    ]


def _bisect_events(system, g, sign, t0, h, charts0, coords0, g0):
    """Shrink each bracket [t0, t0 + h] around a sign change of g."""
    lo = np.zeros(len(h))
    hi = h.copy()
    g_lo = g0.copy()
    tol = system.tol_event
    iterations = int(np.ceil(np.log2(max(float(np.max(h)), tol) / tol))) + 1
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        y_mid, _ = rkf45_step(system, charts0, coords0, sign * mid)
        c_mid, y_mid = system.manifold.normalize(charts0, y_mid)
        g_mid = g(c_mid, y_mid)
        same = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(same, mid, lo)
        g_lo = np.where(same, g_mid, g_lo)
        hi = np.where(same, hi, mid)
    y_hit, _ = rkf45_step(system, charts0, coords0, sign * hi)
    c_hit, y_hit = system.manifold.normalize(charts0, y_hit)
    return t0 + hi, c_hit, y_hit


def hit_times(
    system: FlowSystem,
    charts: np.ndarray,
    coords: np.ndarray,
    g: EventFunction,
    direction: str,
    t_max: float,
    allow_zero_start: bool = False,
) -> HitResult:
    """First times t in (0, t_max] with g(f^{+-t}(x)) = 0, for a batch of starts.

    Sign changes are bracketed during integration and located by bisection
    in time to the system's tol_event. With allow_zero_start, points where g
    already vanishes report time 0; otherwise they raise EventPreconditionError.
    """
    sign = direction_sign(direction)
    charts, coords = system.manifold.normalize(np.asarray(charts, dtype=int), np.atleast_2d(coords))
    m = len(charts)
    g_start = np.asarray(g(charts, coords), dtype=float)
    zero = g_start == 0.0
    if np.any(zero) and not allow_zero_start:
        raise EventPreconditionError("event function vanishes at the start point")
    found = zero.copy()
    times = np.where(zero, 0.0, np.nan)
    hit_charts = charts.copy()
    hit_coords = coords.copy()

    prev_g = g_start.copy()
    bracket_t = np.zeros(m)
    bracket_h = np.zeros(m)
    bracket_c = charts.copy()
    bracket_y = coords.copy()
    bracket_g = np.zeros(m)
    bracketed = np.zeros(m, dtype=bool)

    def detect(t, h, idx, c0, y0, c1, y1):
        g1 = np.asarray(g(c1, y1), dtype=float)
        crossed = (np.sign(g1) != np.sign(prev_g[idx])) | (g1 == 0.0)
        hit = idx[crossed]
        bracketed[hit] = True
        bracket_t[hit] = t
        bracket_h[hit] = h
        bracket_c[hit] = c0[crossed]
        bracket_y[hit] = y0[crossed]
        bracket_g[hit] = prev_g[hit]
        prev_g[idx] = g1
        return ~crossed

    _march(system, charts, coords, sign, t_max, active=~zero, on_accept=detect)

    idx = np.flatnonzero(bracketed)
    if len(idx):
        t_hit, c_hit, y_hit = _bisect_events(
            system, g, sign, bracket_t[idx], bracket_h[idx], bracket_c[idx], bracket_y[idx], bracket_g[idx]
        )
        found[idx] = True
        times[idx] = t_hit
        hit_charts[idx] = c_hit
        hit_coords[idx] = y_hit
    return HitResult(found=found, times=times, charts=hit_charts, coords=hit_coords)


def hit_time(
    system: FlowSystem,
    start: ChartPoint,
    g: EventFunction,
    direction: str,
    t_max: float,
) -> Tuple[float, ChartPoint]:
    """First crossing time of g along one orbit and the crossing point.

    Raises:
        EventPreconditionError: g(start) == 0.
        EventNotFoundError: g keeps its sign on (0, t_max].
    """
    charts, coords = start.as_arrays()
    result = hit_times(system, charts, coords, g, direction, t_max)
    if not result.found[0]:
        raise EventNotFoundError(f"no sign change of the event function within t_max={t_max}")
    return float(result.times[0]), ChartPoint.of(result.charts[0], result.coords[0])
