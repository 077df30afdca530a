"""
Numerical checks of a built energy function.

Every check returns a CheckSection with its thresholds, its results and a
pass/fail flag. Failures are reported, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from energyforge import constants
from energyforge.chain_recurrence.analysis import ChainAnalysis
from energyforge.energy_builder.field import EnergyField
from energyforge.energy_builder.state import LOCAL, V3
from energyforge.fixed_points.detect import FixedPointRecord, locations
from energyforge.manifold_flow.integrator import BACKWARD, FORWARD, flow_batch, hit_times
from energyforge.manifold_flow.manifolds import FlatPeriodic, Manifold, Sphere
from energyforge.manifold_flow.system import FlowSystem
from energyforge.smale_order.order import OrderedSpectrum
from energyforge.utils import chunk_slices, logger, parallel_map, stack_chunks


@dataclass
class CheckSection:
    name: str
    passed: bool
    thresholds: dict
    results: dict
    problems: List[str] = field(default_factory=list)

    def describe(self) -> dict:
        shown = self.problems[: constants.MAX_REPORTED_PROBLEMS]
        if len(self.problems) > len(shown):
            shown.append(f"(+{len(self.problems) - len(shown)} more)")
        return {
            "passed": bool(self.passed),
            "thresholds": self.thresholds,
            "results": self.results,
            "problems": shown,
        }


# ── Sampling helpers ──


def sample_points(manifold: Manifold, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform random points; sphere points are drawn on S^2 and put in their home chart."""
    if isinstance(manifold, FlatPeriodic):
        return np.zeros(count, dtype=int), rng.random((count, manifold.dimension))
    if isinstance(manifold, Sphere):
        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        south = v[:, 2] <= 0.0
        # stereographic projection from the opposite pole
        denom = np.where(south, 1.0 - v[:, 2], 1.0 + v[:, 2])
        return np.where(south, 0, 1).astype(int), v[:, :2] / denom[:, None]
    radius = getattr(manifold, "radius", 1.0)
    angles = rng.random(count) * 2.0 * np.pi
    r = radius * np.sqrt(rng.random(count))
    return np.zeros(count, dtype=int), np.column_stack([r * np.cos(angles), r * np.sin(angles)])


def fixed_point_distance(manifold: Manifold, records: Sequence[FixedPointRecord], charts, coords) -> Tuple[np.ndarray, np.ndarray]:
    """(nearest record, chart-unit distance to it) per point."""
    best = np.full(len(charts), np.inf)
    which = np.full(len(charts), -1, dtype=int)
    fixed_charts, fixed_coords = locations(records)
    for j in range(len(records)):
        with np.errstate(all="ignore"):
            offsets = manifold.displacement(int(fixed_charts[j]), fixed_coords[j], charts, coords)
            gap = np.linalg.norm(offsets, axis=1)
        gap = np.where(np.isfinite(gap), gap, np.inf)
        closer = gap < best
        best[closer] = gap[closer]
        which[closer] = j
    return which, best


def regular_samples(field_: EnergyField, records, count: int, rng: np.random.Generator):
    """`count` random points farther than FIXED_POINT_EXCLUSION_CELLS cells from every fixed point."""
    manifold = field_.grid.manifold
    radius = constants.FIXED_POINT_EXCLUSION_CELLS * field_.spacing
    charts_parts, coords_parts, have = [], [], 0
    while have < count:
        charts, coords = sample_points(manifold, 2 * count, rng)
        _, gap = fixed_point_distance(manifold, records, charts, coords)
        keep = gap > radius
        charts_parts.append(charts[keep])
        coords_parts.append(coords[keep])
        have += int(np.sum(keep))
    return np.concatenate(charts_parts)[:count], np.concatenate(coords_parts)[:count]


def gradient(field_: EnergyField, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Central differences of the interpolated energy with step h along each chart axis."""
    manifold = field_.grid.manifold
    h = field_.spacing
    columns = []
    for axis in range(manifold.dimension):
        step = np.zeros(manifold.dimension)
        step[axis] = h
        up = field_.evaluate(*manifold.normalize(charts, coords + step))
        down = field_.evaluate(*manifold.normalize(charts, coords - step))
        columns.append((up - down) / (2.0 * h))
    return np.column_stack(columns)


def _flow(system: FlowSystem, charts, coords, duration: float, workers: int):
    def run(s: slice):
        return flow_batch(system, charts[s], coords[s], duration)

    parts = parallel_map(run, chunk_slices(len(charts), constants.NODE_CHUNK), workers)
    return stack_chunks([c for c, _ in parts]).astype(int), stack_chunks([y for _, y in parts])


def _tolerance(field_: EnergyField, *gradients: np.ndarray) -> np.ndarray:
    steepest = np.max([np.linalg.norm(g, axis=1) for g in gradients], axis=0)
    return constants.MONOTONE_ABS_TOL + constants.MONOTONE_GRADIENT_FACTOR * field_.spacing * steepest


# ── Monotonicity ──


def check_monotone(
    field_: EnergyField,
    system: FlowSystem,
    records: Sequence[FixedPointRecord],
    n_samples: int = constants.DEFAULT_MONOTONE_SAMPLES,
    horizons: Sequence[float] = constants.MONOTONE_HORIZONS,
    seed: int = 0,
    workers: int = 1,
) -> CheckSection:
    """phi(f^t(x)) < phi(x) at random regular samples.

    No horizon may raise phi by more than 1e-6 + C h |grad phi|, and over
    the longest horizon phi must drop by more than 1e-6 + h^2 |grad phi|.
    """
    rng = np.random.default_rng(seed)
    charts, coords = regular_samples(field_, records, n_samples, rng)
    start = field_.evaluate(charts, coords)
    start_gradient = gradient(field_, charts, coords)

    increasing = np.zeros(n_samples, dtype=bool)
    worst = np.inf
    per_horizon = {}
    elapsed = 0.0
    c, y = charts, coords
    margin = np.zeros(n_samples)
    end_gradient = start_gradient
    for t in sorted(horizons):
        c, y = _flow(system, c, y, t - elapsed, workers)
        elapsed = t
        margin = start - field_.evaluate(c, y)
        end_gradient = gradient(field_, c, y)
        bad = margin < -_tolerance(field_, start_gradient, end_gradient)
        increasing |= bad
        worst = min(worst, float(np.min(margin)))
        per_horizon[repr(float(t))] = int(np.sum(bad))

    steepest = np.maximum(np.linalg.norm(start_gradient, axis=1), np.linalg.norm(end_gradient, axis=1))
    required = constants.MONOTONE_ABS_TOL + constants.MONOTONE_STRICT_FACTOR * field_.spacing**2 * steepest
    not_decreasing = margin <= required
    violated = increasing | not_decreasing

    count = int(np.sum(violated))
    logger.info(f"Monotonicity: {count} of {n_samples} samples violate strict decrease")
    return CheckSection(
        name="monotone",
        passed=count == 0,
        thresholds={
            "abs_tol": constants.MONOTONE_ABS_TOL,
            "gradient_factor": constants.MONOTONE_GRADIENT_FACTOR,
            "strict_factor": constants.MONOTONE_STRICT_FACTOR,
            "h": float(field_.spacing),
            "horizons": [float(t) for t in sorted(horizons)],
            "exclusion_radius": constants.FIXED_POINT_EXCLUSION_CELLS * float(field_.spacing),
        },
        results={
            "samples": n_samples,
            "violations": count,
            "violations_per_horizon": per_horizon,
            "increasing": int(np.sum(increasing)),
            "not_decreasing": int(np.sum(not_decreasing)),
            "worst_margin": worst,
        },
        problems=[
            f"sample at {np.round(coords[i], 6).tolist()} {'increases' if increasing[i] else 'does not decrease'}"
            for i in np.flatnonzero(violated)
        ],
    )


# ── Critical structure ──


def _design(offsets: np.ndarray) -> np.ndarray:
    n = offsets.shape[1]
    columns = [np.ones(len(offsets))] + [offsets[:, k] for k in range(n)]
    for a in range(n):
        for b in range(a, n):
            factor = 0.5 if a == b else 1.0
            columns.append(factor * offsets[:, a] * offsets[:, b])
    return np.column_stack(columns)


def fit_quadratic(offsets: np.ndarray, values: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, float]:
    """Least-squares c + g.d + d^T H d / 2; returns (c, g, H, max abs residual)."""
    n = offsets.shape[1]
    matrix = _design(offsets)
    coef, *_ = np.linalg.lstsq(matrix, values, rcond=None)
    hessian = np.zeros((n, n))
    k = 1 + n
    for a in range(n):
        for b in range(a, n):
            hessian[a, b] = hessian[b, a] = coef[k]
            k += 1
    residual = float(np.max(np.abs(matrix @ coef - values)))
    return float(coef[0]), coef[1 : 1 + n], hessian, residual


def _fit_fixed_point(field_: EnergyField, record: FixedPointRecord, position: int, value_scale: float) -> dict:
    grid = field_.grid
    manifold = grid.manifold
    charts, coords = grid.node_coords()
    with np.errstate(all="ignore"):
        offsets = manifold.displacement(record.location.chart, record.location.coords, charts, coords)
        gap = np.linalg.norm(offsets, axis=1)
    # nodes carrying the fixed point's own chart value
    near = (
        np.isfinite(gap)
        & (gap <= constants.FIT_RADIUS_CELLS * grid.spacing)
        & np.isin(field_.tags, [LOCAL, V3])
        & (np.abs(field_.values - position) <= constants.LEVEL_STEP)
    )
    n = manifold.dimension
    terms = 1 + n + n * (n + 1) // 2
    entry = {"position": position, "kind": record.kind, "index": record.index, "nodes": int(np.sum(near))}
    if entry["nodes"] < constants.FIT_NODES_PER_TERM * terms:
        return {**entry, "passed": False, "problem": f"only {entry['nodes']} nodes near p_{position}"}
    value, _, hessian, residual = fit_quadratic(offsets[near], field_.values[near])
    eigenvalues = np.linalg.eigvalsh(hessian)
    fitted_index = int(np.sum(eigenvalues < 0))
    scale = float(np.max(np.abs(eigenvalues)))
    degenerate = scale == 0.0 or float(np.min(np.abs(eigenvalues))) <= 1e-6 * scale
    tolerance = constants.FIT_RESIDUAL_TOL * value_scale
    passed = fitted_index == record.index and not degenerate and residual < tolerance
    entry.update(
        {
            "fitted_index": fitted_index,
            "fitted_value": value,
            "hessian_eigenvalues": [float(e) for e in eigenvalues],
            "residual": residual,
            "passed": bool(passed),
        }
    )
    if not passed:
        entry["problem"] = (
            f"p_{position} ({record.kind}): fitted index {fitted_index} (expected {record.index}), "
            f"residual {residual:.3g}{', degenerate' if degenerate else ''}"
        )
    return entry


def check_critical_structure(
    field_: EnergyField,
    ordered: Sequence[FixedPointRecord],
    n_samples: int = constants.DEFAULT_MONOTONE_SAMPLES,
    seed: int = 0,
) -> CheckSection:
    """Nondegenerate quadratic fits of the right index at fixed points, nonzero gradient elsewhere."""
    value_scale = max(1.0, float(np.ptp(field_.values)))
    fits = [_fit_fixed_point(field_, r, position, value_scale) for position, r in enumerate(ordered, start=1)]
    problems = [f["problem"] for f in fits if "problem" in f]

    rng = np.random.default_rng(seed + 1)
    charts, coords = regular_samples(field_, ordered, n_samples, rng)
    grad = gradient(field_, charts, coords)
    magnitude = np.linalg.norm(grad, axis=1)
    floor = constants.GRADIENT_FLOOR_SHARE * float(np.median(magnitude))
    flat = int(np.sum(magnitude <= floor))
    allowed = int(constants.GRADIENT_FAILURE_SHARE * n_samples)
    if flat > allowed:
        problems.append(f"{flat} regular samples have |grad phi| <= {floor:.3g}")

    passed = not problems
    logger.info(
        f"Critical structure: {sum(f['passed'] for f in fits)} of {len(fits)} fixed-point fits pass, "
        f"{flat} flat regular samples"
    )
    return CheckSection(
        name="critical_structure",
        passed=passed,
        thresholds={
            "fit_radius": constants.FIT_RADIUS_CELLS * float(field_.spacing),
            "fit_residual": constants.FIT_RESIDUAL_TOL * value_scale,
            "gradient_floor": floor,
            "gradient_floor_share": constants.GRADIENT_FLOOR_SHARE,
            "allowed_flat_samples": allowed,
        },
        results={
            "fixed_points": fits,
            "regular_samples": n_samples,
            "flat_samples": flat,
            "median_gradient": float(np.median(magnitude)),
        },
        problems=problems,
    )


# ── Euler characteristic ──


def check_euler(records: Sequence[FixedPointRecord], manifold: Manifold) -> CheckSection:
    """Alternating count of fixed points by index against chi(M)."""
    counts = [0] * (manifold.dimension + 1)
    for r in records:
        counts[r.index] += 1
    total = sum((-1) ** index * c for index, c in enumerate(counts))
    expected = constants.EULER_CHARACTERISTIC[manifold.kind]
    passed = total == expected
    logger.info(f"Euler sum {total} (expected {expected} for the {manifold.kind})")
    return CheckSection(
        name="euler",
        passed=passed,
        thresholds={"euler_characteristic": expected},
        results={"counts_by_index": counts, "alternating_sum": total},
        problems=[] if passed else [f"alternating sum {total} != chi = {expected}"],
    )


# ── Decomposition into unstable sets ──


def check_closure(spectrum: OrderedSpectrum) -> List[str]:
    """Unstable branches of p_i must end at some p_j with j < i."""
    return spectrum.closure_violations()


def _limits(system: FlowSystem, records, charts, coords, radius: float, direction: str, workers: int) -> np.ndarray:
    """Index of the fixed point each orbit comes within `radius` of, -1 if none by DECOMPOSITION_T_MAX."""
    manifold = system.manifold
    which, gap = fixed_point_distance(manifold, records, charts, coords)
    limits = np.where(gap <= radius, which, -1)
    todo = np.flatnonzero(gap > radius)

    def g(c, y):
        return fixed_point_distance(manifold, records, c, y)[1] - radius

    def run(s: slice):
        rows = todo[s]
        hits = hit_times(system, charts[rows], coords[rows], g, direction, constants.DECOMPOSITION_T_MAX)
        arrived = np.full(len(rows), -1, dtype=int)
        if np.any(hits.found):
            arrived[hits.found] = fixed_point_distance(
                manifold, records, hits.charts[hits.found], hits.coords[hits.found]
            )[0]
        return arrived

    slices = chunk_slices(len(todo), constants.NODE_CHUNK)
    if slices:
        limits[todo] = stack_chunks(parallel_map(run, slices, workers))
    return limits


def check_decomposition(
    field_: EnergyField, system: FlowSystem, spectrum: OrderedSpectrum, workers: int = 1
) -> CheckSection:
    """Every node lies in some unstable set (backward limit) and some stable set (forward limit).

    The closure of each unstable set is checked on the traced branches:
    a branch of p_i must end at some p_j with j < i.
    """
    ordered = spectrum.ordered
    charts, coords = field_.grid.node_coords()
    radius = constants.CONVERGENCE_CELLS * field_.spacing
    backward = _limits(system, ordered, charts, coords, radius, BACKWARD, workers)
    forward = _limits(system, ordered, charts, coords, radius, FORWARD, workers)

    size = len(charts)
    stray = (backward < 0) | (forward < 0)
    share = float(np.sum(stray)) / size
    closure = check_closure(spectrum)
    problems = list(closure)
    if share > constants.DECOMPOSITION_FAILURE_SHARE:
        problems.insert(0, f"{int(np.sum(stray))} of {size} nodes do not converge to a fixed point")

    def per_position(limits):
        return {position: int(np.sum(limits == position - 1)) for position in range(1, len(ordered) + 1)}

    logger.info(
        f"Decomposition: {int(np.sum(backward < 0))} nodes without a backward limit, "
        f"{int(np.sum(forward < 0))} without a forward limit, {len(closure)} closure violations"
    )
    return CheckSection(
        name="decomposition",
        passed=not problems,
        thresholds={
            "t_max": constants.DECOMPOSITION_T_MAX,
            "convergence_radius": float(radius),
            "failure_share": constants.DECOMPOSITION_FAILURE_SHARE,
        },
        results={
            "nodes": size,
            "unstable_set_nodes": per_position(backward),
            "stable_set_nodes": per_position(forward),
            "without_backward_limit": int(np.sum(backward < 0)),
            "without_forward_limit": int(np.sum(forward < 0)),
            "non_convergent_share": share,
            "closure_violations": len(closure),
        },
        problems=problems,
    )


# ── Combinatorial Lyapunov oracle ──


def cross_check_oracle(
    field_: EnergyField,
    system: FlowSystem,
    analysis: ChainAnalysis,
    records: Sequence[FixedPointRecord],
    n_pairs: int = constants.DEFAULT_ORACLE_PAIRS,
    seed: int = 0,
    workers: int = 1,
) -> CheckSection:
    """Pairs (x, f^tau x) in distinct condensation classes must be ordered the same way by both functions."""
    tau = float(analysis.graph.tau)
    rng = np.random.default_rng(seed + 2)
    charts, coords = regular_samples(field_, records, n_pairs, rng)
    c1, y1 = _flow(system, charts, coords, tau, workers)

    node_x = analysis.dag_nodes_at(charts, coords)
    node_y = analysis.dag_nodes_at(c1, y1)
    layer_x = analysis.layers_at(charts, coords)
    layer_y = analysis.layers_at(c1, y1)
    compared = (node_x >= 0) & (node_y >= 0) & (node_x != node_y)

    drop = field_.evaluate(charts, coords) - field_.evaluate(c1, y1)
    tol = _tolerance(field_, gradient(field_, charts, coords), gradient(field_, c1, y1))
    contradicts = compared & (np.sign(layer_x - layer_y) * drop < -tol)
    count = int(np.sum(contradicts))
    logger.info(f"Oracle cross-check: {int(np.sum(compared))} pairs compared, {count} contradictions")
    return CheckSection(
        name="oracle",
        passed=count == 0,
        thresholds={"tau": tau, "abs_tol": constants.MONOTONE_ABS_TOL},
        results={
            "pairs": n_pairs,
            "compared": int(np.sum(compared)),
            "exempt_same_class": int(np.sum((node_x >= 0) & (node_x == node_y))),
            "contradictions": count,
        },
        problems=[
            f"layers {layer_x[i]:.0f} -> {layer_y[i]:.0f} but phi changes by {-drop[i]:.3g} at "
            f"{np.round(coords[i], 6).tolist()}"
            for i in np.flatnonzero(contradicts)
        ],
    )
