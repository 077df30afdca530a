"""
The stage-by-stage construction of the energy function.

Stage i extends phi_{i-1}, defined on the sublevel set U_{i-1}, over a
neighbourhood of the i-th fixed point in Smale order. Every undefined node
is classified by the orbit through it: how long its forward orbit needs to
enter U_{i-1}, where on the boundary it enters, and for sources how long
its backward orbit needs to reach the sphere around the source. Values
written at one stage are never changed by a later one.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from energyforge import constants
from energyforge.energy_builder.field import EnergyField, fixed_point_values
from energyforge.energy_builder.grid import make_grid
from energyforge.energy_builder.scaffold import saddle_scaffold, saddle_topology, source_scaffold
from energyforge.energy_builder.state import (
    LOCAL,
    PATCHED,
    UNDEFINED,
    V1,
    V2,
    V3,
    V4,
    VK,
    EnergyState,
    empty_state,
)
from energyforge.errors import ScaffoldError
from energyforge.fixed_points.charts import LocalMorseChart, local_morse
from energyforge.fixed_points.detect import FixedPointRecord
from energyforge.manifold_flow.integrator import BACKWARD, FORWARD, HitResult, hit_times
from energyforge.manifold_flow.system import FlowSystem
from energyforge.smale_order.order import OrderedSpectrum
from energyforge.utils import chunk_slices, logger, parallel_map, stack_chunks

THIRD = constants.LEVEL_STEP
# two lower-level branches, two attaching arcs, four arc ends, two unstable crossings
SADDLE_TOPOLOGY = {"lower_level": 2, "attaching_arcs": 2, "arc_ends": 4, "arc_midpoints": 2}


def _batch_hits(system: FlowSystem, charts, coords, g, direction: str, workers: int) -> HitResult:
    def run(s: slice) -> HitResult:
        return hit_times(system, charts[s], coords[s], g, direction, constants.HIT_T_MAX, allow_zero_start=True)

    parts = parallel_map(run, chunk_slices(len(charts), constants.NODE_CHUNK), workers)
    if not parts:
        return HitResult(np.zeros(0, dtype=bool), np.zeros(0), np.zeros(0, dtype=int), np.zeros((0, coords.shape[1])))
    return HitResult(
        found=stack_chunks([p.found for p in parts]),
        times=stack_chunks([p.times for p in parts]),
        charts=stack_chunks([p.charts for p in parts]),
        coords=stack_chunks([p.coords for p in parts]),
    )


def _local(chart: LocalMorseChart, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        return chart.coordinates(charts, coords)


def _counts(tags: np.ndarray, **names) -> dict:
    return {name: int(np.sum(tags == code)) for name, code in names.items()}


def _check_flagged(flagged: int, assigned: int, stage: int) -> None:
    if flagged > constants.FLAGGED_NODE_SHARE * max(assigned, 1):
        raise ScaffoldError(
            f"{flagged} flagged nodes exceed {constants.FLAGGED_NODE_SHARE:.1%} of the {assigned} tube nodes",
            stage=stage,
        )


# ── Sinks ──


def sink_chart(record: FixedPointRecord, stage: int, sink_count: int) -> LocalMorseChart:
    """Chart of the sink p_s = `record`; its ball holds every level up to sink_count + 1/3."""
    ball = float(np.sqrt(max(1.0, sink_count - 2.0 * THIRD)))
    return local_morse(record, stage, ball=ball)


def extend_sink(state: EnergyState, record: FixedPointRecord, sink_count: int = None) -> EnergyState:
    """Stage i for the sink p_i: phi = phi_{p_s,s} wherever that is <= i + 1/3, for every s <= i.

    Raises:
        ScaffoldError: the point is not a sink, an earlier stage was not a sink, or two sink regions overlap.
    """
    stage = state.stage + 1
    if record.kind != "sink":
        raise ScaffoldError(f"expected a sink, got a {record.kind}", stage=stage)
    if any(chart is None or chart.index != 0 for chart in state.charts):
        raise ScaffoldError("sinks must come before every other fixed point", stage=stage)
    chart = sink_chart(record, stage, sink_count or stage)
    top = stage + THIRD
    ids = state.undefined_ids()
    charts, coords = state.grid.node_coords(ids)
    values = np.full(len(ids), np.nan)
    claimed = np.zeros(len(ids), dtype=bool)
    for sink in state.charts + (chart,):
        local = _local(sink, charts, coords)
        with np.errstate(invalid="ignore"):
            value = sink.evaluate_local(local)
            mine = (np.linalg.norm(local, axis=1) <= sink.ball) & (value <= top)
        if np.any(mine & claimed):
            raise ScaffoldError(f"sink regions overlap at level {top:.4f}", stage=stage)
        values[mine] = value[mine]
        claimed |= mine
    logger.info(f"Stage {stage}: sink, {int(np.sum(claimed))} new nodes")
    return state.commit(
        ids[claimed],
        values[claimed],
        np.full(int(np.sum(claimed)), LOCAL),
        chart,
        {"stage": stage, "kind": "sink", "chart_scale": float(chart.scale), "nodes": {"local": int(np.sum(claimed))}},
    )


def base_sink(state: EnergyState, record: FixedPointRecord, sink_count: int = 1) -> EnergyState:
    """Stage 1: U_1 = {phi_{p_1,1} <= 4/3}."""
    if state.stage != 0:
        raise ScaffoldError("the base case starts from an empty state", stage=state.stage + 1)
    return extend_sink(state, record, sink_count)


# ── Saddles ──


def extend_saddle(state: EnergyState, system: FlowSystem, record: FixedPointRecord, workers: int = 1) -> EnergyState:
    """Stage i for the saddle p_i.

    With t the forward time from a node to U_{i-1}, x its entry point and
    T = T_1(x):

        V1   x on a facing component, t <= T            i - (2 - t / T) / 3
        V2   x off the footprints, T < t <= T + t_2     psi(t - T)
        V3   inside the saddle block                    phi_{p_i,i}
        V4   x on another component, t <= 1             i + t - 2/3
    """
    stage = state.stage + 1
    grid = state.grid
    scaffold = saddle_scaffold(system, record, stage, state.boundary_event, state.contours)
    chart = scaffold.chart
    top = stage + THIRD

    ids = state.undefined_ids()
    charts, coords = grid.node_coords(ids)
    hits = _batch_hits(system, charts, coords, state.boundary_event, FORWARD, workers)
    found = hits.found
    t = np.where(found, hits.times, np.inf)
    component = np.full(len(ids), -1)
    position = np.zeros(len(ids))
    distance = np.zeros(len(ids))
    if np.any(found):
        component[found], position[found], distance[found] = state.contours.locate(hits.charts[found], hits.coords[found])
    flagged = found & (distance > 2.0 * grid.spacing)
    ok = found & ~flagged
    facing = ok & np.isin(component, sorted(scaffold.facing))
    cap = np.ones(len(ids))
    on_arc = np.zeros(len(ids), dtype=bool)
    if np.any(facing):
        cap[facing], on_arc[facing] = scaffold.time_cap(component[facing], position[facing])

    local = _local(chart, charts, coords)
    with np.errstate(invalid="ignore"):
        chart_value = chart.evaluate_local(local)
        block = (np.linalg.norm(local, axis=1) <= chart.ball) & (chart_value <= top)

    values = np.full(len(ids), np.nan)
    tags = np.full(len(ids), UNDEFINED, dtype=np.int8)

    v4 = ok & ~facing & (t <= 1.0)
    values[v4] = stage + t[v4] - 2.0 * THIRD
    tags[v4] = V4

    v1 = facing & (t <= cap)
    values[v1] = stage - (2.0 - t[v1] / cap[v1]) / 3.0
    tags[v1] = V1

    beyond = facing & (t > cap)
    v2 = beyond & ~on_arc & (t - cap <= scaffold.profile.t2)
    values[v2] = scaffold.profile(t[v2] - cap[v2])
    tags[v2] = V2

    v3 = ((beyond & on_arc) | ~found) & block
    values[v3] = chart_value[v3]
    tags[v3] = V3

    assigned = tags != UNDEFINED
    counts = _counts(tags, V1=V1, V2=V2, V3=V3, V4=V4)
    _check_flagged(int(np.sum(flagged & ~assigned)), int(np.sum(assigned)), stage)
    logger.info(f"Stage {stage}: saddle, new nodes {counts}, flagged {int(np.sum(flagged & ~assigned))}")
    return state.commit(
        ids[assigned],
        values[assigned],
        tags[assigned],
        chart,
        {
            "stage": stage,
            "nodes": counts,
            "flagged_nodes": int(np.sum(flagged & ~assigned)),
            **scaffold.describe(),
            "geometry": scaffold.geometry(),
        },
    )


# ── Sources ──


def _source_stage(state: EnergyState, system: FlowSystem, record: FixedPointRecord, workers: int, final: bool):
    stage = state.stage + 1
    grid = state.grid
    if record.kind != "source":
        raise ScaffoldError(f"expected a source, got a {record.kind}", stage=stage)
    scaffold = source_scaffold(system, record, stage, state.boundary_event, state.contours)
    chart = scaffold.chart

    ids = state.undefined_ids()
    charts, coords = grid.node_coords(ids)
    values = np.full(len(ids), np.nan)
    tags = np.full(len(ids), UNDEFINED, dtype=np.int8)

    local = _local(chart, charts, coords)
    with np.errstate(invalid="ignore"):
        radius_sq = np.sum(local * local, axis=1)
        cap = radius_sq <= THIRD
    values[cap] = stage - radius_sq[cap]
    tags[cap] = LOCAL

    rest = np.flatnonzero(~cap)
    forward = _batch_hits(system, charts[rest], coords[rest], state.boundary_event, FORWARD, workers)
    backward = _batch_hits(system, charts[rest], coords[rest], scaffold.sphere_event(), BACKWARD, workers)
    tube = forward.found & backward.found
    rows = rest[tube]
    t_y, t_rest = backward.times[tube], forward.times[tube]
    with np.errstate(invalid="ignore", divide="ignore"):
        values[rows] = stage - (1.0 + t_y / (t_y + t_rest)) / 3.0
    tags[rows] = VK if final else V1

    flagged = 0
    if not final:
        outer = forward.found & ~backward.found
        if np.any(outer):
            component, _, distance = state.contours.locate(forward.charts[outer], forward.coords[outer])
            near = distance <= 2.0 * grid.spacing
            flagged = int(np.sum(~near))
            t_out = forward.times[outer]
            unit = near & ~np.isin(component, sorted(scaffold.facing)) & (t_out <= 1.0)
            rows = rest[outer][unit]
            values[rows] = stage + t_out[unit] - 2.0 * THIRD
            tags[rows] = V2
    return scaffold, chart, ids, values, tags, flagged


def extend_source(state: EnergyState, system: FlowSystem, record: FixedPointRecord, workers: int = 1) -> EnergyState:
    """Stage i for a source p_i that is not the last fixed point.

    Nodes inside |x|^2 <= 1/3 take phi_{p_i,i}. A node whose backward orbit
    reaches that sphere after t_y and whose forward orbit reaches U_{i-1}
    after s gets i - (1 + t_y / (t_y + s)) / 3; a node outside the source's
    basin whose forward orbit reaches a non-facing component within unit
    time gets i + s - 2/3.
    """
    scaffold, chart, ids, values, tags, flagged = _source_stage(state, system, record, workers, final=False)
    stage = scaffold.stage
    assigned = tags != UNDEFINED
    counts = _counts(tags, local=LOCAL, V1=V1, V2=V2)
    _check_flagged(flagged, int(np.sum(assigned)), stage)
    logger.info(f"Stage {stage}: source, new nodes {counts}")
    return state.commit(
        ids[assigned],
        values[assigned],
        tags[assigned],
        chart,
        {
            "stage": stage,
            "nodes": counts,
            "flagged_nodes": flagged,
            **scaffold.describe(),
            "geometry": scaffold.geometry(),
        },
    )


def _patch(state: EnergyState, values: np.ndarray, pending: np.ndarray) -> np.ndarray:
    """Fill pending nodes with the mean of their defined neighbours, ring by ring."""
    grid = state.grid
    values = values.copy()
    pending = pending.copy()
    while np.any(pending):
        ids = np.flatnonzero(pending)
        neighbours = grid.neighbours(ids)
        known = np.where(neighbours >= 0, values[np.maximum(neighbours, 0)], np.nan)
        has = np.any(np.isfinite(known), axis=1)
        if not np.any(has):
            break
        values[ids[has]] = np.nanmean(known[has], axis=1)
        pending[ids[has]] = False
    return values


def final_source(
    state: EnergyState,
    system: FlowSystem,
    record: FixedPointRecord,
    workers: int = 1,
    ordered: Sequence[FixedPointRecord] = (),
) -> EnergyField:
    """Last stage: cap around p_k and the closing tube; every node ends up defined.

    Nodes the closing tube misses are patched from their neighbours while
    they stay below FLAGGED_NODE_SHARE of the grid.

    Raises:
        ScaffoldError: too many nodes remain undefined.
    """
    scaffold, chart, ids, values, tags, _ = _source_stage(state, system, record, workers, final=True)
    stage = scaffold.stage
    grid = state.grid
    missing = tags == UNDEFINED
    if np.sum(missing) > constants.FLAGGED_NODE_SHARE * grid.size:
        raise ScaffoldError(
            f"{int(np.sum(missing))} of {grid.size} nodes are left undefined by the closing tube", stage=stage
        )
    full = state.values.copy()
    full[ids[~missing]] = values[~missing]
    pending = np.zeros(grid.size, dtype=bool)
    pending[ids[missing]] = True
    full = _patch(state, full, pending)
    values[missing] = full[ids[missing]]
    tags[missing] = PATCHED
    if np.any(~np.isfinite(values)):
        raise ScaffoldError("some nodes have no defined neighbour to patch from", stage=stage)
    if np.any(missing):
        logger.warning(f"Stage {stage}: patched {int(np.sum(missing))} nodes the closing tube missed")

    counts = _counts(tags, local=LOCAL, Vk=VK, patched=PATCHED)
    logger.info(f"Stage {stage}: final source, new nodes {counts}")
    final = state.commit(
        ids,
        values,
        tags,
        chart,
        {
            "stage": stage,
            "nodes": counts,
            "flagged_nodes": int(np.sum(missing)),
            **scaffold.describe(),
            "geometry": scaffold.geometry(),
        },
    )
    return EnergyField(
        grid=grid,
        values=final.values,
        tags=final.tags,
        stages=final.stages,
        k=stage,
        fixed_point_values=fixed_point_values(grid, final.values, ordered) if ordered else (),
        diagnostics=final.diagnostics,
    )


# ── Induction ──


def build_energy(
    system: FlowSystem,
    spectrum: OrderedSpectrum,
    resolution: int = constants.DEFAULT_GRID,
    workers: int = 1,
) -> EnergyField:
    """Run every stage over the fixed points in Smale order.

    Raises:
        ScaffoldError: a stage fails; the error carries the stage index (0 for grid problems).
    """
    grid = make_grid(system.manifold, resolution)
    ordered = spectrum.ordered
    k = len(ordered)
    if k == 0:
        raise ScaffoldError("the flow has no fixed points", stage=0)
    if ordered[0].kind != "sink":
        raise ScaffoldError(f"p_1 must be a sink, got a {ordered[0].kind}", stage=1)
    if ordered[-1].kind != "source":
        raise ScaffoldError(f"p_k must be a source, got a {ordered[-1].kind}", stage=k)
    sinks = spectrum.count("sink")
    state = base_sink(empty_state(grid), ordered[0], sinks)
    level_sets = [_level_set_entry(state.stage, state.contours.describe(), state.diagnostics[-1])]
    for record in ordered[1:-1]:
        if record.kind == "sink":
            state = extend_sink(state, record, sinks)
        elif record.kind == "saddle":
            state = extend_saddle(state, system, record, workers)
        else:
            state = extend_source(state, system, record, workers)
        level_sets.append(_level_set_entry(state.stage, state.contours.describe(), state.diagnostics[-1]))
    field = final_source(state, system, ordered[-1], workers, ordered=ordered)
    # U_k is the whole manifold; only the closing scaffold is left to export
    level_sets.append(_level_set_entry(k, {"level": k + THIRD, "components": []}, field.diagnostics[-1]))
    logger.info(
        f"Energy function built: k={k}, range [{np.min(field.values):.4f}, {np.max(field.values):.4f}], "
        f"interface jump {field.interface_jump():.3f} per cell"
    )
    topologies = {
        stage: saddle_topology(grid, field.values, state.charts[stage - 1], spectrum.traces[spectrum.order[stage - 1]][1])
        for stage, record in enumerate(ordered, start=1)
        if record.kind == "saddle"
    }
    diagnostics = []
    for entry in field.diagnostics:
        entry = {key: v for key, v in entry.items() if key != "geometry"}
        if entry["stage"] in topologies:
            entry["topology"] = topologies[entry["stage"]]
            if entry["topology"] != SADDLE_TOPOLOGY:
                logger.warning(f"Stage {entry['stage']}: scaffold topology {entry['topology']}, expected {SADDLE_TOPOLOGY}")
        diagnostics.append(entry)
    return replace(field, k=k, diagnostics=tuple(diagnostics), level_sets=tuple(level_sets))


def _level_set_entry(stage: int, boundary: dict, diagnostics: dict) -> dict:
    return {"stage": stage, **boundary, "scaffold": diagnostics.get("geometry", {})}
