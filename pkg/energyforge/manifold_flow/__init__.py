"""Charted manifolds, vector fields and their flows."""

from energyforge.manifold_flow.integrator import (
    BACKWARD,
    FORWARD,
    HitResult,
    TrajectorySegment,
    flow_batch,
    hit_time,
    hit_times,
    integrate,
    trace_batch,
)
from energyforge.manifold_flow.manifolds import ChartPoint, Manifold, make_manifold
from energyforge.manifold_flow.system import FlowSystem, VectorField, parse_chart_fields, parse_field

__all__ = [
    "BACKWARD",
    "FORWARD",
    "ChartPoint",
    "FlowSystem",
    "HitResult",
    "Manifold",
    "TrajectorySegment",
    "VectorField",
    "flow_batch",
    "hit_time",
    "hit_times",
    "integrate",
    "make_manifold",
    "parse_chart_fields",
    "parse_field",
    "trace_batch",
]
