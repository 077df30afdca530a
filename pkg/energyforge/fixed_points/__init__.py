from energyforge.fixed_points.charts import (
    ChartFrame,
    LocalMorseChart,
    build_chart,
    eigen_frame,
    linearization_radius,
    local_morse,
)
from energyforge.fixed_points.detect import (
    FixedPointRecord,
    classify,
    find_fixed_points,
    jacobian,
    kind_of,
    locations,
)
from energyforge.fixed_points.invariant_manifolds import (
    STABLE,
    UNSTABLE,
    InvariantManifoldTrace,
    trace_all,
    trace_invariant_manifold,
)

__all__ = [
    "ChartFrame",
    "FixedPointRecord",
    "InvariantManifoldTrace",
    "LocalMorseChart",
    "STABLE",
    "UNSTABLE",
    "build_chart",
    "classify",
    "eigen_frame",
    "find_fixed_points",
    "jacobian",
    "kind_of",
    "linearization_radius",
    "local_morse",
    "locations",
    "trace_all",
    "trace_invariant_manifold",
]
