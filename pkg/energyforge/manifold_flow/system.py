"""Vector fields on charted manifolds and the flow systems built from them."""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from energyforge import constants
from energyforge.errors import IntegrationError, SpecError
from energyforge.manifold_flow.expressions import CompiledComponents, compile_components
from energyforge.manifold_flow.manifolds import ChartPoint, Manifold


@dataclass(frozen=True)
class VectorField:
    """Per-chart component expressions of a vector field.

    `components[c]` holds the compiled expressions for chart index c. A
    negative `sign` gives the time-reversed field.
    """

    components: Tuple[CompiledComponents, ...]
    catalog: Optional[str] = None
    sign: float = 1.0

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    def evaluate(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        charts = np.asarray(charts, dtype=int)
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if len(self.components) == 1:
            out = self.components[0].evaluate(coords)
        else:
            out = np.empty_like(coords)
            for index, compiled in enumerate(self.components):
                mask = charts == index
                if np.any(mask):
                    out[mask] = compiled.evaluate(coords[mask])
        return self.sign * out

    def reversed(self) -> "VectorField":
        return replace(self, sign=-self.sign)

    def describe(self) -> Dict[str, list]:
        return {str(i): list(c.sources) for i, c in enumerate(self.components)}


def parse_field(
    expressions: Sequence[str],
    coordinates: Optional[Sequence[str]] = None,
    parameters: Optional[Mapping[str, float]] = None,
) -> VectorField:
    """Parse a single-chart field from component expressions.

    Coordinates default to ("x",) for one component and ("x", "y") for two.
    """
    if coordinates is None:
        count = len([p for text in expressions for p in str(text).split(",")])
        coordinates = ("x",) if count == 1 else ("x", "y")
    return VectorField((compile_components(expressions, coordinates, parameters),))


def parse_chart_fields(
    manifold: Manifold,
    expressions: Mapping[str, Sequence[str]],
    parameters: Optional[Mapping[str, float]] = None,
    catalog: Optional[str] = None,
) -> VectorField:
    """Parse one expression list per chart of `manifold`."""
    missing = [c for c in manifold.chart_ids if c not in expressions]
    if missing:
        raise SpecError(f"field.expressions is missing chart(s) {missing} for {manifold.kind}")
    extra = sorted(set(expressions) - set(manifold.chart_ids))
    if extra:
        raise SpecError(f"field.expressions has unknown chart(s) {extra} for {manifold.kind}")
    compiled = tuple(
        compile_components(expressions[c], manifold.coordinate_names, parameters)
        for c in manifold.chart_ids
    )
    return VectorField(compiled, catalog=catalog)


@dataclass(frozen=True)
class FlowSystem:
    """A manifold together with the flow of a vector field on it.

    Immutable; safe to share between worker threads.
    """

    manifold: Manifold
    field: VectorField
    tol: float = constants.DEFAULT_INTEGRATOR_TOL
    max_step: float = constants.DEFAULT_MAX_STEP
    # time resolution of event bisection
    tol_event: float = constants.EVENT_TIME_TOL
    name: str = dataclass_field(default="flow", compare=False)

    def __post_init__(self):
        if self.tol <= 0:
            raise SpecError(f"integrator.tol must be positive, got: {self.tol!r}")
        if self.max_step <= 0:
            raise SpecError(f"integrator.max_step must be positive, got: {self.max_step!r}")
        if self.tol_event <= 0:
            raise SpecError(f"tol_event must be positive, got: {self.tol_event!r}")
        if self.field.dimension != self.manifold.dimension:
            raise SpecError(
                f"field has {self.field.dimension} component(s) but {self.manifold.kind} "
                f"has dimension {self.manifold.dimension}"
            )

    @property
    def dimension(self) -> int:
        return self.manifold.dimension

    def velocity(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        out = self.field.evaluate(charts, coords)
        if not np.all(np.isfinite(out)):
            raise IntegrationError("vector field evaluated to a non-finite value")
        return out

    def velocity_at(self, point: ChartPoint) -> np.ndarray:
        charts, coords = point.as_arrays()
        return self.velocity(charts, coords)[0]

    def reversed(self) -> "FlowSystem":
        return replace(self, field=self.field.reversed())

    def validate(self) -> "FlowSystem":
        """Check the manifold invariants against this field; returns self."""
        def raw_velocity(charts, coords):
            return self.field.evaluate(charts, coords)

        self.manifold.check_invariants(raw_velocity)
        return self
