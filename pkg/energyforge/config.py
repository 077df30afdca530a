"""
Flow spec and run configuration.

Flow specs are YAML files describing a manifold, a vector field on it and
integrator settings:

    name: torus_height_gradient
    manifold:
      kind: torus               # circle | torus | sphere | plane-disk
      radius: 4.0               # plane-disk only
      trapping: true            # plane-disk only, default true
    field:
      catalog: torus_height_gradient      # or per-chart expressions:
      expressions:
        main: ["a*sin(2*pi*x)", "a*sin(2*pi*y)"]
      parameters:
        a: 0.1103178
    integrator:
      tol: 1.0e-9
      max_step: 0.05
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from energyforge import constants
from energyforge.catalog import CATALOG_FIELDS
from energyforge.errors import SpecError
from energyforge.manifold_flow.manifolds import make_manifold
from energyforge.manifold_flow.system import FlowSystem, parse_chart_fields

STAGES = ("analyze", "order", "build", "verify", "plot")


def _parse_positive(raw_value: Any, key: str) -> float:
    try:
        value = float(raw_value)
    except (TypeError, ValueError):
        raise SpecError(f"{key} must be a number, got: {raw_value!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise SpecError(f"{key} must be a finite, positive number, got: {raw_value!r}")
    return value


def _parse_bool(raw_value: Any, key: str) -> bool:
    if isinstance(raw_value, bool):
        return raw_value
    raise SpecError(f"{key} must be true or false, got: {raw_value!r}")


@dataclass
class ManifoldConfig:
    kind: str
    radius: Optional[float] = None
    # Plane-disks normally require the field to point strictly inward on the
    # boundary circle; local saddle fixtures switch the check off.
    trapping: bool = True


@dataclass
class FieldConfig:
    """Vector field given either by a catalog name or by per-chart expressions."""

    catalog: Optional[str] = None
    expressions: Dict[str, List[str]] = field(default_factory=dict)
    parameters: Dict[str, float] = field(default_factory=dict)


@dataclass
class IntegratorConfig:
    tol: float = constants.DEFAULT_INTEGRATOR_TOL
    max_step: float = constants.DEFAULT_MAX_STEP


@dataclass
class FlowSpec:
    name: str
    manifold: ManifoldConfig
    field: FieldConfig
    integrator: IntegratorConfig


@dataclass
class RunConfig:
    """Options of one CLI run; validated on construction."""

    spec_path: Path
    out_dir: Path
    grid: int = constants.DEFAULT_GRID
    tol_int: Optional[float] = None
    tol_hyp: float = constants.HYPERBOLICITY_TOL
    tol_event: float = constants.EVENT_TIME_TOL
    stages: Tuple[str, ...] = STAGES
    seed: int = 0
    self_test: bool = False

    def __post_init__(self):
        if self.grid < constants.MIN_GRID:
            raise SpecError(f"grid resolution must be at least {constants.MIN_GRID}, got: {self.grid!r}")
        for key in ("tol_hyp", "tol_event"):
            _parse_positive(getattr(self, key), key)
        if self.tol_int is not None:
            _parse_positive(self.tol_int, "tol_int")
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise SpecError(f"unknown stage(s) {unknown}; expected a subset of {list(STAGES)}")


def load_spec_file(spec_path: str | Path) -> dict[str, Any]:
    """
    Load a flow spec from a YAML file.

    Raises:
        FileNotFoundError: If the spec file doesn't exist
        SpecError: If the file is not valid YAML or not a mapping
    """
    spec_path = Path(spec_path).expanduser()

    if not spec_path.exists():
        raise FileNotFoundError(f"Flow spec file not found: {spec_path}")

    with open(spec_path) as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise SpecError(f"invalid YAML in {spec_path}: {exc}") from None

    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SpecError(f"flow spec must be a mapping, got {type(raw).__name__} in {spec_path}")
    return raw


def _parse_expressions(raw_value: Any) -> Dict[str, List[str]]:
    if raw_value is None:
        return {}
    if isinstance(raw_value, (list, str)):
        raw_value = {"main": raw_value}
    if not isinstance(raw_value, dict):
        raise SpecError(f"field.expressions must map chart ids to expression lists, got: {raw_value!r}")
    expressions = {}
    for chart_id, components in raw_value.items():
        if isinstance(components, str):
            components = [components]
        if not isinstance(components, list) or not components:
            raise SpecError(f"field.expressions.{chart_id} must be a non-empty list, got: {components!r}")
        expressions[str(chart_id)] = [str(c) for c in components]
    return expressions


def _parse_parameters(raw_value: Any) -> Dict[str, float]:
    if raw_value is None:
        return {}
    if not isinstance(raw_value, dict):
        raise SpecError(f"field.parameters must be a mapping, got: {raw_value!r}")
    parameters = {}
    for name, value in raw_value.items():
        try:
            parameters[str(name)] = float(value)
        except (TypeError, ValueError):
            raise SpecError(f"field.parameters.{name} must be a number, got: {value!r}") from None
    return parameters


def parse_flow_spec(raw_spec: dict[str, Any], default_name: str = "flow") -> FlowSpec:
    """
    Parse a raw spec dictionary into a FlowSpec.

    Catalog fields supply their own manifold kind, expressions and default
    parameters; spec parameters override the defaults.

    Raises:
        SpecError: If a required key is missing or a value is invalid
    """
    try:
        manifold_data = raw_spec["manifold"] or {}
        kind = str(manifold_data["kind"])
        radius = manifold_data.get("radius")
        manifold = ManifoldConfig(
            kind=kind,
            radius=_parse_positive(radius, "manifold.radius") if radius is not None else None,
            trapping=_parse_bool(manifold_data.get("trapping", True), "manifold.trapping"),
        )

        field_data = raw_spec["field"] or {}
        catalog = field_data.get("catalog")
        expressions = _parse_expressions(field_data.get("expressions"))
        parameters = _parse_parameters(field_data.get("parameters"))
        if catalog is not None:
            if catalog not in CATALOG_FIELDS:
                raise SpecError(f"unknown field.catalog {catalog!r}; expected one of {sorted(CATALOG_FIELDS)}")
            if expressions:
                raise SpecError("field.catalog and field.expressions are mutually exclusive")
            entry = CATALOG_FIELDS[catalog]
            if entry["manifold"] != kind:
                raise SpecError(
                    f"catalog field {catalog!r} lives on a {entry['manifold']}, not on a {kind}"
                )
            expressions = {k: list(v) for k, v in entry["expressions"].items()}
            parameters = {**entry["parameters"], **parameters}
        elif not expressions:
            raise SpecError("field needs either 'catalog' or 'expressions'")
        vector_field = FieldConfig(catalog=catalog, expressions=expressions, parameters=parameters)

        integrator_data = raw_spec.get("integrator") or {}
        integrator = IntegratorConfig(
            tol=_parse_positive(integrator_data.get("tol", constants.DEFAULT_INTEGRATOR_TOL), "integrator.tol"),
            max_step=_parse_positive(
                integrator_data.get("max_step", constants.DEFAULT_MAX_STEP), "integrator.max_step"
            ),
        )

        return FlowSpec(
            name=str(raw_spec.get("name", default_name)),
            manifold=manifold,
            field=vector_field,
            integrator=integrator,
        )
    except KeyError as exc:
        raise SpecError(f"Missing required spec key: {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise SpecError(f"Malformed flow spec: {exc}") from None


def load_flow_spec(spec_path: str | Path) -> FlowSpec:
    """Load and parse a flow spec file."""
    raw_spec = load_spec_file(spec_path)
    return parse_flow_spec(raw_spec, default_name=Path(spec_path).stem)


def build_system(
    spec: FlowSpec, tol: Optional[float] = None, tol_event: float = constants.EVENT_TIME_TOL
) -> FlowSystem:
    """Build and validate the FlowSystem a spec describes.

    `tol` overrides the flow spec's integrator tolerance; `tol_event` is the
    time resolution of event location.
    """
    manifold = make_manifold(spec.manifold.kind, spec.manifold.radius, spec.manifold.trapping)
    vector_field = parse_chart_fields(
        manifold, spec.field.expressions, spec.field.parameters, catalog=spec.field.catalog
    )
    system = FlowSystem(
        manifold=manifold,
        field=vector_field,
        tol=spec.integrator.tol if tol is None else tol,
        max_step=spec.integrator.max_step,
        tol_event=tol_event,
        name=spec.name,
    )
    return system.validate()
