from energyforge.energy_builder.field import EnergyField, eval_energy, read_energy_grid, write_energy_grid
from energyforge.energy_builder.grid import EnergyGrid, make_grid
from energyforge.energy_builder.level_sets import BoundaryContours, extract_contours
from energyforge.energy_builder.scaffold import SaddleScaffold, SourceScaffold, level_profile
from energyforge.energy_builder.stages import (
    base_sink,
    build_energy,
    extend_saddle,
    extend_sink,
    extend_source,
    final_source,
)
from energyforge.energy_builder.state import REGION_TAGS, EnergyState, empty_state

__all__ = [
    "REGION_TAGS",
    "BoundaryContours",
    "EnergyField",
    "EnergyGrid",
    "EnergyState",
    "SaddleScaffold",
    "SourceScaffold",
    "base_sink",
    "build_energy",
    "empty_state",
    "eval_energy",
    "extend_saddle",
    "extend_sink",
    "extend_source",
    "extract_contours",
    "final_source",
    "level_profile",
    "make_grid",
    "read_energy_grid",
    "write_energy_grid",
]
