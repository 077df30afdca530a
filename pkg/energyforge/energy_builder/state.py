from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from energyforge import constants
from energyforge.energy_builder.grid import EnergyGrid
from energyforge.energy_builder.level_sets import BoundaryContours, extract_contours
from energyforge.errors import ScaffoldError
from energyforge.fixed_points.charts import LocalMorseChart

REGION_TAGS = ("undefined", "local", "V1", "V2", "V3", "V4", "Vk", "patched")
UNDEFINED, LOCAL, V1, V2, V3, V4, VK, PATCHED = range(len(REGION_TAGS))

# level-field value of nodes that are neither inside nor next to the sublevel set
FAR_OFFSET = 1.0
GHOST_MARGIN = 1e-12


def level_field(grid: EnergyGrid, values: np.ndarray, top: float) -> np.ndarray:
    """Finite extension of the sampled energy used to locate {phi = top}.

    Defined nodes keep their value. Undefined nodes next to the defined
    region get the linear extrapolation 2 phi(a) - phi(b) from the nearest
    defined pair along an axis (2 top - phi(a) when b is undefined), so the
    zero set of the multilinear interpolant tracks the sublevel boundary to
    second order. Everything else sits FAR_OFFSET above the level.
    """
    defined = np.isfinite(values)
    field = np.where(defined, values, top + FAR_OFFSET)
    ghosts = np.flatnonzero(~defined)
    if len(ghosts) == 0 or not np.any(defined):
        return field
    first = grid.neighbours(ghosts)
    best = np.full(len(ghosts), -np.inf)
    for column in range(first.shape[1]):
        a = first[:, column]
        rows = np.flatnonzero((a >= 0) & defined[np.maximum(a, 0)])
        if len(rows) == 0:
            continue
        va = values[a[rows]]
        b = grid.neighbours(a[rows])[:, column]
        vb = np.where(b >= 0, values[np.maximum(b, 0)], np.nan)
        linear = 2.0 * va - vb
        candidate = np.where(np.isfinite(linear) & (linear > top), linear, 2.0 * top - va)
        best[rows] = np.maximum(best[rows], candidate)
    touched = np.isfinite(best)
    field[ghosts[touched]] = np.maximum(best[touched], top + GHOST_MARGIN)
    return field


@dataclass(frozen=True, eq=False)
class EnergyState:
    """Sampled phi_i after stage i: NaN outside U_i."""

    grid: EnergyGrid
    stage: int
    values: np.ndarray
    tags: np.ndarray
    stages: np.ndarray
    field: np.ndarray
    contours: BoundaryContours
    charts: Tuple[Optional[LocalMorseChart], ...] = ()
    diagnostics: Tuple[dict, ...] = ()

    @property
    def top(self) -> float:
        return self.stage + constants.LEVEL_STEP

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    def boundary_event(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Negative inside U_i, zero on its sampled boundary."""
        return self.grid.interpolate(self.field, charts, coords) - self.top

    def undefined_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.defined)

    def commit(
        self,
        ids: np.ndarray,
        values: np.ndarray,
        tags: np.ndarray,
        chart: Optional[LocalMorseChart],
        diagnostics: dict,
    ) -> "EnergyState":
        """Next stage with `values` written at the undefined nodes `ids`."""
        stage = self.stage + 1
        ids = np.asarray(ids, dtype=int)
        if len(np.unique(ids)) != len(ids):
            raise ScaffoldError("a node was assigned twice in one stage", stage=stage)
        if np.any(self.defined[ids]):
            raise ScaffoldError("stage would overwrite values of an earlier stage", stage=stage)
        new_values = self.values.copy()
        new_tags = self.tags.copy()
        new_stages = self.stages.copy()
        new_values[ids] = values
        new_tags[ids] = tags
        new_stages[ids] = stage
        top = stage + constants.LEVEL_STEP
        field = level_field(self.grid, new_values, top)
        return EnergyState(
            grid=self.grid,
            stage=stage,
            values=new_values,
            tags=new_tags,
            stages=new_stages,
            field=field,
            contours=extract_contours(self.grid, field, top),
            charts=self.charts + (chart,),
            diagnostics=self.diagnostics + (diagnostics,),
        )

    def describe(self) -> dict:
        defined = self.defined
        return {
            "stage": self.stage,
            "level": float(self.top),
            "defined_nodes": int(np.sum(defined)),
            "boundary_components": len(self.contours),
            "value_range": [float(np.min(self.values[defined])), float(np.max(self.values[defined]))]
            if np.any(defined)
            else [],
        }


def empty_state(grid: EnergyGrid) -> EnergyState:
    values = np.full(grid.size, np.nan)
    return EnergyState(
        grid=grid,
        stage=0,
        values=values,
        tags=np.full(grid.size, UNDEFINED, dtype=np.int8),
        stages=np.zeros(grid.size, dtype=np.int16),
        field=np.full(grid.size, constants.LEVEL_STEP + FAR_OFFSET),
        contours=BoundaryContours(grid, constants.LEVEL_STEP, ()),
    )
