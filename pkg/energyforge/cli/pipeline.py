"""
One CLI run: the upstream pipeline is computed lazily and at most once, so
`all` reuses the analysis and the order for every later command.
"""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import List

import yaml

from energyforge.catalog import resolve_spec
from energyforge.chain_recurrence.analysis import ChainAnalysis, analyze_chains, screen_flow
from energyforge.chain_recurrence.cover import BoxCover, make_cover
from energyforge.chain_recurrence.graph import TransitionGraph, build_transition_graph
from energyforge.cli.artifacts import BUILD_LOG, ENERGY_GRID
from energyforge.config import FlowSpec, RunConfig, build_system, load_flow_spec
from energyforge.energy_builder.field import EnergyField, read_energy_grid
from energyforge.energy_builder.grid import make_grid
from energyforge.errors import SpecError
from energyforge.fixed_points.detect import FixedPointRecord, find_fixed_points
from energyforge.fixed_points.invariant_manifolds import trace_all
from energyforge.manifold_flow.system import FlowSystem
from energyforge.settings import Settings
from energyforge.smale_order.order import OrderedSpectrum, order_fixed_points


class PipelineRun:
    def __init__(self, config: RunConfig, settings: Settings):
        self.config = config
        self.settings = settings

    @property
    def workers(self) -> int:
        return self.settings.threads

    @property
    def out_dir(self) -> Path:
        return self.config.out_dir

    def output(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    @cached_property
    def spec(self) -> FlowSpec:
        return load_flow_spec(resolve_spec(self.config.spec_path))

    @cached_property
    def system(self) -> FlowSystem:
        return build_system(self.spec, tol=self.config.tol_int, tol_event=self.config.tol_event)

    @cached_property
    def cover(self) -> BoxCover:
        return make_cover(self.system.manifold)

    @cached_property
    def graph(self) -> TransitionGraph:
        return build_transition_graph(self.system, self.cover, workers=self.workers)

    @cached_property
    def analysis(self) -> ChainAnalysis:
        return analyze_chains(self.graph)

    @cached_property
    def records(self) -> List[FixedPointRecord]:
        return find_fixed_points(self.system, self.cover, tol_hyp=self.config.tol_hyp, workers=self.workers)

    @cached_property
    def owners(self) -> List[int]:
        return screen_flow(self.analysis, self.records)

    @cached_property
    def spectrum(self) -> OrderedSpectrum:
        traces = trace_all(self.system, self.records)
        return order_fixed_points(self.system, self.records, traces, self.analysis, self.owners)

    def built_resolution(self) -> int:
        """Grid resolution recorded by `build`, else the configured one."""
        log = self.out_dir / BUILD_LOG
        if log.exists():
            with open(log) as f:
                recorded = (yaml.safe_load(f) or {}).get("run", {}).get("grid")
            if isinstance(recorded, int):
                return recorded
        return self.config.grid

    def load_field(self) -> EnergyField:
        """The energy grid written by `build`.

        Raises:
            SpecError: the grid file is missing or does not match the grid.
        """
        path = self.out_dir / ENERGY_GRID
        if not path.exists():
            raise SpecError(f"energy grid file not found: {path}; run 'build' first")
        grid = make_grid(self.system.manifold, self.built_resolution())
        return read_energy_grid(grid, path, k=len(self.spectrum))
