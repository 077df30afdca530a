#!/usr/bin/env python

import math
import unittest

import numpy as np

from energyforge.catalog import resolve_spec
from energyforge.chain_recurrence.analysis import analyze_chains, screen_flow
from energyforge.chain_recurrence.cover import make_cover
from energyforge.chain_recurrence.graph import build_transition_graph
from energyforge.config import build_system, load_flow_spec
from energyforge.energy_builder.grid import make_grid
from energyforge.energy_builder.scaffold import saddle_topology
from energyforge.energy_builder.stages import SADDLE_TOPOLOGY, base_sink, build_energy, extend_sink, sink_chart
from energyforge.energy_builder.state import (
    FAR_OFFSET,
    LOCAL,
    PATCHED,
    UNDEFINED,
    V1,
    V2,
    V3,
    V4,
    VK,
    empty_state,
    level_field,
)
from energyforge.errors import ScaffoldError
from energyforge.fixed_points.charts import local_morse
from energyforge.fixed_points.detect import FixedPointRecord, find_fixed_points
from energyforge.fixed_points.invariant_manifolds import trace_all
from energyforge.manifold_flow.manifolds import ChartPoint, make_manifold
from energyforge.smale_order.order import order_fixed_points

TOL = 1e-9


def catalog_run(name, cover_resolution):
    system = build_system(load_flow_spec(resolve_spec(name)))
    cover = make_cover(system.manifold, cover_resolution)
    analysis = analyze_chains(build_transition_graph(system, cover))
    records = find_fixed_points(system, cover)
    owners = screen_flow(analysis, records)
    return system, order_fixed_points(system, records, trace_all(system, records), analysis, owners)


def saddle_record():
    return FixedPointRecord(
        location=ChartPoint.of(0, (0.0, 0.5)),
        index=1,
        kind="saddle",
        jacobian=np.diag([1.0, -1.0]),
        eigenvalues=np.array([1.0, -1.0]),
    )


class TestLevelField(unittest.TestCase):
    """Test cases for the finite extension used as the boundary event."""

    def test_ghost_nodes_extrapolate_past_the_level(self):
        grid = make_grid(make_manifold("circle"), 32)
        values = np.full(grid.size, np.nan)
        values[10:15] = [1.3, 1.1, 1.0, 1.1, 1.3]
        top = 4.0 / 3.0
        field = level_field(grid, values, top)
        np.testing.assert_allclose(field[10:15], values[10:15])
        self.assertAlmostEqual(field[9], 1.5)
        self.assertAlmostEqual(field[15], 1.5)
        self.assertTrue(np.all(field[16:] == top + FAR_OFFSET))
        self.assertTrue(np.all(field[:9] == top + FAR_OFFSET))

    def test_ghost_without_a_second_node_mirrors_the_level(self):
        grid = make_grid(make_manifold("circle"), 32)
        values = np.full(grid.size, np.nan)
        values[5] = 1.25
        field = level_field(grid, values, 4.0 / 3.0)
        self.assertAlmostEqual(field[4], 2.0 * 4.0 / 3.0 - 1.25)
        self.assertAlmostEqual(field[6], 2.0 * 4.0 / 3.0 - 1.25)

    def test_empty_state_has_no_boundary(self):
        state = empty_state(make_grid(make_manifold("torus"), 32))
        self.assertEqual(len(state.contours), 0)
        self.assertTrue(np.all(state.boundary_event(*state.grid.node_coords()) > 0))


class TestSinkStages(unittest.TestCase):
    """Test cases for the base case and later sink stages."""

    @classmethod
    def setUpClass(cls):
        cls.system, cls.spectrum = catalog_run("circle_two_points", 128)
        cls.grid = make_grid(cls.system.manifold, 64)
        cls.sink = cls.spectrum.ordered[0]
        cls.state = base_sink(empty_state(cls.grid), cls.sink)

    def test_base_case_is_the_local_sublevel_set(self):
        state = self.state
        self.assertEqual(state.stage, 1)
        defined = state.defined
        self.assertTrue(np.all(state.tags[defined] == LOCAL))
        self.assertTrue(np.all(state.values[defined] <= 4.0 / 3.0 + TOL))
        self.assertAlmostEqual(float(state.values[32]), 1.0)
        self.assertEqual(len(state.contours), 2)

    def test_boundary_event_sign(self):
        charts, coords = self.grid.node_coords(np.array([32, 0]))
        event = self.state.boundary_event(charts, coords)
        self.assertLess(event[0], 0.0)
        self.assertGreater(event[1], 0.0)

    def test_sink_chart_ball_holds_every_sink_level(self):
        self.assertEqual(sink_chart(self.sink, 1, 1).ball, 1.0)
        self.assertAlmostEqual(sink_chart(self.sink, 1, 2).ball, math.sqrt(4.0 / 3.0))
        self.assertAlmostEqual(sink_chart(self.sink, 1, 3).ball, math.sqrt(7.0 / 3.0))

    def test_second_stage_must_not_be_a_base_case(self):
        with self.assertRaises(ScaffoldError):
            base_sink(self.state, self.sink)

    def test_extend_sink_rejects_a_saddle(self):
        state = empty_state(make_grid(make_manifold("torus"), 32))
        with self.assertRaises(ScaffoldError) as ctx:
            extend_sink(state, saddle_record())
        self.assertEqual(ctx.exception.stage, 1)

    def test_commit_refuses_to_overwrite(self):
        defined = np.flatnonzero(self.state.defined)[:1]
        with self.assertRaises(ScaffoldError):
            self.state.commit(defined, np.array([2.0]), np.array([V1]), None, {})

    def test_commit_refuses_duplicate_nodes(self):
        with self.assertRaises(ScaffoldError):
            self.state.commit(np.array([0, 0]), np.array([2.0, 2.0]), np.array([V1, V1]), None, {})


class TestCircleBuild(unittest.TestCase):
    """Test cases for the energy function of the two-point circle flow."""

    @classmethod
    def setUpClass(cls):
        system, spectrum = catalog_run("circle_two_points", 128)
        cls.field = build_energy(system, spectrum, resolution=64)

    def test_every_node_is_defined(self):
        self.assertEqual(self.field.k, 2)
        self.assertTrue(np.all(np.isfinite(self.field.values)))
        self.assertFalse(np.any(self.field.tags == UNDEFINED))

    def test_values_at_fixed_points(self):
        self.assertEqual([(p, kind) for p, kind, _ in self.field.fixed_point_values], [(1, "sink"), (2, "source")])
        np.testing.assert_allclose([v for _, _, v in self.field.fixed_point_values], [1.0, 2.0], atol=TOL)

    def test_decreases_from_source_to_sink(self):
        values = self.field.values
        self.assertTrue(np.all(np.diff(values[:33]) < 0))
        self.assertTrue(np.all(np.diff(values[32:]) > 0))

    def test_level_sets_per_stage(self):
        self.assertEqual([entry["stage"] for entry in self.field.level_sets], [1, 2])
        self.assertEqual([len(entry["components"]) for entry in self.field.level_sets], [2, 0])
        self.assertEqual(len(self.field.level_sets[1]["scaffold"]["sphere"]), 2)
        self.assertNotIn("geometry", self.field.diagnostics[-1])


class TestSphereBuild(unittest.TestCase):
    """Test cases for the energy function of the pole-to-pole sphere flow."""

    @classmethod
    def setUpClass(cls):
        system, spectrum = catalog_run("sphere_north_south", 32)
        cls.field = build_energy(system, spectrum, resolution=32)

    def test_range(self):
        self.assertEqual(self.field.k, 2)
        self.assertAlmostEqual(float(np.min(self.field.values)), 1.0)
        self.assertAlmostEqual(float(np.max(self.field.values)), 2.0)

    def test_regions(self):
        values, tags, stages = self.field.values, self.field.tags, self.field.stages
        sink = (stages == 1) & (tags == LOCAL)
        cap = (stages == 2) & (tags == LOCAL)
        tube = tags == VK
        self.assertTrue(np.all(sink | cap | tube | (tags == PATCHED)))
        self.assertTrue(np.all((values[sink] >= 1.0 - TOL) & (values[sink] <= 4.0 / 3.0 + TOL)))
        self.assertTrue(np.all((values[tube] >= 4.0 / 3.0 - TOL) & (values[tube] <= 5.0 / 3.0 + TOL)))
        self.assertTrue(np.all((values[cap] >= 5.0 / 3.0 - TOL) & (values[cap] <= 2.0 + TOL)))

    def test_values_at_poles(self):
        np.testing.assert_allclose([v for _, _, v in self.field.fixed_point_values], [1.0, 2.0], atol=TOL)


class TestTorusBuild(unittest.TestCase):
    """Test cases for the energy function of the torus height flow."""

    @classmethod
    def setUpClass(cls):
        cls.system, cls.spectrum = catalog_run("torus_height_gradient", 48)
        cls.field = build_energy(cls.system, cls.spectrum, resolution=64)

    def saddle_chart(self, stage):
        entry = next(d for d in self.field.diagnostics if d["stage"] == stage)
        chart = local_morse(self.spectrum.ordered[stage - 1], stage)
        for _ in range(entry["rescales"]):
            chart = chart.rescaled(0.5)
        return chart, self.spectrum.traces[self.spectrum.order[stage - 1]][1]

    def test_every_stage_contributes(self):
        self.assertEqual(self.field.k, 4)
        self.assertEqual(sorted(np.unique(self.field.stages).tolist()), [1, 2, 3, 4])
        self.assertFalse(np.any(self.field.tags == UNDEFINED))

    def test_values_at_fixed_points(self):
        self.assertEqual(
            [kind for _, kind, _ in self.field.fixed_point_values], ["sink", "saddle", "saddle", "source"]
        )
        np.testing.assert_allclose([v for _, _, v in self.field.fixed_point_values], [1.0, 2.0, 3.0, 4.0], atol=1e-6)

    def test_stage_values_stay_in_their_band(self):
        values, tags, stages = self.field.values, self.field.tags, self.field.stages
        for stage in range(1, 5):
            mine = (stages == stage) & (tags != PATCHED)
            self.assertTrue(np.all(values[mine] >= stage - 1.0 - TOL), f"stage {stage}")
            self.assertTrue(np.all(values[mine] <= stage + 1.0 / 3.0 + TOL), f"stage {stage}")

    def test_region_tags_per_stage(self):
        tags, stages = self.field.tags, self.field.stages
        self.assertEqual(set(np.unique(tags[stages == 1]).tolist()), {LOCAL})
        for stage in (2, 3):
            self.assertTrue(set(np.unique(tags[stages == stage]).tolist()) <= {V1, V2, V3, V4})
            self.assertIn(V3, tags[stages == stage])
        self.assertTrue(set(np.unique(tags[stages == 4]).tolist()) <= {LOCAL, VK, PATCHED})

    def test_saddle_diagnostics(self):
        saddles = [d for d in self.field.diagnostics if d.get("kind") == "saddle"]
        self.assertEqual(len(saddles), 2)
        for entry in saddles:
            self.assertEqual(len(entry["footprints"]), 2)
            self.assertEqual(entry["topology"], {"lower_level": 2, "attaching_arcs": 2, "arc_ends": 4, "arc_midpoints": 2})
        self.assertEqual(len(saddles[0]["facing_components"]), 1)
        self.assertEqual(len(saddles[1]["facing_components"]), 2)

    def test_topology_is_read_from_the_built_values(self):
        for stage in (2, 3):
            chart, unstable = self.saddle_chart(stage)
            self.assertEqual(saddle_topology(self.field.grid, self.field.values, chart, unstable), SADDLE_TOPOLOGY)

    def test_topology_of_a_field_without_the_lower_level(self):
        chart, unstable = self.saddle_chart(2)
        # every node above phi = 5/3 leaves nothing to count
        raised = np.maximum(self.field.values, 2.0)
        self.assertEqual(
            saddle_topology(self.field.grid, raised, chart, unstable),
            {"lower_level": 0, "attaching_arcs": 0, "arc_ends": 0, "arc_midpoints": 0},
        )

    def test_level_sets_per_stage(self):
        components = [len(entry["components"]) for entry in self.field.level_sets]
        self.assertEqual(components, [1, 2, 1, 0])
        saddle = self.field.level_sets[1]["scaffold"]
        self.assertEqual(sorted(saddle), ["arc_ends", "arc_midpoints", "attaching_arcs", "lower_level"])
        self.assertEqual(len(saddle["arc_ends"]), 4)


if __name__ == "__main__":
    unittest.main()
