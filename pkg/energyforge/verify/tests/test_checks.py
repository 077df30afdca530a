#!/usr/bin/env python

import unittest
from dataclasses import replace

import numpy as np

from energyforge.catalog import resolve_spec
from energyforge.chain_recurrence.analysis import analyze_chains, screen_flow
from energyforge.chain_recurrence.cover import make_cover
from energyforge.chain_recurrence.graph import build_transition_graph
from energyforge.config import build_system, load_flow_spec
from energyforge.energy_builder.stages import build_energy
from energyforge.fixed_points.detect import find_fixed_points
from energyforge.fixed_points.invariant_manifolds import trace_all
from energyforge.manifold_flow.manifolds import make_manifold
from energyforge.smale_order.order import order_fixed_points
from energyforge.verify.checks import (
    CheckSection,
    check_critical_structure,
    check_decomposition,
    check_euler,
    check_monotone,
    cross_check_oracle,
    fit_quadratic,
    sample_points,
)
from energyforge.verify.report import run_checks
from energyforge.verify.self_test import perturbed_field, reversed_order, self_test


class IndexOnly:
    def __init__(self, index):
        self.index = index


def records_with(*counts):
    return [IndexOnly(index) for index, count in enumerate(counts) for _ in range(count)]


def catalog_pipeline(name, cover_resolution, grid):
    system = build_system(load_flow_spec(resolve_spec(name)))
    cover = make_cover(system.manifold, cover_resolution)
    analysis = analyze_chains(build_transition_graph(system, cover))
    records = find_fixed_points(system, cover)
    owners = screen_flow(analysis, records)
    spectrum = order_fixed_points(system, records, trace_all(system, records), analysis, owners)
    return system, analysis, spectrum, build_energy(system, spectrum, resolution=grid)


def circle_pipeline():
    return catalog_pipeline("circle_two_points", 128, 64)


class TestEuler(unittest.TestCase):
    """Test cases for the alternating fixed-point count."""

    def test_sphere_sink_and_source(self):
        section = check_euler(records_with(1, 0, 1), make_manifold("sphere"))
        self.assertTrue(section.passed)
        self.assertEqual(section.results["alternating_sum"], 2)

    def test_torus_height_function(self):
        section = check_euler(records_with(1, 2, 1), make_manifold("torus"))
        self.assertTrue(section.passed)
        self.assertEqual(section.results["counts_by_index"], [1, 2, 1])

    def test_sphere_with_a_saddle_fails(self):
        section = check_euler(records_with(1, 1, 1), make_manifold("sphere"))
        self.assertFalse(section.passed)
        self.assertEqual(len(section.problems), 1)

    def test_circle(self):
        self.assertTrue(check_euler(records_with(1, 1), make_manifold("circle")).passed)


class TestSampling(unittest.TestCase):
    """Test cases for random samples and the quadratic fit."""

    def test_sphere_samples_sit_in_their_home_chart(self):
        sphere = make_manifold("sphere")
        charts, coords = sample_points(sphere, 500, np.random.default_rng(7))
        self.assertTrue(np.all(np.linalg.norm(coords, axis=1) <= 1.0 + 1e-12))
        self.assertEqual(set(charts.tolist()), {0, 1})
        np.testing.assert_allclose(np.linalg.norm(sphere.embed(charts, coords), axis=1), 1.0)

    def test_samples_are_reproducible(self):
        torus = make_manifold("torus")
        _, a = sample_points(torus, 10, np.random.default_rng(3))
        _, b = sample_points(torus, 10, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
        self.assertTrue(np.all((a >= 0.0) & (a < 1.0)))

    def test_quadratic_fit_recovers_a_saddle(self):
        rng = np.random.default_rng(0)
        offsets = rng.uniform(-0.1, 0.1, size=(40, 2))
        values = 2.0 + 0.3 * offsets[:, 0] + offsets[:, 0] ** 2 - 3.0 * offsets[:, 1] ** 2
        value, slope, hessian, residual = fit_quadratic(offsets, values)
        self.assertAlmostEqual(value, 2.0)
        np.testing.assert_allclose(slope, [0.3, 0.0], atol=1e-10)
        np.testing.assert_allclose(hessian, np.diag([2.0, -6.0]), atol=1e-8)
        self.assertLess(residual, 1e-12)

    def test_long_problem_lists_are_truncated(self):
        section = CheckSection("demo", False, {}, {}, problems=[f"p{i}" for i in range(25)])
        shown = section.describe()["problems"]
        self.assertEqual(len(shown), 21)
        self.assertEqual(shown[-1], "(+5 more)")


class TestCircleChecks(unittest.TestCase):
    """Test cases for every check on the two-point circle flow."""

    @classmethod
    def setUpClass(cls):
        cls.system, cls.analysis, cls.spectrum, cls.field = circle_pipeline()

    def test_monotone(self):
        section = check_monotone(self.field, self.system, self.spectrum.ordered, n_samples=200, seed=1)
        self.assertTrue(section.passed, section.problems)
        self.assertEqual(section.results["violations"], 0)
        self.assertGreaterEqual(section.results["worst_margin"], 0.0)

    def test_constant_field_is_not_decreasing(self):
        flat = replace(self.field, values=np.full_like(self.field.values, 1.5))
        section = check_monotone(flat, self.system, self.spectrum.ordered, n_samples=200, seed=1)
        self.assertFalse(section.passed)
        self.assertEqual(section.results["not_decreasing"], 200)
        self.assertEqual(section.results["increasing"], 0)
        self.assertIn("does not decrease", section.problems[0])

    def test_reversed_flow_violates_monotonicity(self):
        section = check_monotone(self.field, self.system.reversed(), self.spectrum.ordered, n_samples=200, seed=1)
        self.assertFalse(section.passed)
        self.assertGreater(section.results["violations"], 0)

    def test_critical_structure(self):
        section = check_critical_structure(self.field, self.spectrum.ordered, n_samples=200)
        self.assertTrue(section.passed, section.problems)
        fits = section.results["fixed_points"]
        self.assertEqual([f["fitted_index"] for f in fits], [0, 1])
        self.assertTrue(all(f["residual"] < 1e-3 for f in fits))
        # every reported result feeds the verdict
        self.assertEqual(sorted(section.results), ["fixed_points", "flat_samples", "median_gradient", "regular_samples"])

    def test_constant_field_has_no_regular_points(self):
        flat = replace(self.field, values=np.full_like(self.field.values, 1.5))
        section = check_critical_structure(flat, self.spectrum.ordered, n_samples=200)
        self.assertFalse(section.passed)
        self.assertEqual(section.results["flat_samples"], 200)

    def test_perturbed_grid_breaks_the_fit(self):
        section = check_critical_structure(perturbed_field(self.field, seed=0), self.spectrum.ordered, n_samples=200)
        self.assertFalse(section.passed)

    def test_decomposition(self):
        section = check_decomposition(self.field, self.system, self.spectrum)
        self.assertTrue(section.passed, section.problems)
        self.assertEqual(section.results["without_backward_limit"], 0)
        self.assertEqual(section.results["without_forward_limit"], 0)
        # only nodes already next to the source stay there
        self.assertLessEqual(section.results["stable_set_nodes"][2], 5)
        self.assertLessEqual(section.results["unstable_set_nodes"][1], 5)

    def test_reversed_order_breaks_closure(self):
        self.assertEqual(self.spectrum.closure_violations(), [])
        self.assertGreater(len(reversed_order(self.spectrum).closure_violations()), 0)

    def test_oracle(self):
        section = cross_check_oracle(self.field, self.system, self.analysis, self.spectrum.ordered, n_pairs=300)
        self.assertTrue(section.passed, section.problems)
        self.assertEqual(section.results["contradictions"], 0)

    def test_report(self):
        report = run_checks(
            self.field, self.system, self.spectrum, self.analysis, n_samples=200, n_pairs=300, decomposition=False
        )
        self.assertTrue(report.passed, report.failed)
        described = report.describe()
        self.assertEqual(sorted(described["checks"]), ["critical_structure", "euler", "monotone", "oracle"])
        self.assertEqual(described["grid"], 64)

    def test_self_test_catches_every_mutation(self):
        section = self_test(self.field, self.system, self.spectrum, n_samples=200)
        self.assertTrue(section.passed, section.problems)
        self.assertEqual(sorted(section.results), ["perturbed_grid", "reversed_order", "time_reversed"])


class TestSurfaceMonotone(unittest.TestCase):
    """Test cases for strict decrease on the torus and the sphere."""

    def assert_decreasing(self, system, spectrum, field):
        section = check_monotone(field, system, spectrum.ordered, n_samples=200, seed=2)
        self.assertTrue(section.passed, section.problems)
        self.assertEqual(section.results["not_decreasing"], 0)

        flat = replace(field, values=np.full_like(field.values, 2.5))
        self.assertFalse(check_monotone(flat, system, spectrum.ordered, n_samples=200, seed=2).passed)

    def test_torus(self):
        system, _, spectrum, field = catalog_pipeline("torus_height_gradient", 48, 64)
        self.assert_decreasing(system, spectrum, field)

    def test_sphere(self):
        system, _, spectrum, field = catalog_pipeline("sphere_north_south", 32, 32)
        self.assert_decreasing(system, spectrum, field)


if __name__ == "__main__":
    unittest.main()
