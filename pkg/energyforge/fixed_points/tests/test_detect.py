#!/usr/bin/env python

import math
import unittest

import numpy as np

from energyforge.catalog import resolve_spec
from energyforge.chain_recurrence.cover import make_cover
from energyforge.config import build_system, load_flow_spec
from energyforge.errors import HyperbolicityError, OutOfChartError
from energyforge.fixed_points.charts import eigen_frame, local_morse
from energyforge.fixed_points.detect import classify, find_fixed_points, jacobian
from energyforge.manifold_flow.integrator import flow_batch
from energyforge.manifold_flow.manifolds import ChartPoint, make_manifold
from energyforge.manifold_flow.system import FlowSystem, parse_field

LN2 = math.log(2.0)


def catalog_system(name):
    return build_system(load_flow_spec(resolve_spec(name)))


def planar(expressions, radius=4.0):
    manifold = make_manifold("plane-disk", radius=radius, trapping=False)
    return FlowSystem(manifold, parse_field(expressions, parameters={"a": LN2}))


def near(record, coords, tol=1e-8):
    delta = np.asarray(record.location.coords) - np.asarray(coords)
    # wrap-around offsets on the unit circle and torus
    return bool(np.all(np.abs(delta - np.round(delta)) <= tol))


def ball_samples(n, inner, outer, seed):
    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(inner ** 2, outer ** 2, size=n))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])


class TestCatalogFixedPoints(unittest.TestCase):
    """Test cases for fixed point detection on catalog flows."""

    @classmethod
    def setUpClass(cls):
        cls.torus = catalog_system("torus_height_gradient")
        cls.torus_points = find_fixed_points(cls.torus, make_cover(cls.torus.manifold, 48))

    def test_torus_has_four_points(self):
        self.assertEqual([r.index for r in self.torus_points], [0, 1, 1, 2])
        self.assertEqual([r.kind for r in self.torus_points], ["sink", "saddle", "saddle", "source"])

    def test_torus_locations(self):
        sink, first, second, source = self.torus_points
        self.assertTrue(near(sink, (0.5, 0.5)))
        self.assertTrue(near(first, (0.0, 0.5)))
        self.assertTrue(near(second, (0.5, 0.0)))
        self.assertTrue(near(source, (0.0, 0.0)))

    def test_torus_rates_are_ln2(self):
        for record in self.torus_points:
            np.testing.assert_allclose(np.abs(record.eigenvalues.real), [LN2, LN2], rtol=1e-6)
            np.testing.assert_allclose(record.eigenvalues.imag, 0.0, atol=1e-9)

    def test_saddle_frame_lists_unstable_direction_first(self):
        saddle = self.torus_points[1]
        np.testing.assert_allclose(saddle.frame.inverse[:, 0], [1.0, 0.0], atol=1e-6)
        np.testing.assert_allclose(saddle.frame.inverse[:, 1], [0.0, 1.0], atol=1e-6)

    def test_linearization_radius(self):
        # separation 0.5 caps r_p at 0.225; sin(2 pi r) stays within 10% of
        # 2 pi r up to r ~ 0.123, so three shrink steps are needed
        for record in self.torus_points:
            self.assertAlmostEqual(record.r_p, 0.225 * 0.8 ** 3, places=9)

    def test_circle(self):
        system = catalog_system("circle_two_points")
        records = find_fixed_points(system, make_cover(system.manifold, 64))
        self.assertEqual([r.kind for r in records], ["sink", "source"])
        self.assertTrue(near(records[0], (0.5,)))
        self.assertTrue(near(records[1], (0.0,)))
        for record in records:
            self.assertLessEqual(record.r_p, 0.225)

    def test_sphere_poles(self):
        system = catalog_system("sphere_north_south")
        records = find_fixed_points(system, make_cover(system.manifold, 16))
        self.assertEqual([(r.kind, r.location.chart) for r in records], [("sink", 0), ("source", 1)])
        for record in records:
            self.assertTrue(near(record, (0.0, 0.0)))

    def test_center_is_rejected(self):
        system = catalog_system("planar_center")
        with self.assertRaises(HyperbolicityError) as ctx:
            find_fixed_points(system, make_cover(system.manifold, 16))
        self.assertTrue(np.allclose(ctx.exception.location.coords, (0.0, 0.0), atol=1e-6))


class TestTorusCharts(unittest.TestCase):
    """Test cases for linearizing charts on the torus height flow."""

    @classmethod
    def setUpClass(cls):
        cls.system = catalog_system("torus_height_gradient")
        cls.records = find_fixed_points(cls.system, make_cover(cls.system.manifold, 48))

    def test_chart_conjugates_the_flow_to_its_linear_part(self):
        local = ball_samples(100, 0.05, 0.7, seed=11)
        for record in self.records:
            chart = local_morse(record, level=1.0)
            charts, coords = chart.point_at(local)
            growth = np.where(np.arange(2) < record.index, 2.0, 0.5)
            for t in (0.5, -0.5):
                flowed = chart.coordinates(*flow_batch(self.system, charts, coords, t))
                residue = np.linalg.norm(flowed - local * growth ** t, axis=1)
                self.assertTrue(np.all(residue < 0.15 * np.linalg.norm(local, axis=1)), record.kind)

    def test_local_energy_decreases_along_the_flow(self):
        local = ball_samples(100, 0.05, 1.0, seed=12)
        for record in self.records:
            chart = local_morse(record, level=float(record.index))
            charts, coords = chart.point_at(local)
            later = flow_batch(self.system, charts, coords, 1e-3)
            drop = chart.evaluate(charts, coords) - chart.evaluate(*later, strict=False)
            self.assertTrue(np.all(drop > 0.0), record.kind)


class TestLinearization(unittest.TestCase):
    """Test cases for Jacobians, frames and linearization radii."""

    def test_jacobian_of_linear_field(self):
        system = planar(["2*x + 3*y", "-x + 0.5*y"])
        np.testing.assert_allclose(jacobian(system, ChartPoint.of(0, (0.3, -0.2))), [[2, 3], [-1, 0.5]], atol=1e-8)

    def test_classify_weak_eigenvalue(self):
        system = planar(["1e-4*x", "-a*y"])
        with self.assertRaises(HyperbolicityError):
            classify(system, ChartPoint.of(0, (0.0, 0.0)))

    def test_linear_saddle_radius_is_domain_capped(self):
        system = planar(["a*x", "-a*y"])
        records = find_fixed_points(system, make_cover(system.manifold, 8))
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0].kind, "saddle")
        self.assertAlmostEqual(records[0].r_p, 2.0)

    def test_cubic_saddle_radius(self):
        system = planar(["a*x + x^3", "-a*y"])
        records = find_fixed_points(system, make_cover(system.manifold, 8))
        r_p = records[0].r_p
        self.assertLessEqual(r_p ** 2, 0.1 * LN2)
        self.assertGreater((r_p / 0.8) ** 2, 0.1 * LN2)

    def test_non_normal_frame_diagonalizes(self):
        matrix = np.array([[-1.0, 5.0], [0.0, -2.0]])
        frame, orthogonal = eigen_frame(matrix)
        self.assertFalse(orthogonal)
        local = np.linalg.inv(frame) @ matrix @ frame
        np.testing.assert_allclose(local, np.diag([-1.0, -2.0]), atol=1e-12)

    def test_spiral_uses_orthogonal_frame(self):
        frame, orthogonal = eigen_frame(np.array([[-1.0, -3.0], [3.0, -1.0]]))
        self.assertTrue(orthogonal)
        np.testing.assert_allclose(frame.T @ frame, np.eye(2), atol=1e-12)

    def test_spiral_sink_is_charted(self):
        system = planar(["-x - 3*y", "3*x - y"])
        records = find_fixed_points(system, make_cover(system.manifold, 8))
        self.assertEqual(records[0].kind, "sink")
        self.assertTrue(records[0].frame.orthogonal)

    def test_spiral_sink_energy_decreases_along_the_flow(self):
        system = planar(["-x - 3*y", "3*x - y"])
        chart = local_morse(find_fixed_points(system, make_cover(system.manifold, 8))[0], level=1.0)
        charts, coords = chart.point_at(ball_samples(100, 0.05, 1.0, seed=13))
        later = flow_batch(system, charts, coords, 1e-3)
        self.assertTrue(np.all(chart.evaluate(*later, strict=False) < chart.evaluate(charts, coords)))


class TestLocalMorseChart(unittest.TestCase):
    """Test cases for local quadratic energy charts."""

    def setUp(self):
        system = planar(["a*x", "-a*y"])
        self.record = find_fixed_points(system, make_cover(system.manifold, 8))[0]
        self.chart = local_morse(self.record, level=1.0)

    def test_value_at_fixed_point(self):
        charts, coords = self.record.location.as_arrays()
        self.assertAlmostEqual(float(self.chart.evaluate(charts, coords)[0]), 1.0)

    def test_quadratic_signature(self):
        values = self.chart.evaluate_local(np.array([[0.5, 0.0], [0.0, 0.5]]))
        np.testing.assert_allclose(values, [0.75, 1.25])

    def test_point_at_inverts_coordinates(self):
        local = np.array([[0.3, -0.4], [-0.9, 0.1]])
        charts, coords = self.chart.point_at(local)
        np.testing.assert_allclose(self.chart.coordinates(charts, coords), local, atol=1e-12)

    def test_ball_fits_linearization_radius(self):
        charts, coords = self.chart.point_at(np.array([[1.0, 0.0], [0.0, -1.0]]))
        self.assertTrue(np.all(np.linalg.norm(coords, axis=1) <= self.record.r_p + 1e-12))

    def test_outside_ball_raises(self):
        charts, coords = self.chart.point_at(np.array([[1.5, 0.0]]))
        with self.assertRaises(OutOfChartError):
            self.chart.evaluate(charts, coords)
        self.assertAlmostEqual(float(self.chart.evaluate(charts, coords, strict=False)[0]), 1.0 - 2.25)


if __name__ == "__main__":
    unittest.main()
