#!/usr/bin/env python

import math
import unittest

import numpy as np

from energyforge.errors import IntegrationError, SpecError
from energyforge.manifold_flow.manifolds import ChartPoint, make_manifold
from energyforge.manifold_flow.system import FlowSystem, parse_chart_fields, parse_field


class TestFlatPeriodic(unittest.TestCase):
    """Test cases for circle and torus wrap-around."""

    def test_normalize_wraps_into_unit_interval(self):
        torus = make_manifold("torus")
        _, coords = torus.normalize(np.array([0]), np.array([[1.25, -0.25]]))
        np.testing.assert_allclose(coords, [[0.25, 0.75]])

    def test_tiny_negative_wraps_to_zero(self):
        circle = make_manifold("circle")
        _, coords = circle.normalize(np.array([0]), np.array([[-1e-17]]))
        self.assertEqual(coords[0, 0], 0.0)

    def test_distance_uses_wrap_around(self):
        torus = make_manifold("torus")
        d = torus.distance([0], [[0.95, 0.5]], [0], [[0.05, 0.5]])
        self.assertAlmostEqual(float(d[0]), 0.1, places=12)

    def test_displacement_is_shortest(self):
        circle = make_manifold("circle")
        offsets = circle.displacement(0, [0.9], np.array([0]), np.array([[0.1]]))
        self.assertAlmostEqual(float(offsets[0, 0]), 0.2, places=12)


class TestSphere(unittest.TestCase):
    """Test cases for the two-chart stereographic sphere."""

    def setUp(self):
        self.sphere = make_manifold("sphere")

    def test_normalize_switches_far_points(self):
        charts, coords = self.sphere.normalize(np.array([0, 0]), np.array([[2.0, 0.0], [1.1, 0.0]]))
        self.assertEqual(charts.tolist(), [1, 0])
        np.testing.assert_allclose(coords[0], [0.5, 0.0])

    def test_embedding_of_poles(self):
        points = self.sphere.embed(np.array([0, 1]), np.zeros((2, 2)))
        np.testing.assert_allclose(points, [[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])

    def test_chart_representations_have_zero_distance(self):
        u = np.array([[0.6, -0.3]])
        w = u / float(np.sum(u * u))
        self.assertLess(float(self.sphere.distance([0], u, [1], w)[0]), 1e-12)

    def test_consistent_field_passes(self):
        field = parse_chart_fields(self.sphere, {"south": ["-x", "-y"], "north": ["x", "y"]})
        FlowSystem(self.sphere, field).validate()

    def test_inconsistent_field_is_rejected(self):
        field = parse_chart_fields(self.sphere, {"south": ["-x", "-y"], "north": ["-x", "-y"]})
        with self.assertRaises(SpecError):
            FlowSystem(self.sphere, field).validate()

    def test_missing_chart_expressions(self):
        with self.assertRaises(SpecError):
            parse_chart_fields(self.sphere, {"south": ["-x", "-y"]})


class TestPlaneDisk(unittest.TestCase):
    """Test cases for the trapped plane-disk domain."""

    def test_inward_field_passes_trapping_check(self):
        disk = make_manifold("plane-disk", radius=1.0)
        FlowSystem(disk, parse_field(["-x", "-y"])).validate()

    def test_outward_field_fails_trapping_check(self):
        disk = make_manifold("plane-disk", radius=4.0)
        with self.assertRaises(SpecError):
            FlowSystem(disk, parse_field(["x", "-y"])).validate()

    def test_trapping_can_be_disabled(self):
        disk = make_manifold("plane-disk", radius=4.0, trapping=False)
        FlowSystem(disk, parse_field(["x", "-y"])).validate()

    def test_radius_is_required(self):
        with self.assertRaises(SpecError):
            make_manifold("plane-disk")

    def test_outside_mask(self):
        disk = make_manifold("plane-disk", radius=1.0)
        mask = disk.outside(np.array([0, 0]), np.array([[0.5, 0.5], [1.0, 0.5]]))
        self.assertEqual(mask.tolist(), [False, True])


class TestFlowSystem(unittest.TestCase):
    """Test cases for flow system validation and evaluation."""

    def test_unknown_manifold_kind(self):
        with self.assertRaises(SpecError):
            make_manifold("klein-bottle")

    def test_dimension_mismatch(self):
        with self.assertRaises(SpecError):
            FlowSystem(make_manifold("circle"), parse_field(["x", "y"]))

    def test_non_finite_velocity(self):
        system = FlowSystem(make_manifold("plane-disk", radius=1.0), parse_field(["1/x", "0"]))
        with self.assertRaises(IntegrationError):
            system.velocity_at(ChartPoint.of(0, [0.0, 0.5]))

    def test_reversed_field_flips_sign(self):
        system = FlowSystem(make_manifold("circle"), parse_field(["sin(2*pi*x)"]))
        point = ChartPoint.of(0, [0.125])
        forward = system.velocity_at(point)[0]
        self.assertAlmostEqual(system.reversed().velocity_at(point)[0], -forward, places=14)
        self.assertAlmostEqual(forward, math.sin(math.pi / 4.0), places=14)


if __name__ == "__main__":
    unittest.main()
