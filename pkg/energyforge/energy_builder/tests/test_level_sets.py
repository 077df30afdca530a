#!/usr/bin/env python

import math
import unittest

import numpy as np

from energyforge.energy_builder.grid import make_grid
from energyforge.energy_builder.level_sets import count_components, extract_contours
from energyforge.manifold_flow.manifolds import make_manifold


def distance_to(grid, centre):
    _, coords = grid.node_coords()
    delta = coords - np.asarray(centre)
    delta -= np.round(delta)
    return np.linalg.norm(delta, axis=1)


class TestTorusContours(unittest.TestCase):
    """Test cases for marching squares on the torus."""

    @classmethod
    def setUpClass(cls):
        cls.grid = make_grid(make_manifold("torus"), 64)

    def test_disk_boundary_is_one_closed_curve(self):
        contours = extract_contours(self.grid, distance_to(self.grid, (0.5, 0.5)), 0.2)
        self.assertEqual(len(contours), 1)
        curve = contours.contours[0]
        self.assertTrue(curve.closed)
        self.assertAlmostEqual(curve.perimeter, 2.0 * math.pi * 0.2, delta=0.01)

    def test_disk_around_the_seam(self):
        contours = extract_contours(self.grid, distance_to(self.grid, (0.0, 0.0)), 0.2)
        self.assertEqual(len(contours), 1)
        self.assertTrue(contours.contours[0].closed)
        self.assertAlmostEqual(contours.contours[0].perimeter, 2.0 * math.pi * 0.2, delta=0.01)

    def test_band_has_two_wrapping_boundaries(self):
        _, coords = self.grid.node_coords()
        band = np.abs(coords[:, 1] - 0.5)
        contours = extract_contours(self.grid, band, 0.1 + 0.5 * self.grid.spacing)
        self.assertEqual(len(contours), 2)
        for curve in contours.contours:
            self.assertTrue(curve.closed)
            self.assertAlmostEqual(curve.perimeter, 1.0, places=6)

    def test_locate_points_on_the_curve(self):
        contours = extract_contours(self.grid, distance_to(self.grid, (0.5, 0.5)), 0.2)
        angles = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
        points = 0.5 + 0.2 * np.column_stack([np.cos(angles), np.sin(angles)])
        component, position, distance = contours.locate(np.zeros(12, dtype=int), points)
        self.assertEqual(component.tolist(), [0] * 12)
        self.assertTrue(np.all(distance < 1e-3))
        perimeter = contours.contours[0].perimeter
        self.assertTrue(np.all((position >= 0) & (position < perimeter)))
        # consecutive samples are a twelfth of the perimeter apart along the curve
        steps = np.mod(np.diff(position), perimeter)
        steps = np.minimum(steps, perimeter - steps)
        np.testing.assert_allclose(steps, perimeter / 12, rtol=0.05)


class TestOtherContours(unittest.TestCase):
    """Test cases for contours on the circle and the sphere."""

    def test_circle_crossings_are_points(self):
        grid = make_grid(make_manifold("circle"), 64)
        contours = extract_contours(grid, distance_to(grid, (0.5,)), 0.2 + 0.25 * grid.spacing)
        self.assertEqual(len(contours), 2)
        xs = sorted(float(c.coords[0, 0]) for c in contours.contours)
        np.testing.assert_allclose(xs, [0.3 - 0.25 / 64, 0.7 + 0.25 / 64], atol=1e-12)
        component, _, _ = contours.locate(np.zeros(1, dtype=int), np.array([[0.69]]))
        self.assertGreater(float(contours.contours[component[0]].coords[0, 0]), 0.5)

    def test_sphere_latitude_lies_in_one_chart(self):
        manifold = make_manifold("sphere")
        grid = make_grid(manifold, 48)
        charts, coords = grid.node_coords()
        height = manifold.embed(charts, coords)[:, 2]
        contours = extract_contours(grid, height, -0.5)
        self.assertEqual(len(contours), 1)
        curve = contours.contours[0]
        self.assertTrue(curve.closed)
        self.assertEqual(set(curve.charts.tolist()), {0})
        # latitude z = -1/2 is a circle of radius sqrt(3)/2 in space
        self.assertAlmostEqual(curve.perimeter, math.pi * math.sqrt(3.0), delta=0.05)

    def test_count_components(self):
        line = np.linspace(0.0, 1.0, 11)
        points = np.concatenate([np.column_stack([line, 0 * line]), np.column_stack([line, 0 * line + 1.0])])
        self.assertEqual(count_components(points, 0.1), 2)


if __name__ == "__main__":
    unittest.main()
