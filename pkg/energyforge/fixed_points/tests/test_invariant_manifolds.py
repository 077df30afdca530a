#!/usr/bin/env python

import unittest

import numpy as np
from scipy.spatial import cKDTree

from energyforge.catalog import resolve_spec
from energyforge.chain_recurrence.cover import make_cover
from energyforge.config import build_system, load_flow_spec
from energyforge.fixed_points.detect import find_fixed_points
from energyforge.fixed_points.invariant_manifolds import STABLE, UNSTABLE, trace_all, trace_invariant_manifold


def on_unit_torus(coords):
    # mod can round a tiny negative up to 1.0
    return np.mod(np.mod(np.asarray(coords, dtype=float), 1.0), 1.0)


def catalog_records(name, resolution):
    system = build_system(load_flow_spec(resolve_spec(name)))
    return system, find_fixed_points(system, make_cover(system.manifold, resolution))


class TestTorusTraces(unittest.TestCase):
    """Test cases for invariant manifold traces of the torus height flow."""

    @classmethod
    def setUpClass(cls):
        cls.system, cls.records = catalog_records("torus_height_gradient", 48)
        # records: sink, saddle (0, 1/2), saddle (1/2, 0), source

    def test_source_branches_end_at_saddles(self):
        trace = trace_invariant_manifold(self.system, self.records, 3, UNSTABLE)
        self.assertEqual(len(trace.branches), 4)
        self.assertEqual(sorted(trace.limits), [1, 1, 2, 2])

    def test_saddle_unstable_branches_end_at_sink(self):
        for owner in (1, 2):
            trace = trace_invariant_manifold(self.system, self.records, owner, UNSTABLE)
            self.assertEqual(trace.limits, (0, 0))

    def test_saddle_stable_branches_start_at_source(self):
        trace = trace_invariant_manifold(self.system, self.records, 1, STABLE)
        self.assertEqual(trace.limits, (3, 3))
        self.assertTrue(all(branch.times[-1] < 0 for branch in trace.branches))

    def test_branches_follow_invariant_lines(self):
        trace = trace_invariant_manifold(self.system, self.records, 1, UNSTABLE)
        _, coords = trace.samples()
        np.testing.assert_allclose(coords[:, 1], 0.5, atol=1e-9)

    def test_unstable_manifolds_of_distinct_points_are_disjoint(self):
        traces = trace_all(self.system, self.records)
        fixed = cKDTree(on_unit_torus([r.location.coords for r in self.records]), boxsize=1.0)
        pieces = {}
        for owner, (_, unstable) in enumerate(traces):
            _, coords = unstable.samples()
            if len(coords):
                coords = on_unit_torus(coords)
                # branches start and end at fixed points
                away = fixed.query(coords)[0] > 0.05
                pieces[owner] = coords[away]
        self.assertEqual(sorted(pieces), [1, 2, 3])
        for p in pieces:
            tree = cKDTree(pieces[p], boxsize=1.0)
            for q in pieces:
                if q > p:
                    gaps, _ = tree.query(pieces[q])
                    self.assertGreater(float(np.min(gaps)), 0.05, (p, q))

    def test_sink_has_no_unstable_branches(self):
        trace = trace_invariant_manifold(self.system, self.records, 0, UNSTABLE)
        self.assertEqual(trace.branches, ())
        self.assertEqual(trace.limits, ())


class TestOtherTraces(unittest.TestCase):
    """Test cases for traces on the sphere and on a plane-disk."""

    def test_sphere_source_reaches_sink(self):
        system, records = catalog_records("sphere_north_south", 16)
        stable, unstable = trace_all(system, records)[1]
        self.assertEqual(stable.branches, ())
        self.assertEqual(unstable.limits, (0, 0, 0, 0))

    def test_planar_saddle_branches_escape(self):
        system, records = catalog_records("planar_saddle", 8)
        trace = trace_invariant_manifold(system, records, 0, UNSTABLE)
        self.assertTrue(trace.escaped)
        self.assertEqual(trace.limits, (None, None))


if __name__ == "__main__":
    unittest.main()
