#!/usr/bin/env python

import math
import os
import tempfile
import unittest
from pathlib import Path

from energyforge import constants
from energyforge.catalog import CATALOG_DIR, LN2, catalog_names, resolve_spec
from energyforge.config import RunConfig, build_system, load_flow_spec, load_spec_file, parse_flow_spec
from energyforge.errors import SpecError
from energyforge.settings import Settings


def circle_spec(**field):
    return {"name": "c", "manifold": {"kind": "circle"}, "field": field or {"catalog": "circle_two_points"}}


class TestCatalog(unittest.TestCase):
    """Test cases for the shipped spec catalog."""

    def test_catalog_names(self):
        self.assertEqual(
            catalog_names(),
            ["circle_two_points", "planar_center", "planar_saddle", "sphere_north_south", "torus_height_gradient"],
        )

    def test_resolve_catalog_name(self):
        self.assertEqual(resolve_spec("sphere_north_south"), CATALOG_DIR / "sphere_north_south.yaml")

    def test_resolve_unknown_name_keeps_path(self):
        self.assertEqual(resolve_spec("no_such_flow"), Path("no_such_flow"))

    def test_every_catalog_spec_parses(self):
        for name in catalog_names():
            with self.subTest(name=name):
                spec = load_flow_spec(resolve_spec(name))
                self.assertEqual(spec.name, name)
                self.assertEqual(spec.field.catalog, name)
                self.assertTrue(spec.field.expressions)


class TestParseFlowSpec(unittest.TestCase):
    """Test cases for parse_flow_spec."""

    def test_catalog_defaults(self):
        spec = parse_flow_spec(circle_spec())
        self.assertEqual(spec.field.expressions, {"main": ["a*sin(2*pi*x)"]})
        self.assertAlmostEqual(spec.field.parameters["a"], LN2 / (2.0 * math.pi))
        self.assertEqual(spec.integrator.tol, constants.DEFAULT_INTEGRATOR_TOL)
        self.assertEqual(spec.integrator.max_step, constants.DEFAULT_MAX_STEP)

    def test_parameters_override_catalog(self):
        spec = parse_flow_spec(circle_spec(catalog="circle_two_points", parameters={"a": "0.5"}))
        self.assertEqual(spec.field.parameters, {"a": 0.5})

    def test_single_expression_goes_to_main_chart(self):
        spec = parse_flow_spec(circle_spec(expressions="sin(2*pi*x)"))
        self.assertEqual(spec.field.expressions, {"main": ["sin(2*pi*x)"]})
        self.assertIsNone(spec.field.catalog)

    def test_default_name(self):
        raw = circle_spec()
        del raw["name"]
        self.assertEqual(parse_flow_spec(raw, default_name="mine").name, "mine")

    def test_missing_manifold(self):
        with self.assertRaises(SpecError) as ctx:
            parse_flow_spec({"field": {"catalog": "circle_two_points"}})
        self.assertIn("Missing required spec key", str(ctx.exception))

    def test_catalog_and_expressions_are_exclusive(self):
        with self.assertRaises(SpecError) as ctx:
            parse_flow_spec(circle_spec(catalog="circle_two_points", expressions=["x"]))
        self.assertIn("mutually exclusive", str(ctx.exception))

    def test_catalog_on_wrong_manifold(self):
        raw = {"manifold": {"kind": "torus"}, "field": {"catalog": "circle_two_points"}}
        with self.assertRaises(SpecError) as ctx:
            parse_flow_spec(raw)
        self.assertIn("lives on a circle", str(ctx.exception))

    def test_unknown_catalog(self):
        with self.assertRaises(SpecError):
            parse_flow_spec(circle_spec(catalog="lorenz"))

    def test_field_needs_a_source(self):
        with self.assertRaises(SpecError) as ctx:
            parse_flow_spec(circle_spec(parameters={"a": 1}))
        self.assertIn("either 'catalog' or 'expressions'", str(ctx.exception))

    def test_invalid_numbers(self):
        cases = [
            {**circle_spec(), "integrator": {"tol": -1}},
            {**circle_spec(), "integrator": {"max_step": "fast"}},
            {**circle_spec(), "integrator": {"tol": float("nan")}},
            circle_spec(catalog="circle_two_points", parameters={"a": "big"}),
            {"manifold": {"kind": "plane-disk", "radius": 0}, "field": {"expressions": ["x", "y"]}},
            {"manifold": {"kind": "plane-disk", "radius": 1, "trapping": "yes"}, "field": {"expressions": ["x", "y"]}},
        ]
        for raw in cases:
            with self.subTest(raw=raw):
                with self.assertRaises(SpecError):
                    parse_flow_spec(raw)


class TestLoadSpecFile(unittest.TestCase):
    """Test cases for reading spec files."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write(self, text):
        path = self.dir / "flow.yaml"
        path.write_text(text)
        return path

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_spec_file(self.dir / "missing.yaml")

    def test_empty_file(self):
        self.assertEqual(load_spec_file(self.write("")), {})

    def test_not_a_mapping(self):
        with self.assertRaises(SpecError):
            load_spec_file(self.write("- circle\n"))

    def test_invalid_yaml(self):
        with self.assertRaises(SpecError) as ctx:
            load_spec_file(self.write("manifold: [circle\n"))
        self.assertIn("invalid YAML", str(ctx.exception))

    def test_name_defaults_to_file_stem(self):
        path = self.write("manifold:\n  kind: circle\nfield:\n  catalog: circle_two_points\n")
        self.assertEqual(load_flow_spec(path).name, "flow")


class TestBuildSystem(unittest.TestCase):
    """Test cases for build_system."""

    def test_tolerance_override(self):
        spec = load_flow_spec(resolve_spec("circle_two_points"))
        self.assertEqual(build_system(spec).tol, 1e-9)
        self.assertEqual(build_system(spec, tol=1e-6).tol, 1e-6)

    def test_event_tolerance_reaches_the_system(self):
        spec = load_flow_spec(resolve_spec("circle_two_points"))
        self.assertEqual(build_system(spec).tol_event, constants.EVENT_TIME_TOL)
        self.assertEqual(build_system(spec, tol_event=1e-5).tol_event, 1e-5)

    def test_plane_disk_needs_radius(self):
        spec = parse_flow_spec({"manifold": {"kind": "plane-disk"}, "field": {"expressions": ["-x", "-y"]}})
        with self.assertRaises(SpecError):
            build_system(spec)

    def test_unknown_manifold(self):
        spec = parse_flow_spec({"manifold": {"kind": "klein-bottle"}, "field": {"expressions": ["x", "y"]}})
        with self.assertRaises(SpecError):
            build_system(spec)


class TestRunConfig(unittest.TestCase):
    """Test cases for RunConfig validation."""

    def test_defaults(self):
        config = RunConfig(spec_path=Path("a.yaml"), out_dir=Path("out"))
        self.assertEqual(config.grid, constants.DEFAULT_GRID)
        self.assertEqual(config.stages, ("analyze", "order", "build", "verify", "plot"))
        self.assertIsNone(config.tol_int)

    def test_invalid_values(self):
        cases = [
            {"grid": constants.MIN_GRID - 1},
            {"tol_hyp": 0.0},
            {"tol_event": -1e-8},
            {"tol_int": -1e-9},
            {"stages": ("analyze", "deploy")},
        ]
        for overrides in cases:
            with self.subTest(overrides=overrides):
                with self.assertRaises(SpecError):
                    RunConfig(spec_path=Path("a.yaml"), out_dir=Path("out"), **overrides)


class TestSettings(unittest.TestCase):
    """Test cases for environment settings."""

    def test_defaults(self):
        settings = Settings({})
        self.assertEqual(settings.threads, os.cpu_count() or 1)
        self.assertFalse(settings.run_slow_tests)

    def test_from_environment(self):
        settings = Settings({"ENERGYFORGE_THREADS": " 3 ", "ENERGYFORGE_RUN_SLOW": "1"})
        self.assertEqual(settings.threads, 3)
        self.assertTrue(settings.run_slow_tests)

    def test_invalid_threads(self):
        for value in ("0", "-2", "many"):
            with self.subTest(value=value):
                with self.assertRaises(SpecError):
                    Settings({"ENERGYFORGE_THREADS": value})


if __name__ == "__main__":
    unittest.main()
