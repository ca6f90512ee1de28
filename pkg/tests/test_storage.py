import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from diffspline.diffeo import Diffeo
from diffspline.dynamics import ControlPath, geodesic_shoot
from diffspline.errors import ConfigurationError, IncompatibleGridError
from diffspline.foundation import AttributeDictionary
from diffspline.spectral import GridSpec, Momentum, SobolevMetric, VectorField, band_limited_random, flat
from diffspline.storage import load_control, load_field, save_control, save_field, save_trajectory


class TestFieldFiles(unittest.TestCase):
    def setUp(self):
        self.grid = GridSpec(2, 8)
        self.field = band_limited_random(self.grid, np.random.default_rng(0), amplitude=0.1)

    def test_sidecar_and_payload(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            stem = save_field(self.field, f"{tmpdir}/velocity.json")
            self.assertEqual(stem, Path(tmpdir) / "velocity")
            self.assertEqual(Path(f"{tmpdir}/velocity.f64").stat().st_size, 8 * 2 * 64)
            loaded = load_field(f"{tmpdir}/velocity", grid=self.grid)
            self.assertIsInstance(loaded, VectorField)
            np.testing.assert_array_equal(np.asarray(loaded.values), np.asarray(self.field.values))

    def test_kinds(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            save_field(Diffeo(self.field), f"{tmpdir}/phi")
            save_field(Momentum(self.grid, self.field.values), f"{tmpdir}/m")
            self.assertIsInstance(load_field(f"{tmpdir}/phi"), Diffeo)
            self.assertIsInstance(load_field(f"{tmpdir}/m"), Momentum)
            self.assertIsInstance(load_field(f"{tmpdir}/phi", kind="vector"), VectorField)

    def test_errors(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ConfigurationError) as error:
                load_field(f"{tmpdir}/missing")
            self.assertIn("missing", str(error.exception))
            save_field(self.field, f"{tmpdir}/velocity")
            with self.assertRaises(IncompatibleGridError):
                load_field(f"{tmpdir}/velocity", grid=GridSpec(2, 16))
            Path(f"{tmpdir}/velocity.f64").write_bytes(b"\0" * 16)
            with self.assertRaises(ConfigurationError):
                load_field(f"{tmpdir}/velocity")


class TestExports(unittest.TestCase):
    def test_trajectory_manifest(self):
        grid, metric = GridSpec(1, 16), SobolevMetric(2.0)
        xi0 = grid.from_function(lambda x: [0.05 * np.cos(x)])
        trajectory = geodesic_shoot(flat(xi0, metric), metric, steps=10)
        with tempfile.TemporaryDirectory() as tmpdir:
            manifest_path = save_trajectory(trajectory, tmpdir, stride=4)
            manifest = AttributeDictionary(**json.loads(manifest_path.read_text()))
            self.assertEqual([node["index"] for node in manifest.nodes], [0, 4, 8, 10])
            self.assertAlmostEqual(manifest.nodes[-1]["time"], 1.0)
            phi = load_field(Path(tmpdir) / manifest.nodes[-1]["phi"], grid=grid)
            np.testing.assert_allclose(
                np.asarray(phi.displacement.values), np.asarray(trajectory.phi(-1).displacement.values)
            )

    def test_control_round_trip(self):
        grid = GridSpec(1, 16)
        control = ControlPath.constant(grid.constant([0.2]), 6)
        with tempfile.TemporaryDirectory() as tmpdir:
            save_control(control, tmpdir)
            loaded = load_control(tmpdir, grid=grid)
            self.assertEqual(loaded.steps, 6)
            np.testing.assert_array_equal(np.asarray(loaded.values), np.asarray(control.values))
