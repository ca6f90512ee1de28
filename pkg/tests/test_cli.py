import json
import subprocess
import tempfile
import unittest
from pathlib import Path

import yaml


def run(command, config, out, *extra):
    args = [command, "--out", str(out)] + ([] if config is None else ["--config", str(config)]) + list(extra)
    return subprocess.run(["diffspline"] + args, capture_output=True, text=True)


def last_error_line(result) -> str:
    return result.stderr.strip().splitlines()[-1]


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


class TestGeodesicCommand(unittest.TestCase):
    def test_single_mode(self):
        """
        Test that a geodesic run writes its trajectory, fixtures and a passing
        conservation report
        """
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("geodesic", "tests/test_artifacts/geodesic_mode.yaml", tmpdir)
            self.assertEqual(result.returncode, 0, result.stderr)
            report = read_json(f"{tmpdir}/conservation.json")
            self.assertLessEqual(report["energy_drift"], 1e-5)
            self.assertTrue(report["all_pass"])
            manifest = read_json(f"{tmpdir}/trajectory/manifest.json")
            self.assertEqual([node["index"] for node in manifest["nodes"]], list(range(0, 65, 8)))
            for name in ("phi1", "v1", "v0", "xi0"):
                self.assertTrue(Path(f"{tmpdir}/fixture/{name}.f64").is_file())
                self.assertEqual(read_json(f"{tmpdir}/fixture/{name}.json")["n"], 32)

    def test_missing_field(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("geodesic", "tests/test_artifacts/geodesic_missing_field.yaml", tmpdir)
            self.assertEqual(result.returncode, 2)
            self.assertIn("config-error", last_error_line(result))
            self.assertIn("does_not_exist", last_error_line(result))

    def test_missing_config(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("geodesic", f"{tmpdir}/nowhere.yaml", tmpdir)
            self.assertEqual(result.returncode, 2)
            self.assertTrue(last_error_line(result).startswith("diffspline: error: config-error:"))


class TestSplineCommand(unittest.TestCase):
    def test_identity_boundary(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("spline", "tests/test_artifacts/spline_identity.yaml", tmpdir)
            self.assertEqual(result.returncode, 0, result.stderr)
            report = read_json(f"{tmpdir}/report.json")
            self.assertTrue(report["converged"])
            self.assertEqual(report["objective"], 0.0)
            self.assertEqual(read_json(f"{tmpdir}/control/control.json")["steps"], 8)

    def test_bad_order_is_rejected_before_reading_fields(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("spline", "tests/test_artifacts/spline_bad_order.yaml", tmpdir)
            self.assertEqual(result.returncode, 2)
            self.assertIn("hypothesis-violation", last_error_line(result))
            self.assertNotIn("does_not_exist", result.stderr)
            self.assertFalse(Path(f"{tmpdir}/report.json").exists())

    def test_translation_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            reports = []
            for name in ("first", "second"):
                result = run("spline", "tests/test_artifacts/spline_translation.yaml", f"{tmpdir}/{name}")
                self.assertEqual(result.returncode, 0, result.stderr)
                report = read_json(f"{tmpdir}/{name}/report.json")
                report.pop("timing")
                reports.append(report)
            self.assertEqual(reports[0], reports[1])
            self.assertAlmostEqual(reports[0]["objective"], 12 * 0.09, delta=0.03)

    def test_geodesic_fixture(self):
        """
        Test that boundary data exported by `geodesic` is joined with almost
        zero acceleration
        """
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("geodesic", "tests/test_artifacts/geodesic_mode.yaml", f"{tmpdir}/geodesic")
            self.assertEqual(result.returncode, 0, result.stderr)
            document = dict(
                grid=dict(dim=1, n=32),
                s=2.0,
                s_prime=3.0,
                steps=16,
                boundary=dict(v0="geodesic/fixture/v0", phi1="geodesic/fixture/phi1", v1="geodesic/fixture/v1"),
            )
            with open(f"{tmpdir}/spline.yaml", "w") as f:
                yaml.safe_dump(document, f)
            result = run("spline", f"{tmpdir}/spline.yaml", f"{tmpdir}/spline")
            self.assertEqual(result.returncode, 0, result.stderr)
            report = read_json(f"{tmpdir}/spline/report.json")
            self.assertLessEqual(report["objective"], 1e-6)
            self.assertLessEqual(report["endpoint_residuals"]["phi"], 1e-6)


class TestSequenceCommand(unittest.TestCase):
    def test_geodesic_samples(self):
        """
        Test that samples of an exported geodesic are interpolated and the
        initial velocity is written next to the report
        """
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("geodesic", "tests/test_artifacts/geodesic_mode.yaml", f"{tmpdir}/geodesic")
            self.assertEqual(result.returncode, 0, result.stderr)
            document = dict(
                grid=dict(dim=1, n=32),
                s=2.0,
                s_prime=3.0,
                steps=16,
                speed_weight=1e-4,
                knots=[
                    dict(time=0.25, target="geodesic/trajectory/phi_0016"),
                    dict(time=0.5, target="geodesic/trajectory/phi_0032"),
                    dict(time=1.0, target="geodesic/trajectory/phi_0064"),
                ],
            )
            with open(f"{tmpdir}/sequence.yaml", "w") as f:
                yaml.safe_dump(document, f)
            result = run("sequence", f"{tmpdir}/sequence.yaml", f"{tmpdir}/sequence")
            self.assertEqual(result.returncode, 0, result.stderr)
            report = read_json(f"{tmpdir}/sequence/report.json")
            self.assertTrue(report["converged"])
            for name in ("initial_velocity", "initial_momentum"):
                self.assertTrue(Path(f"{tmpdir}/sequence/{name}.f64").is_file())
                self.assertEqual(read_json(f"{tmpdir}/sequence/{name}.json")["n"], 32)


class TestUsage(unittest.TestCase):
    def test_missing_command(self):
        result = subprocess.run(["diffspline"], capture_output=True, text=True)
        self.assertEqual(result.returncode, 2)
        self.assertEqual(len(result.stderr.strip().splitlines()), 1)
        self.assertTrue(result.stderr.startswith("diffspline: error: usage-error:"))

    def test_unknown_option(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("spline", None, tmpdir, "--penalty", "10")
            self.assertEqual(result.returncode, 2)
            self.assertIn("--penalty", last_error_line(result))
            self.assertTrue(last_error_line(result).startswith("diffspline: error: usage-error:"))


class TestCheckCommand(unittest.TestCase):
    def test_small_suite_passes(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("check", "tests/test_artifacts/check_small.yaml", tmpdir)
            self.assertEqual(result.returncode, 0, result.stderr)
            results = read_json(f"{tmpdir}/checks.json")
            self.assertTrue(results["all_passed"])
            self.assertEqual(
                sorted(results["checks"]), ["DualityCheck", "HypothesisCheck", "MetricCompatibilityCheck"]
            )

    def test_flipped_sign_is_caught(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            result = run("check", "tests/test_artifacts/check_canary.yaml", tmpdir)
            self.assertEqual(result.returncode, 3)
            results = read_json(f"{tmpdir}/checks.json")
            self.assertFalse(results["checks"]["DualityCheck"]["passed"])
