import unittest

from diffspline.check import Check, CheckSuite
from diffspline.checks import ConservationCheck, DualityCheck, GradientCheck, HypothesisCheck, TransportCheck
from diffspline.config import get_checks
from diffspline.errors import ConfigurationError
from diffspline.foundation import AttributeDictionary


class BasicCheck(Check):
    """
    A basic check that reports the configured value
    """

    defaults = dict(tolerance=1.0, value=0.5)

    def run(self):
        return self.result(self.options.value, detail=dict(seed=self.context.seed))


class BrokenCheck(Check):
    def run(self):
        raise ValueError("nothing to measure")


def context(seed: int = 0) -> AttributeDictionary:
    return AttributeDictionary(seed=seed, s=3.0, s_prime=4.0, steps=64, method="cubic")


class TestCheckSuite(unittest.TestCase):
    """
    Tests for verifying that suites of checks run and report
    """

    def test_suite_collects_outcomes(self):
        results = CheckSuite([BasicCheck], context=context(4)).run()
        self.assertTrue(results.all_passed)
        self.assertEqual(results.checks.BasicCheck.value, 0.5)
        self.assertEqual(results.checks.BasicCheck.detail.seed, 4)

    def test_check_args_override_defaults(self):
        results = CheckSuite([BasicCheck], context=context(), check_args={"BasicCheck": {"value": 2.0}}).run()
        self.assertFalse(results.all_passed)
        self.assertFalse(results.checks.BasicCheck.passed)

    def test_unknown_option(self):
        with self.assertRaises(ConfigurationError):
            CheckSuite([BasicCheck], check_args={"BasicCheck": {"samples": 3}})

    def test_errors_name_the_check(self):
        with self.assertRaises(ValueError) as error:
            CheckSuite([BrokenCheck], context=context()).run()
        self.assertIn("BrokenCheck", str(error.exception))
        self.assertIn("nothing to measure", str(error.exception))

    def test_missing_setting(self):
        with self.assertRaises(ConfigurationError):
            ConservationCheck(AttributeDictionary(seed=0), steps=16).run()

    def test_import_checks(self):
        self.assertEqual(get_checks(["diffspline.checks:HypothesisCheck"]), [HypothesisCheck])
        with self.assertRaises(ConfigurationError) as error:
            get_checks(["diffspline.checks:MissingCheck", "diffspline.nowhere:Check"])
        self.assertIn("MissingCheck", str(error.exception))
        self.assertIn("diffspline.nowhere:Check", str(error.exception))


class TestAlgebraChecks(unittest.TestCase):
    def test_duality(self):
        outcome = DualityCheck(context(), samples=5)()
        self.assertTrue(outcome.passed)
        self.assertLessEqual(outcome.value, 1e-7)

    def test_flipped_sign_fails(self):
        outcome = DualityCheck(context(), samples=5, flip_coad_sign=True)()
        self.assertFalse(outcome.passed)
        self.assertGreater(outcome.value, 1e-3)

    def test_seed_does_not_change_the_verdict(self):
        for seed in (0, 1, 2):
            self.assertTrue(DualityCheck(context(seed), samples=3)().passed)
            self.assertFalse(DualityCheck(context(seed), samples=3, flip_coad_sign=True)().passed)


class TestRolloutChecks(unittest.TestCase):
    def test_conservation(self):
        outcome = ConservationCheck(context())()
        self.assertTrue(outcome.passed)
        self.assertLessEqual(outcome.detail.energy_drift, 1e-5)

    def test_transport(self):
        self.assertTrue(TransportCheck(context())().passed)


class TestOptimizationChecks(unittest.TestCase):
    def test_gradient(self):
        outcome = GradientCheck(context())()
        self.assertTrue(outcome.passed)
        self.assertEqual(sorted(outcome.detail.max_relative_error), ["d1_n32", "d2_n16"])
        self.assertLessEqual(outcome.value, 1e-5)

    def test_hypotheses(self):
        outcome = HypothesisCheck(context())()
        self.assertTrue(outcome.passed)
        self.assertEqual(outcome.value, 0.0)
        self.assertEqual(outcome.detail.accepted, [])

    def test_accepted_orders_are_counted(self):
        outcome = HypothesisCheck(context(), violations=[[1, 3.0, 4.0], [1, 2.0, 2.5]])()
        self.assertFalse(outcome.passed)
        self.assertEqual(outcome.detail.accepted, [[1, 3.0, 4.0]])
