import unittest

import numpy as np

from diffspline.diffeo import Diffeo
from diffspline.dynamics import (
    ControlPath,
    State,
    acceleration,
    ad_star_pullback,
    conservation_report,
    covariant_derivative,
    energy_profile,
    forced_rollout,
    geodesic_shoot,
    gronwall_monitor,
    lagrangian_velocity,
    transport_residual,
)
from diffspline.errors import BlowUpError, DegenerateMapError
from diffspline.spectral import GridSpec, Momentum, SobolevMetric, band_limited_random, flat


class TestGeodesic(unittest.TestCase):
    def setUp(self):
        self.grid = GridSpec(1, 32)
        self.metric = SobolevMetric(2.0)

    def test_zero_momentum_stays_at_identity(self):
        trajectory = geodesic_shoot(Momentum(self.grid, self.grid.zeros().values), self.metric, steps=8)
        np.testing.assert_allclose(np.asarray(trajectory.displacements), 0.0)
        np.testing.assert_allclose(np.asarray(trajectory.momenta), 0.0)
        self.assertEqual(len(trajectory), 9)

    def test_constant_velocity_is_a_translation(self):
        grid = GridSpec(2, 16)
        c = grid.constant([0.25, -0.5])
        trajectory = geodesic_shoot(flat(c, SobolevMetric(3.0)), SobolevMetric(3.0), steps=4)
        np.testing.assert_allclose(trajectory.phi(-1).displacement.values, c.values, atol=1e-12)
        np.testing.assert_allclose(trajectory.velocity(-1).values, c.values, atol=1e-12)

    def test_conservation_single_mode(self):
        """
        A single Fourier mode of momentum: the energy drift and the transport
        gap stay below 1e-5 at 64 steps
        """
        xi0 = self.grid.from_function(lambda x: [0.05 * np.cos(x)])
        trajectory = geodesic_shoot(flat(xi0, self.metric), self.metric, steps=64, method="spectral")
        report = conservation_report(trajectory, tolerance=1e-5, method="spectral")
        self.assertLessEqual(report.energy_drift, 1e-5)
        self.assertLessEqual(report.momentum_error, 1e-5)
        self.assertTrue(report.all_pass)

    def test_conservation_errors_shrink_under_refinement(self):
        xi0 = self.grid.from_function(lambda x: [0.1 * np.cos(x) + 0.05 * np.sin(2 * x)])
        reports = []
        for steps in (16, 64):
            trajectory = geodesic_shoot(flat(xi0, self.metric), self.metric, steps=steps, method="spectral")
            reports.append(conservation_report(trajectory, tolerance=1e-5, method="spectral"))
        coarse, fine = reports
        for key in ("energy_drift", "momentum_error"):
            # Below 1e-11 the errors sit at round-off and no longer shrink.
            self.assertTrue(fine[key] <= 1e-11 or coarse[key] >= 8 * fine[key], f"{key}: {coarse[key]} {fine[key]}")

    def test_lagrangian_velocity_at_start(self):
        xi0 = band_limited_random(self.grid, np.random.default_rng(0), amplitude=0.05, max_mode=2)
        trajectory = geodesic_shoot(flat(xi0, self.metric), self.metric, steps=8)
        np.testing.assert_allclose(lagrangian_velocity(trajectory, 0).values, xi0.values, atol=1e-12)

    def test_blow_up_is_reported(self):
        xi0 = self.grid.from_function(lambda x: [50.0 * np.sin(x)])
        with self.assertRaises((BlowUpError, DegenerateMapError)):
            geodesic_shoot(flat(xi0, self.metric), self.metric, steps=8)


class TestForcedRollout(unittest.TestCase):
    def setUp(self):
        self.grid = GridSpec(1, 32)
        self.metric = SobolevMetric(2.0)
        rng = np.random.default_rng(1)
        self.xi0 = band_limited_random(self.grid, rng, amplitude=0.03, max_mode=2)
        self.a = band_limited_random(self.grid, rng, amplitude=0.03, max_mode=2)
        self.b = band_limited_random(self.grid, rng, amplitude=0.03, max_mode=2)
        self.control = self.ramp(64)

    def ramp(self, steps: int) -> ControlPath:
        return ControlPath.from_fields([self.a * (1 - j / steps) + self.b * (j / steps) for j in range(steps + 1)])

    def test_constant_forcing_from_rest(self):
        """
        Spatially constant forcing never sees the bracket: m(t) = t a and
        phi(t) = x + t^2 a / 2
        """
        grid = GridSpec(2, 16)
        a = grid.constant([0.2, -0.1])
        state = State(Diffeo.identity(grid), Momentum(grid, grid.zeros().values))
        trajectory = forced_rollout(state, ControlPath.constant(a, 8), SobolevMetric(3.0))
        np.testing.assert_allclose(trajectory.momentum(-1).values, a.values, atol=1e-12)
        np.testing.assert_allclose(trajectory.phi(-1).displacement.values, 0.5 * a.values, atol=1e-12)

    def test_energy_identity_and_growth_bound(self):
        state = State(Diffeo.identity(self.grid), flat(self.xi0, self.metric))
        trajectory = forced_rollout(state, self.control, self.metric)
        monitor = gronwall_monitor(trajectory, self.control, self.metric)
        self.assertLessEqual(monitor.identity_error, 1e-4)
        self.assertTrue(monitor.all_hold)
        np.testing.assert_allclose(monitor.energy, energy_profile(trajectory))

    def test_transport_formula(self):
        state = State(Diffeo.identity(self.grid), flat(self.xi0, self.metric))
        trajectory = forced_rollout(state, self.control, self.metric, method="spectral")
        self.assertLessEqual(transport_residual(trajectory, self.control, self.metric, method="spectral"), 1e-4)


    def test_transport_converges_at_second_order(self):
        state = State(Diffeo.identity(self.grid), flat(self.xi0, self.metric))
        residuals = []
        for steps in (16, 32, 64):
            control = self.ramp(steps)
            trajectory = forced_rollout(state, control, self.metric, method="spectral")
            residuals.append(transport_residual(trajectory, control, self.metric, method="spectral"))
        for coarse, fine in zip(residuals, residuals[1:]):
            self.assertGreaterEqual(coarse / fine, 3.5)

    def test_eulerian_acceleration_recovers_the_control(self):
        """
        Along a forced rollout `xi_dot + ad^dagger_xi xi = alpha`, with
        `xi_dot` taken by central differences in time
        """
        state = State(Diffeo.identity(self.grid), flat(self.xi0, self.metric))
        trajectory = forced_rollout(state, self.control, self.metric)
        for j in (16, 32, 48):
            xi_dot = (trajectory.velocity(j + 1) - trajectory.velocity(j - 1)) / (2 * trajectory.dt)
            gap = acceleration(trajectory.velocity(j), xi_dot, self.metric) - self.control.field(j)
            self.assertLess(gap.max_abs(), 1e-4)


class TestGeometry(unittest.TestCase):
    def setUp(self):
        self.grid = GridSpec(1, 32)
        self.metric = SobolevMetric(2.0)
        self.rng = np.random.default_rng(4)

    def test_pullback_by_identity(self):
        m = band_limited_random(self.grid, self.rng, kind=Momentum)
        pulled = ad_star_pullback(Diffeo.identity(self.grid), m)
        np.testing.assert_allclose(pulled.values, m.values, atol=1e-12)

    def test_pullback_by_translation(self):
        """
        Translations have unit Jacobian, so the pullback is a plain shift
        """
        m = self.grid.from_function(lambda x: [np.cos(2 * x)])
        pulled = ad_star_pullback(Diffeo.translation(self.grid, [0.3]), Momentum(self.grid, m.values), "spectral")
        expected = self.grid.from_function(lambda x: [np.cos(2 * (x + 0.3))])
        np.testing.assert_allclose(pulled.values, expected.values, atol=1e-12)

    def test_acceleration_of_constant_field(self):
        c = self.grid.constant([0.4])
        zero = self.grid.zeros()
        np.testing.assert_allclose(acceleration(c, zero, self.metric).values, 0.0, atol=1e-14)

    def test_covariant_derivative_along_itself(self):
        """
        `nabla_xi xi` reduces to the acceleration `xi_dot + ad^dagger_xi xi`
        """
        xi = band_limited_random(self.grid, self.rng, amplitude=0.2)
        xi_dot = band_limited_random(self.grid, self.rng, amplitude=0.2)
        np.testing.assert_allclose(
            covariant_derivative(xi, xi, xi_dot, self.metric).values,
            acceleration(xi, xi_dot, self.metric).values,
            atol=1e-10,
        )
