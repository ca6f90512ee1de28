import unittest

import numpy as np

from diffspline.errors import ConfigurationError, IncompatibleGridError
from diffspline.spectral import (
    GridSpec,
    Momentum,
    SobolevMetric,
    VectorField,
    ad,
    ad_dagger,
    band_limited_random,
    coad,
    dealias,
    derivative,
    divergence,
    dual_norm,
    flat,
    inner_hs,
    norm_hs,
    pairing,
    sharp,
)


def mode(grid: GridSpec, wavevector, component: int = 0, amplitude: float = 1.0, wave=np.cos) -> VectorField:
    values = np.zeros((grid.dim,) + grid.shape)
    values[component] = amplitude * wave(np.tensordot(np.asarray(wavevector, dtype=float), grid.nodes(), axes=1))
    return VectorField(grid, values)


class TestGridSpec(unittest.TestCase):
    def test_rejects_bad_sizes(self):
        for dim, n in [(3, 16), (1, 12), (2, 4), (0, 8)]:
            with self.assertRaises(ConfigurationError):
                GridSpec(dim, n)

    def test_shapes(self):
        grid = GridSpec(2, 16)
        self.assertEqual(grid.shape, (16, 16))
        self.assertEqual(grid.size, 256)
        self.assertEqual(grid.nodes().shape, (2, 16, 16))
        self.assertEqual(grid.zeros().values.shape, (2, 16, 16))
        self.assertAlmostEqual(grid.spacing, 2 * np.pi / 16)

    def test_constant_field_norm(self):
        """
        A constant field only carries the zero mode, so every H^s norm is |c|
        """
        grid = GridSpec(2, 16)
        c = grid.constant([0.3, -0.4])
        for order in (0.0, 2.0, 3.5):
            self.assertAlmostEqual(norm_hs(c, SobolevMetric(order)), 0.5, places=12)

    def test_mismatched_grids(self):
        with self.assertRaises(IncompatibleGridError):
            inner_hs(GridSpec(1, 16).zeros(), GridSpec(1, 32).zeros(), SobolevMetric(2.0))

    def test_negative_order(self):
        with self.assertRaises(ConfigurationError):
            SobolevMetric(-1.0)


class TestSobolev(unittest.TestCase):
    def setUp(self):
        self.grid = GridSpec(1, 32)
        self.metric = SobolevMetric(2.0)
        self.rng = np.random.default_rng(0)

    def test_single_mode_norm(self):
        u = mode(self.grid, [3])
        # Two modes of weight 1/4 with symbol (1 + 9)^2.
        self.assertAlmostEqual(inner_hs(u, u, self.metric), 50.0, places=9)

    def test_flat_sharp_inverse(self):
        u = band_limited_random(self.grid, self.rng)
        np.testing.assert_allclose(sharp(flat(u, self.metric), self.metric).values, u.values, atol=1e-12)

    def test_flat_represents_inner_product(self):
        u, w = band_limited_random(self.grid, self.rng), band_limited_random(self.grid, self.rng)
        self.assertAlmostEqual(pairing(flat(u, self.metric), w), inner_hs(u, w, self.metric), places=9)

    def test_dual_norm_of_flat(self):
        u = band_limited_random(self.grid, self.rng)
        np.testing.assert_allclose(dual_norm(flat(u, self.metric), 2.0), inner_hs(u, u, self.metric), rtol=1e-10)

    def test_band_limited_random_is_reproducible(self):
        a = band_limited_random(self.grid, np.random.default_rng(7), amplitude=0.2, max_mode=3)
        b = band_limited_random(self.grid, np.random.default_rng(7), amplitude=0.2, max_mode=3)
        np.testing.assert_array_equal(a.values, b.values)
        self.assertAlmostEqual(a.max_abs(), 0.2)
        spectrum = np.abs(np.asarray(a.spectrum))[0]
        self.assertLess(np.max(spectrum[4:-3]), 1e-12)


class TestCalculus(unittest.TestCase):
    def test_derivative_of_sine(self):
        grid = GridSpec(1, 32)
        u = mode(grid, [2], wave=np.sin)
        np.testing.assert_allclose(derivative(u, 0).values, (2 * mode(grid, [2])).values, atol=1e-12)

    def test_divergence_2d(self):
        grid = GridSpec(2, 16)
        u = mode(grid, [1, 0], component=0, wave=np.sin) + mode(grid, [0, 2], component=1, wave=np.sin)
        x, y = grid.nodes()
        np.testing.assert_allclose(np.asarray(divergence(u)), np.cos(x) + 2 * np.cos(2 * y), atol=1e-12)

    def test_dealias_drops_high_modes(self):
        grid = GridSpec(1, 32)
        kept, dropped = mode(grid, [10]), mode(grid, [11])
        np.testing.assert_allclose(dealias(kept).values, kept.values, atol=1e-12)
        np.testing.assert_allclose(dealias(dropped).values, 0.0, atol=1e-12)


class TestBrackets(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_ad_is_antisymmetric(self):
        grid = GridSpec(2, 16)
        xi, eta = band_limited_random(grid, self.rng), band_limited_random(grid, self.rng)
        np.testing.assert_allclose(ad(xi, eta).values, -ad(eta, xi).values, atol=1e-12)
        np.testing.assert_allclose(ad(xi, xi).values, 0.0, atol=1e-12)

    def test_coad_is_transpose_of_ad(self):
        for grid in (GridSpec(1, 32), GridSpec(2, 16)):
            for _ in range(5):
                xi, eta = band_limited_random(grid, self.rng), band_limited_random(grid, self.rng)
                m = band_limited_random(grid, self.rng, kind=Momentum)
                lhs, rhs = pairing(coad(xi, m), eta), pairing(m, ad(xi, eta))
                self.assertLess(abs(lhs - rhs), 1e-9 * (1.0 + abs(lhs)))

    def test_ad_dagger_is_metric_transpose(self):
        grid, metric = GridSpec(1, 32), SobolevMetric(2.0)
        nu, kappa, eta = (band_limited_random(grid, self.rng) for _ in range(3))
        lhs = inner_hs(ad_dagger(nu, kappa, metric), eta, metric)
        rhs = inner_hs(kappa, ad(nu, eta), metric)
        self.assertLess(abs(lhs - rhs), 1e-8 * (1.0 + abs(lhs)))

    def test_translations_commute(self):
        grid = GridSpec(2, 16)
        c = grid.constant([0.1, 0.2])
        m = band_limited_random(grid, self.rng, kind=Momentum)
        np.testing.assert_allclose(coad(c, c).values, 0.0, atol=1e-14)
        # For constant xi, coad reduces to the derivative of m along xi.
        expected = 0.1 * derivative(m, 0).values + 0.2 * derivative(m, 1).values
        np.testing.assert_allclose(coad(c, m).values, dealias(Momentum(grid, expected)).values, atol=1e-12)

    def test_jacobi_identity(self):
        """
        Nested brackets of fields with `|k| <= 2` stay inside the resolved band
        at n=32, so dealiasing drops nothing
        """
        grid = GridSpec(2, 32)
        for _ in range(3):
            xi, eta, zeta = (band_limited_random(grid, self.rng, max_mode=2) for _ in range(3))
            total = ad(xi, ad(eta, zeta)) + ad(eta, ad(zeta, xi)) + ad(zeta, ad(xi, eta))
            scale = max(ad(xi, ad(eta, zeta)).max_abs(), 1.0)
            self.assertLess(total.max_abs(), 1e-7 * scale)

    def test_bracket_of_two_shears(self):
        """
        `ad((sin x1, 0), (0, cos x1)) = (0, sin^2 x1)`
        """
        grid = GridSpec(2, 32)
        xi = mode(grid, [1, 0], component=0, wave=np.sin)
        eta = mode(grid, [1, 0], component=1)
        x, _ = grid.nodes()
        expected = np.stack([np.zeros_like(x), np.sin(x) ** 2])
        np.testing.assert_allclose(ad(xi, eta).values, expected, atol=1e-10)


class TestMultiplier(unittest.TestCase):
    def test_norms_grow_with_the_order(self):
        rng = np.random.default_rng(11)
        for grid in (GridSpec(1, 32), GridSpec(2, 16)):
            for _ in range(5):
                u = band_limited_random(grid, rng)
                for order in (0.0, 1.5, 2.0, 3.0):
                    self.assertGreaterEqual(
                        norm_hs(u, SobolevMetric(order + 1.0)), norm_hs(u, SobolevMetric(order)) * (1 - 1e-12)
                    )
