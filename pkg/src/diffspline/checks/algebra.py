"""
Duality identities between the Lie-algebra operators and their transposes,
measured on random band-limited fields.
"""
import logging

import jax.numpy as jnp
import numpy as np

from ..check import Check
from ..diffeo import Diffeo, compose_field, inverse
from ..dynamics import ad_star_pullback
from ..spectral import (
    GridSpec,
    Momentum,
    SobolevMetric,
    VectorField,
    ad,
    ad_dagger,
    band_limited_random,
    coad,
    inner_hs,
    jacobian_matrix,
    norm_hs,
    pairing,
)


logger = logging.getLogger(__name__)


def _l2(u) -> float:
    return float(np.sqrt(max(pairing(u, u), 0.0)))


def _relative(lhs: float, rhs: float, scale: float) -> float:
    return abs(lhs - rhs) / max(scale, 1e-300)


class DualityCheck(Check):
    """
    `<coad(xi, m), eta> = <m, ad(xi, eta)>` under the L2 pairing.

    The `flip_coad_sign` option negates `coad` before comparing; the check is
    then expected to fail.
    """

    defaults = dict(tolerance=1e-7, samples=50, sizes=[[1, 32], [2, 16]], flip_coad_sign=False)

    def run(self):
        sign = -1.0 if self.options.flip_coad_sign else 1.0
        worst, per_grid = 0.0, {}
        for offset, (dim, n) in enumerate(self.options.sizes):
            grid, rng = GridSpec(dim, n), self.rng(offset)
            errors = []
            for _ in range(self.options.samples):
                xi, eta = band_limited_random(grid, rng), band_limited_random(grid, rng)
                m = band_limited_random(grid, rng, kind=Momentum)
                transported, bracket = sign * coad(xi, m), ad(xi, eta)
                lhs, rhs = pairing(transported, eta), pairing(m, bracket)
                scale = _l2(transported) * _l2(eta) + _l2(m) * _l2(bracket)
                errors.append(_relative(lhs, rhs, scale))
            per_grid[f"d{dim}_n{n}"] = max(errors)
            worst = max(worst, max(errors))
        return self.result(worst, detail=dict(max_relative_error=per_grid, flip_coad_sign=self.options.flip_coad_sign))


class MetricCompatibilityCheck(Check):
    """
    `<ad_dagger(nu, kappa), eta>_{H^s} = <kappa, ad(nu, eta)>_{H^s}`
    """

    defaults = dict(tolerance=1e-7, samples=20, sizes=[[1, 32], [2, 16]], s=None)

    def run(self):
        metric = SobolevMetric(self.setting("s"))
        worst = 0.0
        for offset, (dim, n) in enumerate(self.options.sizes):
            grid, rng = GridSpec(dim, n), self.rng(offset)
            for _ in range(self.options.samples):
                nu, kappa, eta = (band_limited_random(grid, rng) for _ in range(3))
                dagger, bracket = ad_dagger(nu, kappa, metric), ad(nu, eta)
                lhs, rhs = inner_hs(dagger, eta, metric), inner_hs(kappa, bracket, metric)
                scale = norm_hs(dagger, metric) * norm_hs(eta, metric)
                scale += norm_hs(kappa, metric) * norm_hs(bracket, metric)
                worst = max(worst, _relative(lhs, rhs, scale))
        return self.result(worst, detail=dict(s=metric.order))


def adjoint_action(g: Diffeo, eta: VectorField, method: str = "cubic") -> VectorField:
    """
    `Ad_g eta = (Dg . eta) o g^-1`
    """
    gradient = jacobian_matrix(g.displacement)
    pushed = eta.values + jnp.einsum("ij...,j...->i...", gradient, eta.values)
    return compose_field(VectorField(g.grid, pushed), inverse(g, method=method), method=method)


class CoadjointDualityCheck(Check):
    """
    `<Ad*_g m, eta> = <m, Ad_g eta>` for random near-identity maps `g`. The
    agreement is limited by the interpolation `method`.
    """

    defaults = dict(
        tolerance=1e-8, samples=10, sizes=[[1, 32], [2, 16]], method="spectral", amplitude=0.1, max_mode=2
    )

    def run(self):
        method = self.setting("method")
        worst = 0.0
        for offset, (dim, n) in enumerate(self.options.sizes):
            grid, rng = GridSpec(dim, n), self.rng(offset)
            for _ in range(self.options.samples):
                g = Diffeo(
                    band_limited_random(grid, rng, amplitude=self.options.amplitude, max_mode=self.options.max_mode)
                ).check("random map")
                m = band_limited_random(grid, rng, max_mode=self.options.max_mode, kind=Momentum)
                eta = band_limited_random(grid, rng, max_mode=self.options.max_mode)
                pulled, pushed = ad_star_pullback(g, m, method=method), adjoint_action(g, eta, method=method)
                lhs, rhs = pairing(pulled, eta), pairing(m, pushed)
                worst = max(worst, _relative(lhs, rhs, _l2(pulled) * _l2(eta) + _l2(m) * _l2(pushed)))
        logger.debug(f"Coadjoint duality with {method} evaluation: {worst:.3g}")
        return self.result(worst, detail=dict(method=method))
