"""
Checks on the spline solver: exactness of the reverse-mode gradient and
rejection of metric orders outside the well-posed range.
"""
import logging

import numpy as np

from ..check import Check
from ..diffeo import Diffeo
from ..dynamics import ControlPath
from ..errors import HypothesisError
from ..solver import SplineProblem, gradient, penalized_loss, random_control, validate_orders
from ..spectral import GridSpec, band_limited_random, pairing


logger = logging.getLogger(__name__)


def directional_errors(problem: SplineProblem, control: ControlPath, directions: list, penalty: float, epsilon: float):
    """
    Relative gaps between central finite differences of `penalized_loss` and
    the pairing of `gradient` with each direction.
    """
    exact = gradient(control, problem, penalty)
    errors = []
    for direction in directions:
        analytic = sum(pairing(exact.field(j), direction.field(j)) for j in range(len(control)))
        forward = ControlPath(problem.grid, control.values + epsilon * direction.values)
        backward = ControlPath(problem.grid, control.values - epsilon * direction.values)
        difference = penalized_loss(forward, problem, penalty) - penalized_loss(backward, problem, penalty)
        numeric = difference / (2 * epsilon)
        errors.append(abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-12))
    return errors


class GradientCheck(Check):
    """
    Central finite differences of the penalized loss agree with the exact
    gradient along random directions, on a problem with non-trivial boundary
    data. Each entry of `sizes` is `[dim, n, steps]`.
    """

    defaults = dict(
        tolerance=1e-5,
        directions=20,
        sizes=[[1, 32, 16], [2, 16, 8]],
        s=None,
        s_prime=None,
        method=None,
        penalty=100.0,
        epsilon=1e-6,
        amplitude=0.05,
    )

    def problem(self, grid: GridSpec, steps: int, rng) -> SplineProblem:
        amplitude = self.options.amplitude
        return SplineProblem(
            grid,
            self.setting("s"),
            self.setting("s_prime"),
            steps,
            v0=band_limited_random(grid, rng, amplitude=amplitude, max_mode=2),
            phi1=Diffeo(band_limited_random(grid, rng, amplitude=amplitude, max_mode=2)),
            v1=band_limited_random(grid, rng, amplitude=amplitude, max_mode=2),
            method=self.setting("method"),
        )

    def run(self):
        worst, detail = 0.0, {}
        for offset, (dim, n, steps) in enumerate(self.options.sizes):
            grid, rng = GridSpec(dim, n), self.rng(offset)
            problem = self.problem(grid, steps, rng)
            seeds = rng.integers(0, 2**31, size=self.options.directions + 1)
            control = random_control(problem, int(seeds[0]), amplitude=self.options.amplitude)
            directions = [random_control(problem, int(seed), amplitude=1.0) for seed in seeds[1:]]
            errors = directional_errors(problem, control, directions, self.options.penalty, self.options.epsilon)
            detail[f"d{dim}_n{n}"] = float(np.max(errors))
            worst = max(worst, float(np.max(errors)))
        return self.result(worst, detail=dict(max_relative_error=detail))


class HypothesisCheck(Check):
    """
    Metric orders with `s <= d/2 + 1`, or `s' < s + 1` without the experimental
    flag, are rejected before a problem is built. The value counts accepted
    violations.
    """

    defaults = dict(
        tolerance=0.0,
        violations=[[1, 2.0, 2.5], [1, 2.0, 2.99], [1, 1.5, 3.0], [1, 1.0, 5.0], [2, 2.0, 4.0], [2, 3.0, 3.5]],
    )

    def run(self):
        accepted = []
        for dim, s, s_prime in self.options.violations:
            try:
                validate_orders(dim, s, s_prime)
                SplineProblem(GridSpec(dim, 8), s, s_prime, steps=4)
            except HypothesisError as e:
                logger.debug(f"Rejected d={dim}, s={s}, s'={s_prime}: {e}")
                continue
            accepted.append([dim, s, s_prime])
        return self.result(len(accepted), detail=dict(accepted=accepted, tried=len(self.options.violations)))
