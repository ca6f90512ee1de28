"""
Checks on rollouts: geodesic conservation laws, the energy identity with its
growth bound, and the coadjoint transport formula for forced motion.
"""
import logging

from ..check import Check
from ..diffeo import Diffeo
from ..dynamics import (
    ControlPath,
    State,
    conservation_report,
    forced_rollout,
    geodesic_shoot,
    gronwall_monitor,
    transport_residual,
)
from ..spectral import GridSpec, SobolevMetric, band_limited_random, flat


logger = logging.getLogger(__name__)


def ramp_control(grid: GridSpec, steps: int, start, end) -> ControlPath:
    """
    `alpha(t) = (1 - t) start + t end`
    """
    times = [j / steps for j in range(steps + 1)]
    return ControlPath.from_fields([start * (1.0 - t) + end * t for t in times])


class _RolloutCheck(Check):
    defaults = dict(tolerance=1e-5, dim=1, n=32, steps=None, s=None, method="spectral", amplitude=0.05, max_mode=2)

    def setup(self):
        self.grid = GridSpec(self.options.dim, self.options.n)
        self.metric = SobolevMetric(self.setting("s"))
        self.steps = self.setting("steps")
        self.method = self.setting("method")

    def random_field(self, rng):
        return band_limited_random(self.grid, rng, amplitude=self.options.amplitude, max_mode=self.options.max_mode)

    def initial_state(self, rng) -> State:
        return State(Diffeo.identity(self.grid), flat(self.random_field(rng), self.metric))


class ConservationCheck(_RolloutCheck):
    """
    A zero-control rollout keeps `||xi(t)||_{H^s}` constant and transports its
    momentum, `m(t) = Ad*_{g(t)^-1} m(0)`, both measured relative to `t = 0`.
    """

    def run(self):
        self.setup()
        state = self.initial_state(self.rng())
        trajectory = geodesic_shoot(state.m, self.metric, self.steps, method=self.method)
        report = conservation_report(trajectory, tolerance=self.tolerance, method=self.method)
        value = max(report.energy_drift, report.momentum_error)
        return self.result(value, detail=report)


class GronwallCheck(_RolloutCheck):
    """
    On three smooth controls, the discrete energy derivative matches
    `<alpha, xi>_{H^s}` and the integral growth bound holds at every node.
    """

    defaults = dict(_RolloutCheck.defaults, tolerance=1e-4, method="cubic")

    def run(self):
        self.setup()
        rng = self.rng()
        state = self.initial_state(rng)
        a, b = self.random_field(rng), self.random_field(rng)
        fixtures = dict(
            constant=ControlPath.constant(a, self.steps),
            ramp=ramp_control(self.grid, self.steps, a * 0.0, a),
            blend=ramp_control(self.grid, self.steps, a, b),
        )
        detail, worst, all_hold = {}, 0.0, True
        for name, control in fixtures.items():
            trajectory = forced_rollout(state, control, self.metric, method=self.method)
            monitor = gronwall_monitor(trajectory, control, self.metric)
            detail[name] = dict(identity_error=monitor.identity_error, all_hold=monitor.all_hold)
            worst = max(worst, monitor.identity_error)
            all_hold = all_hold and monitor.all_hold
        return self.result(worst, detail=detail, passed=worst <= self.tolerance and all_hold)


class TransportCheck(_RolloutCheck):
    """
    The rolled-out momentum of a forced motion agrees with the coadjoint
    transport of the initial momentum plus the transported forcing.
    """

    defaults = dict(_RolloutCheck.defaults, tolerance=1e-4)

    def run(self):
        self.setup()
        rng = self.rng()
        state = self.initial_state(rng)
        control = ramp_control(self.grid, self.steps, self.random_field(rng), self.random_field(rng))
        trajectory = forced_rollout(state, control, self.metric, method=self.method)
        residual = transport_residual(trajectory, control, self.metric, method=self.method)
        return self.result(residual, detail=dict(steps=self.steps, method=self.method))
