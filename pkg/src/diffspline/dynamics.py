# Copyright 2026 The diffspline authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Right-invariant geometry in Eulerian variables: covariant derivative,
acceleration, forced and geodesic rollouts of

    dm/dt + ad*_xi m = flat(alpha),    xi = sharp(m),    dphi/dt = xi o phi,

the coadjoint transport of momenta, and the energy monitors.
"""
import logging
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np
from jax import lax

from .diffeo import (
    DEGENERACY_THRESHOLD,
    Diffeo,
    VelocityPath,
    _evaluate,
    _flow_points,
    _jacobian_determinant,
    compose_field,
)
from .errors import BlowUpError, DegenerateMapError
from .foundation import AttributeDictionary
from .spectral import (
    GridSpec,
    Momentum,
    SobolevMetric,
    VectorField,
    _coad,
    _flat,
    _jacobian,
    _sharp,
    ad,
    ad_dagger,
    check_grids,
    dual_norm,
    inner_hs,
    sharp,
)


logger = logging.getLogger(__name__)

BLOW_UP_THRESHOLD = 1e6


class State:
    """
    A point of the controlled system: the diffeomorphism `phi` and the Eulerian
    momentum `m`, with `xi = sharp(m)` the Eulerian velocity.
    """

    def __init__(self, phi: Diffeo, m: Momentum):
        check_grids(phi.displacement, m)
        self.phi = phi
        self.m = m

    @property
    def grid(self) -> GridSpec:
        return self.m.grid

    def velocity(self, metric: SobolevMetric) -> VectorField:
        return sharp(self.m, metric)


class ControlPath(VelocityPath):
    """
    The Eulerian acceleration `alpha(t)` sampled on uniform time nodes, linear in
    time between them.
    """


class Trajectory:
    """
    The states of a rollout at every time node together with the control that
    produced them.

    Args:
        grid (`GridSpec`):
            The spatial grid
        metric (`SobolevMetric`):
            The metric of order `s` used by the rollout
        displacements (`array`):
            Displacements of `phi(t_j)`, shape `(M + 1, dim, *grid.shape)`
        momenta (`array`):
            Momenta `m(t_j)`, same shape
        control (`ControlPath`):
            The control that was integrated
    """

    def __init__(self, grid: GridSpec, metric: SobolevMetric, displacements, momenta, control: ControlPath):
        self.grid = grid
        self.metric = metric
        self.displacements = displacements
        self.momenta = momenta
        self.control = control

    @property
    def steps(self) -> int:
        return self.momenta.shape[0] - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.steps + 1)

    def __len__(self):
        return self.steps + 1

    def phi(self, index: int) -> Diffeo:
        return Diffeo(VectorField(self.grid, self.displacements[index]))

    def momentum(self, index: int) -> Momentum:
        return Momentum(self.grid, self.momenta[index])

    def velocity(self, index: int) -> VectorField:
        return sharp(self.momentum(index), self.metric)

    def state(self, index: int) -> State:
        return State(self.phi(index), self.momentum(index))

    def velocities(self) -> VelocityPath:
        return VelocityPath(self.grid, _sharp(self.grid, self.momenta, self.metric.order))

    def __repr__(self):
        return f"Trajectory(grid={self.grid}, s={self.metric.order}, steps={self.steps})"


# Kernels -------------------------------------------------------------------------------------------------------


def _rollout(grid: GridSpec, order: float, method: str, displacement0, momentum0, control_values):
    """
    RK4 integration of the forced system on the control's time grid. Returns the
    stacked displacements and momenta at every node. Traceable.
    """
    steps = control_values.shape[0] - 1
    h = 1.0 / steps
    forcing = _flat(grid, control_values, order)
    nodes = jnp.asarray(grid.nodes())

    def rhs(displacement, momentum, force):
        xi = _sharp(grid, momentum, order)
        return _evaluate(grid, xi, nodes + displacement, method), force - _coad(grid, xi, momentum)

    def step(carry, forces):
        d, m = carry
        f0, f1 = forces
        f_half = 0.5 * (f0 + f1)
        k1d, k1m = rhs(d, m, f0)
        k2d, k2m = rhs(d + 0.5 * h * k1d, m + 0.5 * h * k1m, f_half)
        k3d, k3m = rhs(d + 0.5 * h * k2d, m + 0.5 * h * k2m, f_half)
        k4d, k4m = rhs(d + h * k3d, m + h * k3m, f1)
        d = d + (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        m = m + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        return (d, m), (d, m)

    _, (displacements, momenta) = lax.scan(step, (displacement0, momentum0), (forcing[:-1], forcing[1:]))
    displacements = jnp.concatenate([displacement0[None], displacements])
    momenta = jnp.concatenate([momentum0[None], momenta])
    return displacements, momenta


_rollout_jit = jax.jit(_rollout, static_argnums=(0, 1, 2))


def _ad_star(grid: GridSpec, displacement, momentum, method: str):
    points = jnp.asarray(grid.nodes()) + displacement
    pulled = _evaluate(grid, momentum, points, method)
    gradient = _jacobian(grid, displacement) + jnp.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * grid.dim)
    determinant = _jacobian_determinant(grid, displacement)
    return determinant[None] * jnp.einsum("ji...,j...->i...", gradient, pulled)


_ad_star_jit = jax.jit(_ad_star, static_argnums=(0, 3))


@partial(jax.jit, static_argnums=(0,))
def _min_jacobians(grid: GridSpec, displacements):
    return jax.vmap(lambda d: jnp.min(_jacobian_determinant(grid, d)))(displacements)


def check_trajectory(trajectory: Trajectory):
    """
    Raises `BlowUpError` on the first node holding non-finite or exploding values
    and `DegenerateMapError` on the first node whose map left the group.
    """
    magnitude = np.maximum(
        np.max(np.abs(np.asarray(trajectory.displacements)).reshape(len(trajectory), -1), axis=1),
        np.max(np.abs(np.asarray(trajectory.momenta)).reshape(len(trajectory), -1), axis=1),
    )
    bad = np.flatnonzero(~np.isfinite(magnitude) | (magnitude > BLOW_UP_THRESHOLD))
    if bad.size:
        index = int(bad[0])
        raise BlowUpError(
            f"rollout blew up at time node {index} (t={trajectory.times[index]:.4g}); reduce the time step",
            time_index=index,
        )
    jacobians = np.asarray(_min_jacobians(trajectory.grid, trajectory.displacements))
    degenerate = np.flatnonzero(jacobians <= DEGENERACY_THRESHOLD)
    if degenerate.size:
        index = int(degenerate[0])
        raise DegenerateMapError(
            f"flow became degenerate at time node {index}: min Jacobian {jacobians[index]:.4g}",
            min_jacobian=float(jacobians[index]),
        )
    return trajectory


# Operations ----------------------------------------------------------------------------------------------------


def covariant_derivative(
    xi: VectorField, nu: VectorField, nu_dot: VectorField, metric: SobolevMetric
) -> VectorField:
    """
    Covariant derivative of the Eulerian field `nu` along a curve with Eulerian
    velocity `xi`: `nu_dot + 1/2 ad^dagger_xi nu + 1/2 ad^dagger_nu xi - 1/2 ad_xi nu`.
    """
    check_grids(xi, nu, nu_dot)
    return nu_dot + 0.5 * ad_dagger(xi, nu, metric) + 0.5 * ad_dagger(nu, xi, metric) - 0.5 * ad(xi, nu)


def acceleration(xi: VectorField, xi_dot: VectorField, metric: SobolevMetric) -> VectorField:
    """
    The reduced covariant acceleration `xi_dot + ad^dagger_xi xi`.
    """
    check_grids(xi, xi_dot)
    return xi_dot + ad_dagger(xi, xi, metric)


def forced_rollout(state0: State, control: ControlPath, metric: SobolevMetric, method: str = "cubic") -> Trajectory:
    """
    Integrates `dm/dt + ad*_xi m = flat(alpha)`, `xi = sharp(m)`,
    `dphi/dt = xi o phi` over `[0, 1]` with RK4 on the control's time grid.

    Args:
        state0 (`State`):
            Initial diffeomorphism and momentum
        control (`ControlPath`):
            Eulerian acceleration, linear in time between nodes
        metric (`SobolevMetric`):
            The order-`s` metric
        method (`str`, *optional*, defaults to "cubic"):
            Interpolation used for `xi o phi`
    """
    check_grids(state0.m, control.field(0))
    grid = state0.grid
    displacements, momenta = _rollout_jit(
        grid,
        float(metric.order),
        method,
        state0.phi.displacement.values,
        state0.m.values,
        control.values,
    )
    trajectory = Trajectory(grid, metric, displacements, momenta, control)
    return check_trajectory(trajectory)


def geodesic_shoot(
    m0: Momentum, metric: SobolevMetric, steps: int, phi0: Diffeo = None, method: str = "cubic"
) -> Trajectory:
    """
    Geodesic (EPDiff) rollout: `forced_rollout` from `(phi0, m0)` with zero
    control. `phi0` defaults to the identity.
    """
    phi0 = Diffeo.identity(m0.grid) if phi0 is None else phi0
    control = ControlPath.zeros(m0.grid, steps)
    return forced_rollout(State(phi0, m0), control, metric, method=method)


def ad_star_pullback(g: Diffeo, m: Momentum, method: str = "cubic") -> Momentum:
    """
    Coadjoint action `Ad*_g m = |Dg| (Dg)^T (m o g)`, the transpose of
    `Ad_g eta = (Dg . eta) o g^-1` under the L2 pairing.
    """
    g.check("coadjoint action map")
    check_grids(g.displacement, m)
    return Momentum(m.grid, _ad_star_jit(m.grid, g.displacement.values, m.values, method))


def transport_profile(trajectory: Trajectory, control: ControlPath, metric: SobolevMetric, method: str = "cubic"):
    """
    For every node `t_j`, the `(H^s)*` norm of

        m(t_j) - Ad*_{g(t_j)^-1} m(0) - int_0^{t_j} Ad*_{h(t_j -> s)} flat(alpha(s)) ds

    where `h(t -> s)` carries positions at time `t` back to time `s` along the
    rolled-out velocity. The integral uses the trapezoid rule on the time nodes.
    """
    grid = trajectory.grid
    velocities = trajectory.velocities().values
    forcing = _flat(grid, control.values, metric.order)
    nodes = jnp.asarray(grid.nodes())
    dt = trajectory.dt
    m0 = trajectory.momenta[0]
    profile = np.zeros(len(trajectory))
    for j in range(1, len(trajectory)):
        points = nodes
        integral = 0.5 * dt * forcing[j]
        # Walk back one node at a time: points holds h(t_j -> t_i) after each step.
        for i in range(j - 1, -1, -1):
            points = _flow_points(grid, velocities, points, float((i + 1) * dt), -dt, method, 1)
            weight = 0.5 * dt if i == 0 else dt
            integral = integral + weight * _ad_star_jit(grid, points - nodes, forcing[i], method)
        transported = _ad_star_jit(grid, points - nodes, m0, method)
        gap = Momentum(grid, trajectory.momenta[j] - transported - integral)
        profile[j] = np.sqrt(max(dual_norm(gap, metric.order), 0.0))
    return profile


def transport_residual(
    trajectory: Trajectory, control: ControlPath, metric: SobolevMetric, method: str = "cubic"
) -> float:
    """
    Largest gap over the time nodes between the rolled-out momentum and the
    coadjoint transport formula (see `transport_profile`). Small values certify
    that the Eulerian rollout and the Lagrangian flow agree.
    """
    return float(np.max(transport_profile(trajectory, control, metric, method=method)))


def energy_profile(trajectory: Trajectory) -> np.ndarray:
    """
    `f(t_j) = 1/2 ||xi(t_j)||^2_{H^s}` at every node
    """
    velocities = [trajectory.velocity(j) for j in range(len(trajectory))]
    return np.array([0.5 * inner_hs(xi, xi, trajectory.metric) for xi in velocities])


def _cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def gronwall_monitor(
    trajectory: Trajectory, control: ControlPath, metric: SobolevMetric, tolerance: float = 1e-6
) -> AttributeDictionary:
    """
    Checks the energy identity `f'(t) = <alpha(t), xi(t)>_{H^s}` and the a-priori
    bound `f(t) <= f(0) + ||alpha||_{L2([0,1], H^s)} (1 + int_0^t f)` that rules
    out finite-time blow-up.

    Args:
        trajectory (`Trajectory`):
            A rollout of `control`
        control (`ControlPath`):
            The control that produced it
        metric (`SobolevMetric`):
            The order-`s` metric
        tolerance (`float`, *optional*, defaults to 1e-6):
            Slack allowed in the inequality for quadrature error

    Returns:
        `AttributeDictionary` with the per-node `energy`, `derivative`,
        `pairing`, `bound`, `cauchy_schwarz_bound`, `holds` flags and the summary
        `identity_error` and `all_hold`.
    """
    dt = trajectory.dt
    energy = energy_profile(trajectory)
    derivative = np.gradient(energy, dt, edge_order=2)
    alphas = [control.field(j) for j in range(len(trajectory))]
    pairing = np.array([inner_hs(alphas[j], trajectory.velocity(j), metric) for j in range(len(trajectory))])
    alpha_squared = np.array([inner_hs(a, a, metric) for a in alphas])
    alpha_norm = float(np.sqrt(np.dot(control.trapezoid_weights(), alpha_squared)))
    energy_integral = _cumulative_trapezoid(energy, dt)
    bound = energy[0] + alpha_norm * (1.0 + energy_integral)
    cauchy_schwarz_bound = energy[0] + np.sqrt(_cumulative_trapezoid(alpha_squared, dt)) * np.sqrt(
        2.0 * energy_integral
    )
    holds = energy <= bound + tolerance
    report = AttributeDictionary(
        times=trajectory.times,
        energy=energy,
        derivative=derivative,
        pairing=pairing,
        bound=bound,
        cauchy_schwarz_bound=cauchy_schwarz_bound,
        holds=holds,
        identity_error=float(np.max(np.abs(derivative - pairing))),
        all_hold=bool(np.all(holds)),
        control_norm=alpha_norm,
    )
    logger.debug(f"Gronwall monitor: identity error {report.identity_error:.3g}, all hold {report.all_hold}")
    return report


def lagrangian_velocity(trajectory: Trajectory, index: int, method: str = "cubic") -> VectorField:
    """
    The Lagrangian velocity `v = xi o phi` at node `index`
    """
    return compose_field(trajectory.velocity(index), trajectory.phi(index), method=method)


def conservation_report(trajectory: Trajectory, tolerance: float = 1e-5, method: str = "cubic") -> AttributeDictionary:
    """
    Summarizes the conservation laws of a zero-control rollout: constant
    `||xi(t)||_{H^s}` and `m(t) = Ad*_{g(t)^-1} m(0)`.
    """
    norms = np.sqrt(np.maximum(2.0 * energy_profile(trajectory), 0.0))
    scale = norms[0] if norms[0] > 0 else 1.0
    energy_drift = float(np.max(np.abs(norms - norms[0])) / scale)
    transport = transport_profile(trajectory, trajectory.control, trajectory.metric, method=method)
    momentum_scale = np.sqrt(dual_norm(trajectory.momentum(0), trajectory.metric.order))
    momentum_scale = momentum_scale if momentum_scale > 0 else 1.0
    momentum_error = float(np.max(transport) / momentum_scale)
    return AttributeDictionary(
        energy_drift=energy_drift,
        momentum_error=momentum_error,
        velocity_norm=float(norms[0]),
        tolerance=tolerance,
        energy_conserved=energy_drift <= tolerance,
        momentum_conserved=momentum_error <= tolerance,
        all_pass=energy_drift <= tolerance and momentum_error <= tolerance,
    )
