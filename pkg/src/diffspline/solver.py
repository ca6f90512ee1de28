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
Riemannian splines on the diffeomorphism group: minimize

    int_0^1 ||alpha(t)||^2_{H^s'} dt,    s' >= s + 1,

over Eulerian accelerations `alpha` subject to the forced rollout and
first-order boundary conditions (or knot conditions for a time sequence).
Constraints are handled by quadratic penalties with geometric continuation;
each penalty round is an L-BFGS minimization whose gradient is the exact
reverse-mode derivative of the discrete RK4 rollout.
"""
import logging
import time
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .diffeo import DEGENERACY_THRESHOLD, Diffeo, _jacobian_determinant, compose_field, inverse
from .dynamics import ControlPath, State, Trajectory, _rollout, forced_rollout, gronwall_monitor, transport_residual
from .errors import BlowUpError, ConfigurationError, HypothesisError
from .foundation import AttributeDictionary
from .optim import minimize_lbfgs
from .spectral import (
    GridSpec,
    SobolevMetric,
    VectorField,
    _flat,
    _inner,
    _sharp,
    band_limited_random,
    check_grids,
    flat,
    inner_hs,
    sharp,
    to_spectral,
)


logger = logging.getLogger(__name__)


def validate_orders(dim: int, s: float, s_prime: float = None, allow_experimental_order: bool = False):
    """
    Enforces the well-posedness hypotheses `s > d/2 + 1` and `s' >= s + 1`.

    Args:
        dim (`int`):
            Spatial dimension `d`
        s (`float`):
            Order of the right-invariant metric
        s_prime (`float`, *optional*):
            Order of the norm measuring the acceleration
        allow_experimental_order (`bool`, *optional*, defaults to `False`):
            Accept `s < s' < s + 1`, a regime without an existence guarantee
    """
    if not s > dim / 2 + 1:
        raise HypothesisError(f"metric order s={s} violates s > d/2 + 1 = {dim / 2 + 1:g}", key="s")
    if s_prime is None or s_prime >= s + 1:
        return
    if allow_experimental_order and s_prime > s:
        logger.warning(f"Using experimental acceleration order s'={s_prime} < s + 1 = {s + 1:g}")
        return
    raise HypothesisError(
        f"acceleration order s'={s_prime} violates s' >= s + 1 = {s + 1:g}"
        " (set allow_experimental_order to explore s < s' < s + 1)",
        key="s_prime",
    )


@dataclass(frozen=True)
class PenaltySchedule:
    initial: float = 10.0
    growth: float = 10.0
    max_rounds: int = 5

    def __post_init__(self):
        if self.initial <= 0 or self.growth <= 1 or self.max_rounds < 1:
            raise ConfigurationError(f"invalid penalty schedule {self}", key="penalty")


@dataclass(frozen=True)
class Tolerances:
    gradient: float = 1e-7
    endpoint: float = 1e-6
    max_iterations: int = 200

    def __post_init__(self):
        if self.gradient <= 0 or self.endpoint <= 0 or self.max_iterations < 1:
            raise ConfigurationError(f"invalid tolerances {self}", key="tolerances")


class SplineProblem:
    """
    Boundary data, metric orders and solver settings of a spline problem.

    Args:
        grid (`GridSpec`):
            The spatial grid
        s (`float`):
            Order of the right-invariant metric, `s > d/2 + 1`
        s_prime (`float`):
            Order of the acceleration norm, `s' >= s + 1`
        steps (`int`):
            Number of time steps `M`
        phi0, phi1 (`Diffeo`, *optional*, default to the identity):
            Boundary diffeomorphisms
        v0, v1 (`VectorField`, *optional*, default to zero):
            Boundary Lagrangian velocities
        penalty (`PenaltySchedule`, *optional*):
            Continuation schedule of the constraint penalty
        tolerances (`Tolerances`, *optional*):
            Stopping criteria
        allow_experimental_order (`bool`, *optional*, defaults to `False`):
            Accept `s < s' < s + 1`
        method (`str`, *optional*, defaults to "cubic"):
            Interpolation used inside the rollout
        memory (`int`, *optional*, defaults to 10):
            L-BFGS memory
    """

    def __init__(
        self,
        grid: GridSpec,
        s: float,
        s_prime: float,
        steps: int,
        phi0: Diffeo = None,
        v0: VectorField = None,
        phi1: Diffeo = None,
        v1: VectorField = None,
        penalty: PenaltySchedule = None,
        tolerances: Tolerances = None,
        allow_experimental_order: bool = False,
        method: str = "cubic",
        memory: int = 10,
    ):
        validate_orders(grid.dim, s, s_prime, allow_experimental_order)
        if steps < ControlPath.min_steps:
            raise ConfigurationError(f"steps must be >= {ControlPath.min_steps}, got {steps}", key="steps")
        self.grid = grid
        self.s = float(s)
        self.s_prime = float(s_prime)
        self.steps = int(steps)
        self.metric = SobolevMetric(self.s)
        self.objective_metric = SobolevMetric(self.s_prime)
        self.penalty = PenaltySchedule() if penalty is None else penalty
        self.tolerances = Tolerances() if tolerances is None else tolerances
        self.allow_experimental_order = allow_experimental_order
        self.method = method
        self.memory = memory

        self.phi0 = (Diffeo.identity(grid) if phi0 is None else phi0).check("phi0")
        self.phi1 = (Diffeo.identity(grid) if phi1 is None else phi1).check("phi1")
        self.v0 = grid.zeros() if v0 is None else v0
        self.v1 = grid.zeros() if v1 is None else v1
        check_grids(self.phi0.displacement, self.phi1.displacement, self.v0, self.v1)
        self.xi0 = compose_field(self.v0, inverse(self.phi0, method=method), method=method)
        self.xi1 = compose_field(self.v1, inverse(self.phi1, method=method), method=method)
        self.m0 = flat(self.xi0, self.metric)

    @property
    def dt(self) -> float:
        return 1.0 / self.steps

    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.steps + 1, self.dt)
        weights[[0, -1]] *= 0.5
        return weights

    def initial_state(self) -> State:
        return State(self.phi0, self.m0)

    def zero_control(self) -> ControlPath:
        return ControlPath.zeros(self.grid, self.steps)

    def __repr__(self):
        return f"SplineProblem(grid={self.grid}, s={self.s}, s_prime={self.s_prime}, steps={self.steps})"


class KnotSequence:
    """
    Targets `phi_i` to be reached at times `t_1 < ... < t_n` in `(0, 1]`.

    Args:
        times (`Sequence[float]`):
            Strictly increasing knot times
        targets (`Sequence[Diffeo]`):
            One target diffeomorphism per time
        speed_weight (`float`):
            Weight `lambda_0 > 0` of the initial-speed term `||xi(0)||^2_{H^s'}`
    """

    def __init__(self, times: Sequence[float], targets: Sequence[Diffeo], speed_weight: float):
        times = [float(t) for t in times]
        if len(times) == 0 or len(times) != len(targets):
            raise ConfigurationError("knot times and targets must be non-empty and of equal length", key="knots")
        if any(not 0.0 < t <= 1.0 for t in times):
            raise ConfigurationError(f"knot times must lie in (0, 1], got {times}", key="knots.times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError(f"knot times must be strictly increasing, got {times}", key="knots.times")
        if not speed_weight > 0:
            # Without the speed term the infimum can be 0: lines with irrational slope are dense in the torus.
            raise ConfigurationError(
                f"speed_weight must be > 0, got {speed_weight}; without an initial-speed penalty the infimum "
                "of the sequence functional can be 0 on the torus",
                key="speed_weight",
            )
        check_grids(*[target.displacement for target in targets])
        self.times = times
        self.targets = [target.check(f"knot target {i}") for i, target in enumerate(targets)]
        self.speed_weight = float(speed_weight)

    @property
    def grid(self) -> GridSpec:
        return self.targets[0].grid

    def snap(self, steps: int):
        """
        Snaps every knot time to the nearest time node. Returns node indices and
        snapping distances.
        """
        indices = [int(round(t * steps)) for t in self.times]
        distances = [abs(t - i / steps) for t, i in zip(self.times, indices)]
        if indices[0] == 0:
            raise ConfigurationError(f"knot time {self.times[0]} snaps to t=0 with {steps} steps", key="knots.times")
        if len(set(indices)) != len(indices):
            raise ConfigurationError(f"knot times {self.times} collide on a grid of {steps} steps", key="knots.times")
        return indices, distances

    def __len__(self):
        return len(self.times)


class SolveReport(AttributeDictionary):
    """
    Outcome of `solve` or `interpolate_sequence`. Wall-clock values live under
    `timing` only.
    """

    def deterministic_json(self) -> str:
        return self.to_json(exclude=("timing",))


# Kernels -------------------------------------------------------------------------------------------------------


def _squared_norms(grid: GridSpec, values, symbol):
    spectrum = to_spectral(grid, values)
    power = spectrum.real**2 + spectrum.imag**2
    return jnp.sum(symbol * power, axis=tuple(range(1, values.ndim)))


def _min_jacobian(grid: GridSpec, displacements):
    return jnp.min(jax.vmap(lambda d: jnp.min(_jacobian_determinant(grid, d)))(displacements))


def _boundary_loss(grid, order, order_prime, method, control_values, penalty, d0, m0, d1, xi1, weights):
    displacements, momenta = _rollout(grid, order, method, d0, m0, control_values)
    objective = jnp.dot(weights, _squared_norms(grid, control_values, grid.multiplier(order_prime)))
    symbol = grid.multiplier(order)
    phi_gap = displacements[-1] - d1
    xi_gap = _sharp(grid, momenta[-1], order) - xi1
    phi_residual = _inner(grid, phi_gap, phi_gap, symbol)
    xi_residual = _inner(grid, xi_gap, xi_gap, symbol)
    total = objective + penalty * (phi_residual + xi_residual)
    return total, (objective, jnp.stack([phi_residual, xi_residual]), _min_jacobian(grid, displacements))


_boundary_value_and_grad = jax.jit(
    jax.value_and_grad(_boundary_loss, argnums=4, has_aux=True), static_argnums=(0, 1, 2, 3)
)


def _sequence_loss(
    grid, order, order_prime, method, knot_indices, unknowns, penalty, speed_weight, d0, targets, weights
):
    control_values, xi0 = unknowns[:-1], unknowns[-1]
    displacements, _ = _rollout(grid, order, method, d0, _flat(grid, xi0, order), control_values)
    symbol_prime = grid.multiplier(order_prime)
    objective = jnp.dot(weights, _squared_norms(grid, control_values, symbol_prime))
    speed = speed_weight * _inner(grid, xi0, xi0, symbol_prime)
    symbol = grid.multiplier(order)
    gaps = displacements[jnp.asarray(knot_indices)] - targets
    residuals = _squared_norms(grid, gaps, symbol)
    total = speed + objective + penalty * jnp.sum(residuals)
    return total, (objective, residuals, _min_jacobian(grid, displacements), speed)


_sequence_value_and_grad = jax.jit(
    jax.value_and_grad(_sequence_loss, argnums=5, has_aux=True), static_argnums=(0, 1, 2, 3, 4)
)


@partial(jax.jit, static_argnums=(0, 1))
def _weighted_inner(grid, order, omega, a, b):
    symbol = grid.multiplier(order)
    spectrum_a, spectrum_b = to_spectral(grid, a), to_spectral(grid, b)
    per_node = jnp.sum(symbol * (spectrum_a * jnp.conj(spectrum_b)).real, axis=tuple(range(1, a.ndim)))
    return jnp.dot(omega, per_node)


@partial(jax.jit, static_argnums=(0, 1))
def _weighted_riesz(grid, order, omega, gradient):
    return _sharp(grid, gradient, order) / omega.reshape((-1,) + (1,) * (gradient.ndim - 1))


# Operations ----------------------------------------------------------------------------------------------------


def objective(control: ControlPath, metric_order_sprime: float) -> float:
    """
    Trapezoidal quadrature of `||alpha(t)||^2_{H^s'}` over the control's nodes.
    """
    metric = SobolevMetric(metric_order_sprime)
    norms = [inner_hs(control.field(j), control.field(j), metric) for j in range(len(control))]
    return float(np.dot(control.trapezoid_weights(), norms))


def endpoint_residual(trajectory: Trajectory, problem: SplineProblem):
    """
    Squared H^s gaps `(||phi(1) - phi_1||^2, ||xi(1) - xi_1||^2)` between the end
    of `trajectory` and the problem's boundary data, with `xi_1 = v_1 o phi_1^-1`
    and the map gap measured on displacements.
    """
    phi_gap = trajectory.phi(-1).displacement - problem.phi1.displacement
    xi_gap = trajectory.velocity(-1) - problem.xi1
    return inner_hs(phi_gap, phi_gap, problem.metric), inner_hs(xi_gap, xi_gap, problem.metric)


def _boundary_call(problem: SplineProblem, control_values, penalty: float):
    (total, (objective_value, residuals, min_jacobian)), gradient = _boundary_value_and_grad(
        problem.grid,
        problem.s,
        problem.s_prime,
        problem.method,
        control_values,
        penalty,
        problem.phi0.displacement.values,
        problem.m0.values,
        problem.phi1.displacement.values,
        problem.xi1.values,
        jnp.asarray(problem.trapezoid_weights()),
    )
    aux = AttributeDictionary(
        objective=float(objective_value),
        residuals=[float(r) for r in residuals],
        min_jacobian=float(min_jacobian),
    )
    # L2 representer: the pairing averages over the grid, the raw gradient sums.
    return float(total), gradient * problem.grid.size, aux


def penalized_loss(control: ControlPath, problem: SplineProblem, penalty: float) -> float:
    """
    `objective + penalty * (phi residual + velocity residual)`, the function
    `gradient` differentiates.
    """
    check_grids(control.field(0), problem.v0)
    return _boundary_call(problem, control.values, penalty)[0]


def gradient(control: ControlPath, problem: SplineProblem, penalty: float) -> ControlPath:
    """
    Gradient of `penalized_loss` with respect to every control node, from the
    reverse sweep of the discrete rollout. The result `g` is the L2 representer:
    the directional derivative along `delta` is `sum_j <g_j, delta_j>_{L2}`.
    """
    check_grids(control.field(0), problem.v0)
    if control.steps != problem.steps:
        raise ConfigurationError(f"control has {control.steps} steps, problem has {problem.steps}", key="steps")
    return ControlPath(problem.grid, _boundary_call(problem, control.values, penalty)[1])


def random_control(problem: SplineProblem, seed: int, amplitude: float = 1e-2) -> ControlPath:
    """
    A deterministic band-limited random control, for multi-start runs.
    """
    rng = np.random.default_rng(seed)
    fields = [band_limited_random(problem.grid, rng, amplitude=amplitude) for _ in range(problem.steps + 1)]
    return ControlPath.from_fields(fields)


def _continuation(problem: SplineProblem, x, evaluate, inner, riesz, describe):
    """
    Runs the penalty rounds. `evaluate(x, penalty)` returns
    `(value, l2_gradient, aux)` with `aux.residuals`; `describe(aux)` gives the
    per-round summary.
    """
    schedule, tolerances = problem.penalty, problem.tolerances
    penalty = schedule.initial
    value, _, aux = evaluate(x, penalty)
    if not np.isfinite(value):
        raise BlowUpError("objective is not finite at the initial control")

    rounds, round_seconds = [], []
    status, worst, previous, stalled_rounds = "max-rounds", float("inf"), float("inf"), 0
    result = None
    for index in range(schedule.max_rounds):
        started = time.perf_counter()
        result = minimize_lbfgs(
            partial(evaluate, penalty=penalty),
            x,
            inner=inner,
            riesz=riesz,
            gradient_tolerance=tolerances.gradient,
            max_iterations=tolerances.max_iterations,
            memory=problem.memory,
            accept=lambda a: a.min_jacobian > DEGENERACY_THRESHOLD,
        )
        round_seconds.append(time.perf_counter() - started)
        x = result.x
        worst = max(result.aux.residuals)
        rounds.append(
            AttributeDictionary(
                round=index,
                penalty=penalty,
                iterations=result.iterations,
                status=result.status,
                value_history=result.history,
                gradient_norm=result.gradient_norm,
                max_residual=worst,
                **describe(result.aux),
            )
        )
        logger.info(
            f"Penalty round {index} (penalty {penalty:.3g}): {result.iterations} iterations, {result.status}, "
            f"objective {result.aux.objective:.6g}, max residual {worst:.3g}"
        )
        if worst < tolerances.endpoint:
            status = "converged"
            break
        stalled_rounds = stalled_rounds + 1 if worst > 0.99 * previous else 0
        if stalled_rounds >= 2:
            status = "stalled"
            logger.warning(f"Residual stalled at {worst:.3g} over two penalty rounds")
            break
        previous = worst
        penalty *= schedule.growth
    return x, result, rounds, round_seconds, status, rounds[-1].penalty


def _monitor(trajectory: Trajectory, control: ControlPath, problem: SplineProblem) -> AttributeDictionary:
    gronwall = gronwall_monitor(trajectory, control, problem.metric)
    return AttributeDictionary(
        gronwall_all_hold=gronwall.all_hold,
        energy_identity_error=gronwall.identity_error,
        transport_residual=transport_residual(trajectory, control, problem.metric, method=problem.method),
    )


def _boundary_geometry(problem: SplineProblem, extra_nodes: int = 0):
    omega = np.concatenate([problem.trapezoid_weights(), np.ones(extra_nodes)])
    omega = jnp.asarray(omega)

    def inner(a, b):
        return float(_weighted_inner(problem.grid, problem.s_prime, omega, a, b))

    def riesz(g):
        return _weighted_riesz(problem.grid, problem.s_prime, omega, g)

    return inner, riesz


def solve(problem: SplineProblem, init: Optional[ControlPath] = None):
    """
    Minimizes the acceleration functional under the boundary conditions
    `phi(0) = phi0, v(0) = v0, phi(1) = phi1, v(1) = v1` by penalty continuation.

    Args:
        problem (`SplineProblem`):
            The validated problem
        init (`ControlPath`, *optional*):
            Starting control, zero when absent

    Returns:
        `(Trajectory, ControlPath, SolveReport)`. A stalled or unconverged run is
        reported through `report.converged` / `report.status`, not raised.
    """
    started = time.perf_counter()
    control = problem.zero_control() if init is None else init
    check_grids(control.field(0), problem.v0)
    if control.steps != problem.steps:
        raise ConfigurationError(f"initial control has {control.steps} steps, expected {problem.steps}", key="steps")
    inner, riesz = _boundary_geometry(problem)

    def evaluate(x, penalty):
        return _boundary_call(problem, x, penalty)

    def describe(aux):
        return dict(objective=aux.objective, phi_residual=aux.residuals[0], velocity_residual=aux.residuals[1])

    x, result, rounds, round_seconds, status, penalty = _continuation(
        problem, control.values, evaluate, inner, riesz, describe
    )
    control = ControlPath(problem.grid, x)
    trajectory = forced_rollout(problem.initial_state(), control, problem.metric, method=problem.method)
    phi_residual, velocity_residual = endpoint_residual(trajectory, problem)
    monitors = _monitor(trajectory, control, problem)
    report = SolveReport(
        mode="boundary",
        status=status,
        converged=status == "converged",
        stalled=status == "stalled",
        objective=objective(control, problem.s_prime),
        penalized_objective=result.value,
        endpoint_residuals=AttributeDictionary(phi=phi_residual, velocity=velocity_residual),
        gradient_norm=result.gradient_norm,
        final_penalty=penalty,
        iterations=[r.iterations for r in rounds],
        rounds=rounds,
        monitors=monitors,
        problem=_describe_problem(problem),
        timing=AttributeDictionary(total_seconds=time.perf_counter() - started, round_seconds=round_seconds),
    )
    return trajectory, control, report


def _describe_problem(problem: SplineProblem) -> AttributeDictionary:
    return AttributeDictionary(
        dim=problem.grid.dim,
        n=problem.grid.n,
        s=problem.s,
        s_prime=problem.s_prime,
        steps=problem.steps,
        method=problem.method,
    )


def interpolate_sequence(knots: KnotSequence, problem: SplineProblem, init: Optional[ControlPath] = None):
    """
    Fits a spline through a time sequence of diffeomorphisms by minimizing

        lambda_0 ||xi(0)||^2_{H^s'} + int_0^1 ||alpha||^2_{H^s'} dt + penalty * sum_i ||phi(t_i) - phi_i||^2_{H^s}

    over the control and the initial velocity. The start map is `problem.phi0`;
    the problem's velocity and end-point data are ignored.

    Args:
        knots (`KnotSequence`):
            Knot times, targets and the initial-speed weight
        problem (`SplineProblem`):
            Grid, orders, time steps and solver settings
        init (`ControlPath`, *optional*):
            Starting control, zero when absent

    Returns:
        `(Trajectory, ControlPath, SolveReport)`; the trajectory's first momentum
        is the recovered initial momentum.
    """
    started = time.perf_counter()
    check_grids(knots.targets[0].displacement, problem.v0)
    indices, distances = knots.snap(problem.steps)
    if max(distances) > 0:
        logger.info(f"Snapped knot times to nodes {indices}, max distance {max(distances):.3g}")
    control = problem.zero_control() if init is None else init
    unknowns = jnp.concatenate([control.values, jnp.zeros((1,) + control.values.shape[1:])])
    targets = jnp.stack([target.displacement.values for target in knots.targets])
    weights = jnp.asarray(problem.trapezoid_weights())
    inner, riesz = _boundary_geometry(problem, extra_nodes=1)

    def evaluate(x, penalty):
        (total, (objective_value, residuals, min_jacobian, speed)), grad = _sequence_value_and_grad(
            problem.grid,
            problem.s,
            problem.s_prime,
            problem.method,
            tuple(indices),
            x,
            penalty,
            knots.speed_weight,
            problem.phi0.displacement.values,
            targets,
            weights,
        )
        aux = AttributeDictionary(
            objective=float(objective_value),
            residuals=[float(r) for r in residuals],
            min_jacobian=float(min_jacobian),
            speed=float(speed),
        )
        return float(total), grad * problem.grid.size, aux

    def describe(aux):
        return dict(objective=aux.objective, speed_term=aux.speed, knot_residuals=aux.residuals)

    x, result, rounds, round_seconds, status, penalty = _continuation(
        problem, unknowns, evaluate, inner, riesz, describe
    )
    control = ControlPath(problem.grid, x[:-1])
    xi0 = VectorField(problem.grid, x[-1])
    state0 = State(problem.phi0, flat(xi0, problem.metric))
    trajectory = forced_rollout(state0, control, problem.metric, method=problem.method)
    knot_residuals = []
    for index, target in zip(indices, knots.targets):
        gap = trajectory.phi(index).displacement - target.displacement
        knot_residuals.append(inner_hs(gap, gap, problem.metric))
    report = SolveReport(
        mode="sequence",
        status=status,
        converged=status == "converged",
        stalled=status == "stalled",
        objective=objective(control, problem.s_prime),
        speed_term=knots.speed_weight * inner_hs(xi0, xi0, problem.objective_metric),
        speed_weight=knots.speed_weight,
        penalized_objective=result.value,
        knot_times=knots.times,
        snapped_times=[i * problem.dt for i in indices],
        snap_distances=distances,
        knot_residuals=knot_residuals,
        initial_velocity_norm=float(np.sqrt(inner_hs(xi0, xi0, problem.metric))),
        gradient_norm=result.gradient_norm,
        final_penalty=penalty,
        iterations=[r.iterations for r in rounds],
        rounds=rounds,
        monitors=_monitor(trajectory, control, problem),
        problem=_describe_problem(problem),
        timing=AttributeDictionary(total_seconds=time.perf_counter() - started, round_seconds=round_seconds),
    )
    return trajectory, control, report


def initial_velocity(trajectory: Trajectory) -> VectorField:
    """
    Eulerian velocity `xi(0) = sharp(m(0))` of a trajectory
    """
    return sharp(trajectory.momentum(0), trajectory.metric)
