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
Diffeomorphisms of the torus stored as identity plus a periodic displacement,
`phi(x) = x + d(x)`. Displacements are kept unwrapped; only evaluation points
are reduced modulo `2pi`.
"""
import itertools
import logging
import math
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np
from jax import lax

from .errors import ConfigurationError, DegenerateMapError, InversionError
from .spectral import GridSpec, SobolevMetric, VectorField, _jacobian, check_grids, inner_hs, to_nodal, to_spectral


logger = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 0.02
INTERPOLATION_METHODS = ("cubic", "spectral")


# Evaluation kernels --------------------------------------------------------------------------------------------


def _bspline_coefficients(grid: GridSpec, values):
    # Periodic prefilter: divide by the sampled cubic B-spline symbol on each axis.
    theta = grid.spacing * grid.wavenumbers()
    symbol = jnp.prod((4.0 + 2.0 * jnp.cos(theta)) / 6.0, axis=0)
    return to_nodal(grid, to_spectral(grid, values) / symbol)


def _bspline_weights(t):
    t2 = t * t
    t3 = t2 * t
    return (
        (1.0 - t) ** 3 / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    )


def _evaluate_cubic(grid: GridSpec, values, points):
    coefficients = _bspline_coefficients(grid, values)
    scaled = points / grid.spacing
    base = jnp.floor(scaled)
    fraction = scaled - base
    base = base.astype(jnp.int32)
    weights = [_bspline_weights(fraction[axis]) for axis in range(grid.dim)]
    out = 0.0
    for offsets in itertools.product(range(4), repeat=grid.dim):
        index = tuple((base[axis] + offset - 1) % grid.n for axis, offset in enumerate(offsets))
        weight = math.prod(weights[axis][offset] for axis, offset in enumerate(offsets))
        out = out + coefficients[(slice(None),) + index] * weight
    return out


def _evaluate_spectral(grid: GridSpec, values, points):
    spectrum = to_spectral(grid, values)
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    flat_points = points.reshape(grid.dim, -1)
    phases = [jnp.exp(1j * flat_points[axis][:, None] * k[None]) for axis in range(grid.dim)]
    if grid.dim == 1:
        out = jnp.einsum("pa,ca->cp", phases[0], spectrum)
    else:
        out = jnp.einsum("pa,cab,pb->cp", phases[0], spectrum, phases[1])
    return out.real.reshape((values.shape[0],) + points.shape[1:])


def _evaluate(grid: GridSpec, values, points, method: str = "cubic"):
    """
    Evaluates the periodic field `values` at arbitrary `points` of shape
    `(dim, ...)`. Traceable; `method` must be static.
    """
    if method == "cubic":
        return _evaluate_cubic(grid, values, points)
    if method == "spectral":
        return _evaluate_spectral(grid, values, points)
    raise ConfigurationError(f"unknown interpolation method {method!r}, expected one of {INTERPOLATION_METHODS}")


def _jacobian_determinant(grid: GridSpec, displacement):
    gradient = _jacobian(grid, displacement)
    if grid.dim == 1:
        return 1.0 + gradient[0, 0]
    return (1.0 + gradient[0, 0]) * (1.0 + gradient[1, 1]) - gradient[0, 1] * gradient[1, 0]


# Types ---------------------------------------------------------------------------------------------------------


class Diffeo:
    """
    A diffeomorphism `x -> x + displacement(x)` of the flat torus.

    Args:
        displacement (`VectorField`):
            The periodic displacement, one component per spatial dimension
    """

    def __init__(self, displacement: VectorField):
        if displacement.components != displacement.grid.dim:
            raise ConfigurationError(
                f"a displacement needs {displacement.grid.dim} components, got {displacement.components}"
            )
        self.displacement = displacement

    @classmethod
    def identity(cls, grid: GridSpec) -> "Diffeo":
        return cls(grid.zeros())

    @classmethod
    def translation(cls, grid: GridSpec, shift) -> "Diffeo":
        return cls(grid.constant(shift))

    @property
    def grid(self) -> GridSpec:
        return self.displacement.grid

    def points(self):
        """
        Images of the grid nodes, unwrapped
        """
        return jnp.asarray(self.grid.nodes()) + self.displacement.values

    def jacobian(self):
        return _jacobian_determinant(self.grid, self.displacement.values)

    def min_jacobian(self) -> float:
        return float(jnp.min(self.jacobian()))

    def check(self, context: str = "map") -> "Diffeo":
        """
        Raises `DegenerateMapError` when the Jacobian determinant falls to
        `DEGENERACY_THRESHOLD` or below anywhere on the grid.
        """
        smallest = self.min_jacobian()
        if not np.isfinite(smallest) or smallest <= DEGENERACY_THRESHOLD:
            raise DegenerateMapError(
                f"{context} is degenerate: min Jacobian determinant {smallest:.4g} <= {DEGENERACY_THRESHOLD}",
                min_jacobian=smallest,
            )
        return self

    def __repr__(self):
        return f"Diffeo(grid={self.grid}, max_displacement={self.displacement.max_abs():.4g})"


class VelocityPath:
    """
    A time-dependent field sampled on `M + 1` uniform nodes of `[0, 1]`,
    linear in time between nodes.

    Args:
        grid (`GridSpec`):
            The spatial grid
        values (`array`):
            Node values of shape `(M + 1, components, *grid.shape)`
    """

    min_steps = 4

    def __init__(self, grid: GridSpec, values):
        values = jnp.asarray(values, dtype=jnp.float64)
        if values.ndim != grid.dim + 2 or values.shape[2:] != grid.shape:
            raise ConfigurationError(f"path values of shape {values.shape} do not match grid {grid.shape}")
        if values.shape[0] - 1 < self.min_steps:
            raise ConfigurationError(
                f"a path needs at least {self.min_steps} time steps, got {values.shape[0] - 1}", key="steps"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: GridSpec, steps: int, components: int = None):
        components = grid.dim if components is None else components
        return cls(grid, jnp.zeros((steps + 1, components) + grid.shape))

    @classmethod
    def constant(cls, field: VectorField, steps: int):
        return cls(field.grid, jnp.broadcast_to(field.values, (steps + 1,) + field.values.shape))

    @classmethod
    def from_fields(cls, fields: list):
        check_grids(*fields)
        return cls(fields[0].grid, jnp.stack([f.values for f in fields]))

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.steps + 1, self.dt)
        weights[[0, -1]] *= 0.5
        return weights

    def field(self, index: int) -> VectorField:
        return VectorField(self.grid, self.values[index])

    def __len__(self):
        return self.steps + 1

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid}, steps={self.steps})"


def _path_at(path_values, t, dt):
    steps = path_values.shape[0] - 1
    position = t / dt
    index = jnp.clip(jnp.floor(position), 0, steps - 1).astype(jnp.int32)
    weight = position - index
    return (1.0 - weight) * path_values[index] + weight * path_values[index + 1]


@partial(jax.jit, static_argnums=(0, 5))
def _flow_points(grid: GridSpec, path_values, points, t0, h, method, count):
    dt = 1.0 / (path_values.shape[0] - 1)

    def velocity(t, y):
        return _evaluate(grid, _path_at(path_values, t, dt), y, method)

    def step(i, y):
        t = t0 + i * h
        k1 = velocity(t, y)
        k2 = velocity(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = velocity(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = velocity(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return lax.fori_loop(0, count, step, points)


# Operations ----------------------------------------------------------------------------------------------------


def evaluate(field: VectorField, points, method: str = "cubic"):
    """
    Evaluates `field` at arbitrary points of shape `(dim, ...)`, wrapped modulo
    `2pi`, with periodic cubic B-splines or exact trigonometric summation.
    """
    return _evaluate(field.grid, field.values, jnp.asarray(points), method)


def compose_field(alpha, phi: Diffeo, method: str = "cubic"):
    """
    Computes `alpha o phi` at the grid nodes.

    Args:
        alpha (`VectorField` or `Momentum`):
            The field to pull back
        phi (`Diffeo`):
            The map to compose with
        method (`str`, *optional*, defaults to "cubic"):
            "cubic" for periodic cubic B-spline interpolation, "spectral" for
            direct trigonometric summation (exact for band-limited fields)
    """
    check_grids(alpha, phi.displacement)
    return alpha._wrap(_evaluate(alpha.grid, alpha.values, phi.points(), method))


def compose(phi: Diffeo, psi: Diffeo, method: str = "cubic") -> Diffeo:
    """
    Returns `phi o psi`, i.e. `x -> phi(psi(x))`.
    """
    check_grids(phi.displacement, psi.displacement)
    displacement = psi.displacement + compose_field(phi.displacement, psi, method=method)
    return Diffeo(displacement).check("composition")


@partial(jax.jit, static_argnums=(0, 3))
def _inverse_step(grid: GridSpec, displacement, inverse_displacement, method):
    points = jnp.asarray(grid.nodes()) + inverse_displacement
    return -_evaluate(grid, displacement, points, method)


def inverse(phi: Diffeo, method: str = "cubic", tolerance: float = 1e-10, max_iterations: int = 50) -> Diffeo:
    """
    Inverts `phi` by the fixed-point iteration `e(x) <- -d(x + e(x))`.

    Args:
        phi (`Diffeo`):
            The map to invert, with positive Jacobian everywhere
        method (`str`, *optional*, defaults to "cubic"):
            Interpolation used to evaluate the displacement
        tolerance (`float`, *optional*, defaults to 1e-10):
            Stop once the largest nodal update falls below this value
        max_iterations (`int`, *optional*, defaults to 50):
            Iterations allowed before raising `InversionError`
    """
    phi.check("map to invert")
    grid = phi.grid
    displacement = phi.displacement.values
    estimate = -displacement
    update = float("inf")
    for iteration in range(max_iterations):
        candidate = _inverse_step(grid, displacement, estimate, method)
        update = float(jnp.max(jnp.abs(candidate - estimate)))
        estimate = candidate
        if update < tolerance:
            logger.debug(f"Inverse converged after {iteration + 1} iterations (update {update:.3g})")
            return Diffeo(VectorField(grid, estimate))
    raise InversionError(
        f"inversion did not converge in {max_iterations} iterations, last update {update:.3g}", residual=update
    )


def jacobian(phi: Diffeo):
    """
    Jacobian determinant `det(I + Dd)` at every node, as an array of shape
    `grid.shape`.
    """
    return phi.jacobian()


def flow(xi: VelocityPath, t0: float, t1: float, method: str = "cubic") -> Diffeo:
    """
    Integrates `dy/dt = xi(t, y)` from time `t0` to `t1` for every grid node with
    classical RK4 at the path's time step (shortened to land on `t1`). The
    result maps positions at `t0` to positions at `t1`, so `flow(xi, 0, t)` is
    the flow `g(t)` and `flow(xi, t, 0)` its inverse.

    Args:
        xi (`VelocityPath`):
            The velocity, linear in time between nodes
        t0 (`float`):
            Start time in `[0, 1]`
        t1 (`float`):
            End time in `[0, 1]`, may be smaller than `t0`
        method (`str`, *optional*, defaults to "cubic"):
            Spatial interpolation of the velocity
    """
    for name, value in (("t0", t0), ("t1", t1)):
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError(f"flow time {name}={value} outside [0, 1]", key=name)
    grid = xi.grid
    count = int(math.ceil(abs(t1 - t0) / xi.dt - 1e-9))
    if count == 0:
        return Diffeo.identity(grid)
    h = (t1 - t0) / count
    nodes = jnp.asarray(grid.nodes())
    points = _flow_points(grid, xi.values, nodes, float(t0), float(h), method, count)
    return Diffeo(VectorField(grid, points - nodes)).check(f"flow from t={t0:g} to t={t1:g}")


def path_energy(xi: VelocityPath, metric: SobolevMetric) -> float:
    """
    Trapezoidal quadrature of `||xi(t)||^2_{H^s}` over the time nodes.
    """
    norms = [inner_hs(xi.field(i), xi.field(i), metric) for i in range(len(xi))]
    return float(np.dot(xi.trapezoid_weights(), norms))


def path_length(xi: VelocityPath, metric: SobolevMetric) -> float:
    """
    Trapezoidal quadrature of `||xi(t)||_{H^s}`, an upper bound on the distance
    between the endpoints of the flow of `xi`.
    """
    norms = [math.sqrt(max(inner_hs(xi.field(i), xi.field(i), metric), 0.0)) for i in range(len(xi))]
    return float(np.dot(xi.trapezoid_weights(), norms))
