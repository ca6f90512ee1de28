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
Fourier-spectral calculus for periodic vector fields and momenta on the flat
torus `[0, 2pi)^d`.

Field values are stored component-major with shape `(components, n, ..., n)`.
Spectra use the average-normalized convention `u_hat = fftn(u) / n^d`, so the
L2 pairing `<u, w> = (2pi)^-d int u.w dx` is `sum_k u_hat(k) . conj(w_hat(k))`
and a constant field `c` has squared norm `|c|^2`.

Two layers live here: the underscore kernels work on raw `jax.numpy` arrays
and are safe to trace under `jit`/`grad`; the public functions take and return
`VectorField` / `Momentum` values and validate grids.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import jax.numpy as jnp
import numpy as np

from .errors import ConfigurationError, IncompatibleGridError


logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def _wavenumbers(dim: int, n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    grids = np.meshgrid(*([k] * dim), indexing="ij")
    out = np.stack(grids).astype(np.float64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _derivative_wavenumbers(dim: int, n: int) -> np.ndarray:
    # Odd derivatives drop the Nyquist mode, it has no real-valued derivative.
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    grids = np.meshgrid(*([k] * dim), indexing="ij")
    out = np.stack(grids).astype(np.float64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _dealias_mask(dim: int, n: int) -> np.ndarray:
    k = np.abs(_wavenumbers(dim, n))
    out = np.all(k <= n // 3, axis=0).astype(np.float64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _multiplier(dim: int, n: int, order: float) -> np.ndarray:
    k2 = np.sum(_wavenumbers(dim, n) ** 2, axis=0)
    out = (1.0 + k2) ** order
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GridSpec:
    """
    A uniform grid on the flat torus `[0, 2pi)^dim`.

    Args:
        dim (`int`):
            Spatial dimension, 1 or 2
        n (`int`):
            Points per axis, a power of two no smaller than 8
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"grid dimension must be 1 or 2, got {self.dim}", key="grid.dim")
        if self.n < 8 or self.n & (self.n - 1):
            raise ConfigurationError(f"grid size must be a power of two >= 8, got {self.n}", key="grid.n")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple:
        return tuple(range(-self.dim, 0))

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    def nodes(self) -> np.ndarray:
        x = self.spacing * np.arange(self.n)
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def wavenumbers(self) -> np.ndarray:
        return _wavenumbers(self.dim, self.n)

    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self.dim, self.n)

    def multiplier(self, order: float) -> np.ndarray:
        """
        The Bessel-potential symbol `(1 + |k|^2)^order` on this grid
        """
        return _multiplier(self.dim, self.n, float(order))

    def zeros(self, components: int = None) -> "VectorField":
        components = self.dim if components is None else components
        return VectorField(self, jnp.zeros((components,) + self.shape))

    def constant(self, value) -> "VectorField":
        value = np.asarray(value, dtype=np.float64).reshape(-1, *([1] * self.dim))
        return VectorField(self, jnp.broadcast_to(value, (value.shape[0],) + self.shape))

    def from_function(self, function: Callable) -> "VectorField":
        """
        Samples `function(*coordinates)` at the grid nodes. The function returns
        one array (or scalar) per component.
        """
        coordinates = self.nodes()
        components = [np.broadcast_to(np.asarray(c, dtype=np.float64), self.shape) for c in function(*coordinates)]
        return VectorField(self, jnp.asarray(np.stack(components)))


def check_grids(*items):
    grids = {item.grid for item in items}
    if len(grids) > 1:
        raise IncompatibleGridError(f"fields live on different grids: {sorted(grids, key=repr)}")


class _GridFunction:
    """
    Shared behaviour of `VectorField` and `Momentum`: a real array of shape
    `(components, *grid.shape)` bound to a `GridSpec`. Values are treated as
    immutable.
    """

    def __init__(self, grid: GridSpec, values):
        values = jnp.asarray(values, dtype=jnp.float64)
        if values.ndim != grid.dim + 1 or values.shape[1:] != grid.shape:
            raise IncompatibleGridError(f"values of shape {values.shape} do not match grid {grid.shape}")
        self.grid = grid
        self.values = values

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def spectrum(self):
        return to_spectral(self.grid, self.values)

    def is_finite(self) -> bool:
        return bool(jnp.all(jnp.isfinite(self.values)))

    def max_abs(self) -> float:
        return float(jnp.max(jnp.abs(self.values)))

    def _wrap(self, values):
        return type(self)(self.grid, values)

    def __add__(self, other):
        check_grids(self, other)
        return self._wrap(self.values + other.values)

    def __sub__(self, other):
        check_grids(self, other)
        return self._wrap(self.values - other.values)

    def __mul__(self, scalar):
        return self._wrap(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._wrap(self.values / scalar)

    def __neg__(self):
        return self._wrap(-self.values)

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid}, components={self.components})"


class VectorField(_GridFunction):
    """
    A periodic vector field (velocity, acceleration or displacement) sampled at
    the grid nodes.
    """


class Momentum(_GridFunction):
    """
    An element of the dual space `(H^s)*`, represented by a periodic covector
    density paired with vector fields through the average-normalized L2 pairing.
    """


@dataclass(frozen=True)
class SobolevMetric:
    """
    The right-invariant Sobolev metric of order `s` with symbol `(1 + |k|^2)^s`
    acting on each vector component.

    Args:
        order (`float`):
            The metric order `s`, possibly non-integer
    """

    order: float

    def __post_init__(self):
        if not np.isfinite(self.order) or self.order < 0:
            raise ConfigurationError(f"metric order must be finite and >= 0, got {self.order}", key="s")

    def multiplier(self, grid: GridSpec) -> np.ndarray:
        return grid.multiplier(self.order)


# Raw kernels ---------------------------------------------------------------------------------------------------


def to_spectral(grid: GridSpec, values):
    return jnp.fft.fftn(values, axes=grid.axes) / grid.size


def to_nodal(grid: GridSpec, spectrum):
    return jnp.fft.ifftn(spectrum * grid.size, axes=grid.axes).real


def _apply_symbol(grid: GridSpec, values, symbol):
    return to_nodal(grid, to_spectral(grid, values) * symbol)


def _dealias(grid: GridSpec, values):
    return _apply_symbol(grid, values, grid.dealias_mask())


def _inner(grid: GridSpec, u, w, symbol=1.0):
    u_hat = to_spectral(grid, u)
    w_hat = to_spectral(grid, w)
    return jnp.sum(symbol * (u_hat * jnp.conj(w_hat)).real)


def _pairing(grid: GridSpec, u, w):
    return jnp.sum(jnp.mean(u * w, axis=grid.axes))


def _jacobian(grid: GridSpec, values):
    """
    Spectral Jacobian `D[i, j] = d_j u_i` with shape `(C, dim, *grid.shape)`.
    """
    k = _derivative_wavenumbers(grid.dim, grid.n)
    spectrum = to_spectral(grid, values)
    return to_nodal(grid, 1j * k[None] * spectrum[:, None])


def _divergence(grid: GridSpec, values):
    return jnp.trace(_jacobian(grid, values), axis1=0, axis2=1)


def _ad(grid: GridSpec, xi, eta):
    xi, eta = _dealias(grid, xi), _dealias(grid, eta)
    dxi, deta = _jacobian(grid, xi), _jacobian(grid, eta)
    out = jnp.einsum("ij...,j...->i...", dxi, eta) - jnp.einsum("ij...,j...->i...", deta, xi)
    return _dealias(grid, out)


def _coad(grid: GridSpec, xi, m):
    xi, m = _dealias(grid, xi), _dealias(grid, m)
    dxi, dm = _jacobian(grid, xi), _jacobian(grid, m)
    divergence = jnp.trace(dxi, axis1=0, axis2=1)
    out = (
        jnp.einsum("ji...,j...->i...", dxi, m)
        + jnp.einsum("ij...,j...->i...", dm, xi)
        + m * divergence[None]
    )
    return _dealias(grid, out)


def _flat(grid: GridSpec, values, order: float):
    return _apply_symbol(grid, values, grid.multiplier(order))


def _sharp(grid: GridSpec, values, order: float):
    return _apply_symbol(grid, values, 1.0 / grid.multiplier(order))


def _ad_dagger(grid: GridSpec, nu, kappa, order: float):
    return _sharp(grid, _coad(grid, nu, _flat(grid, kappa, order)), order)


# Public operations ---------------------------------------------------------------------------------------------


def inner_hs(u: VectorField, w: VectorField, metric: SobolevMetric) -> float:
    """
    The H^s inner product `sum_k (1 + |k|^2)^s u_hat(k) . conj(w_hat(k))`.

    Args:
        u (`VectorField`):
            First argument
        w (`VectorField`):
            Second argument, on the same grid as `u`
        metric (`SobolevMetric`):
            Provides the order `s`
    """
    check_grids(u, w)
    return float(_inner(u.grid, u.values, w.values, metric.multiplier(u.grid)))


def norm_hs(u: VectorField, metric: SobolevMetric) -> float:
    return float(np.sqrt(max(inner_hs(u, u, metric), 0.0)))


def pairing(m: Union[Momentum, VectorField], u: Union[Momentum, VectorField]) -> float:
    """
    Average-normalized L2 pairing `(2pi)^-d int m . u dx`, evaluated by the grid
    mean (exact for products of fields band-limited to `n/2`).
    """
    check_grids(m, u)
    return float(_pairing(m.grid, m.values, u.values))


def flat(u: VectorField, metric: SobolevMetric) -> Momentum:
    return Momentum(u.grid, _flat(u.grid, u.values, metric.order))


def sharp(m: Momentum, metric: SobolevMetric) -> VectorField:
    return VectorField(m.grid, _sharp(m.grid, m.values, metric.order))


def dual_norm(m: Momentum, metric_order: float) -> float:
    """
    Squared dual norm `||m||^2_{(H^order)*} = sum_k (1 + |k|^2)^-order |m_hat(k)|^2`.

    Args:
        m (`Momentum`):
            The momentum to measure
        metric_order (`float`):
            The order `sigma >= 0` of the Sobolev space the momentum is dual to
    """
    if metric_order < 0:
        raise ConfigurationError(f"dual norm order must be >= 0, got {metric_order}", key="order")
    return float(_inner(m.grid, m.values, m.values, 1.0 / m.grid.multiplier(metric_order)))


def derivative(u: VectorField, axis: int) -> VectorField:
    return VectorField(u.grid, _jacobian(u.grid, u.values)[:, axis])


def jacobian_matrix(u: VectorField):
    """
    Returns the raw array `D[i, j] = d_j u_i` of shape `(C, dim, *grid.shape)`.
    """
    return _jacobian(u.grid, u.values)


def divergence(u: VectorField):
    return _divergence(u.grid, u.values)


def dealias(u):
    return u._wrap(_dealias(u.grid, u.values))


def ad(xi: VectorField, eta: VectorField) -> VectorField:
    """
    The Lie-algebra operator `ad_xi eta = Dxi . eta - Deta . xi` (right-invariant
    sign convention). Inputs and the product are dealiased with the 2/3 rule.
    """
    check_grids(xi, eta)
    return VectorField(xi.grid, _ad(xi.grid, xi.values, eta.values))


def coad(xi: VectorField, m: Momentum) -> Momentum:
    """
    The coadjoint operator `ad*_xi m = (Dxi)^T m + (Dm) xi + m div(xi)`, the L2
    transpose of `ad(xi, .)`.
    """
    check_grids(xi, m)
    return Momentum(xi.grid, _coad(xi.grid, xi.values, m.values))


def ad_dagger(nu: VectorField, kappa: VectorField, metric: SobolevMetric) -> VectorField:
    """
    The metric transpose `ad^dagger_nu kappa = (ad*_nu (kappa^flat))^sharp`.
    """
    check_grids(nu, kappa)
    return VectorField(nu.grid, _ad_dagger(nu.grid, nu.values, kappa.values, metric.order))


def band_limited_random(
    grid: GridSpec,
    rng: np.random.Generator,
    components: int = None,
    amplitude: float = 1.0,
    max_mode: Optional[int] = None,
    kind: type = VectorField,
):
    """
    Draws a smooth random field whose spectrum is supported on `|k_i| <= max_mode`.

    Args:
        grid (`GridSpec`):
            The grid to sample on
        rng (`np.random.Generator`):
            Source of randomness, seeded by the caller
        components (`int`, *optional*, defaults to `grid.dim`):
            Number of components
        amplitude (`float`, *optional*, defaults to 1.0):
            Maximum absolute nodal value of the result
        max_mode (`int`, *optional*, defaults to `n // 3`):
            Largest retained wavenumber per axis
        kind (`type`, *optional*, defaults to `VectorField`):
            `VectorField` or `Momentum`
    """
    components = grid.dim if components is None else components
    max_mode = grid.n // 3 if max_mode is None else max_mode
    noise = rng.standard_normal((components,) + grid.shape)
    keep = np.all(np.abs(grid.wavenumbers()) <= max_mode, axis=0)
    spectrum = np.fft.fftn(noise, axes=grid.axes) * keep
    # Damp high modes so the draw looks like a smooth field, not band-limited noise.
    spectrum = spectrum / (1.0 + np.sum(grid.wavenumbers() ** 2, axis=0))
    values = np.fft.ifftn(spectrum, axes=grid.axes).real
    peak = np.max(np.abs(values))
    if peak > 0:
        values = values * (amplitude / peak)
    return kind(grid, jnp.asarray(values))
