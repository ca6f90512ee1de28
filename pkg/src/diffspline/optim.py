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
Limited-memory BFGS in a user-supplied Hilbert inner product with backtracking
Armijo line search.
"""
import logging
import math
from collections import deque
from typing import Callable

from .foundation import AttributeDictionary


logger = logging.getLogger(__name__)


def minimize_lbfgs(
    value_and_gradient: Callable,
    x0,
    inner: Callable,
    riesz: Callable,
    gradient_tolerance: float = 1e-8,
    max_iterations: int = 200,
    memory: int = 10,
    armijo: float = 1e-4,
    max_backtracks: int = 40,
    accept: Callable = None,
) -> AttributeDictionary:
    """
    Minimizes a smooth function with L-BFGS (two-loop recursion).

    Args:
        value_and_gradient (`Callable`):
            `x -> (value, gradient, aux)` where `gradient` is the L2
            representer of the derivative
        x0:
            Starting point, any array type supporting `+`, `-` and scalar `*`
        inner (`Callable`):
            `(a, b) -> float`, the inner product the method works in
        riesz (`Callable`):
            Maps an L2 gradient to its representer under `inner`
        gradient_tolerance (`float`, *optional*, defaults to 1e-8):
            Stop once the `inner`-norm of the gradient drops below this value
        max_iterations (`int`, *optional*, defaults to 200):
            Maximum number of accepted steps
        memory (`int`, *optional*, defaults to 10):
            Number of stored curvature pairs
        armijo (`float`, *optional*, defaults to 1e-4):
            Sufficient decrease constant
        max_backtracks (`int`, *optional*, defaults to 40):
            Step halvings allowed per line search before giving up
        accept (`Callable`, *optional*):
            `aux -> bool`; trial points it rejects are treated as failed steps,
            which keeps iterates inside the feasible set

    Returns:
        `AttributeDictionary` with the final `x`, `value`, `aux`,
        `gradient_norm`, `iterations`, accepted `history` of values and a
        `status` in {"converged", "max-iterations", "line-search-failed"}.
    """
    x = x0
    value, gradient, aux = value_and_gradient(x)
    direction_gradient = riesz(gradient)
    gradient_norm = math.sqrt(max(inner(direction_gradient, direction_gradient), 0.0))
    pairs = deque(maxlen=memory)
    history = [float(value)]
    status = "max-iterations"
    iterations = 0

    for iterations in range(max_iterations + 1):
        if gradient_norm < gradient_tolerance:
            status = "converged"
            break
        if iterations == max_iterations:
            break

        direction = _two_loop(direction_gradient, pairs, inner)
        slope = inner(direction_gradient, direction)
        if not slope < 0:
            logger.debug("L-BFGS direction is not a descent direction, resetting memory")
            pairs.clear()
            direction = -1.0 * direction_gradient
            slope = -(gradient_norm**2)

        step = 1.0
        for _ in range(max_backtracks):
            trial = x + step * direction
            trial_value, trial_gradient, trial_aux = value_and_gradient(trial)
            feasible = accept is None or accept(trial_aux)
            if feasible and math.isfinite(trial_value) and trial_value <= value + armijo * step * slope:
                break
            step *= 0.5
        else:
            status = "line-search-failed"
            logger.debug(f"Line search failed after {max_backtracks} backtracks at value {value:.6g}")
            break

        trial_direction_gradient = riesz(trial_gradient)
        s = trial - x
        y = trial_direction_gradient - direction_gradient
        curvature = inner(s, y)
        if curvature > 1e-12 * math.sqrt(max(inner(s, s), 0.0) * max(inner(y, y), 0.0)):
            pairs.append((s, y, 1.0 / curvature))

        x, value, gradient, aux = trial, trial_value, trial_gradient, trial_aux
        direction_gradient = trial_direction_gradient
        gradient_norm = math.sqrt(max(inner(direction_gradient, direction_gradient), 0.0))
        history.append(float(value))
        logger.debug(f"L-BFGS iteration {iterations + 1}: value {value:.6g}, gradient norm {gradient_norm:.3g}")

    return AttributeDictionary(
        x=x,
        value=float(value),
        gradient=gradient,
        aux=aux,
        gradient_norm=gradient_norm,
        iterations=len(history) - 1,
        history=history,
        status=status,
    )


def _two_loop(gradient, pairs, inner):
    q = gradient
    alphas = []
    for s, y, rho in reversed(pairs):
        alpha = rho * inner(s, q)
        q = q - alpha * y
        alphas.append(alpha)
    if pairs:
        s, y, rho = pairs[-1]
        q = q * (inner(s, y) / inner(y, y))
    for (s, y, rho), alpha in zip(pairs, reversed(alphas)):
        beta = rho * inner(y, q)
        q = q + (alpha - beta) * s
    return -1.0 * q
