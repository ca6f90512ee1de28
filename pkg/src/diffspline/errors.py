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


class DiffSplineError(Exception):
    """
    Base class for every error raised by `diffspline`.

    Each subclass carries a stable `reason` code that the command line
    front end prints so failures can be parsed by scripts.
    """

    reason: str = "error"


class IncompatibleGridError(DiffSplineError, ValueError):
    reason = "incompatible-grid"


class DegenerateMapError(DiffSplineError, ArithmeticError):
    """
    Raised when a map leaves the diffeomorphism group, i.e. its Jacobian
    determinant drops to the degeneracy threshold or below.

    Args:
        min_jacobian (`float`):
            The smallest Jacobian determinant found on the grid.
    """

    reason = "degenerate-map"

    def __init__(self, message: str, min_jacobian: float = float("nan")):
        super().__init__(message)
        self.min_jacobian = min_jacobian


class InversionError(DiffSplineError, ArithmeticError):
    reason = "inversion-failure"

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class BlowUpError(DiffSplineError, ArithmeticError):
    reason = "blow-up"

    def __init__(self, message: str, time_index: int = -1):
        super().__init__(message)
        self.time_index = time_index


class ConfigurationError(DiffSplineError, ValueError):
    """
    Raised for malformed or inconsistent configuration.

    Args:
        key (`str`, *optional*):
            The configuration key that caused the failure
    """

    reason = "config-error"

    def __init__(self, message: str, key: str = None):
        super().__init__(message)
        self.key = key


class HypothesisError(ConfigurationError):
    """
    Raised when metric orders violate the well-posedness hypotheses
    `s > d/2 + 1` and `s' >= s + 1`.
    """

    reason = "hypothesis-violation"
