__version__ = "0.0.1"

from .utils import configure_threads


configure_threads()

import jax


jax.config.update("jax_enable_x64", True)

from .check import Check, CheckSuite
from .diffeo import Diffeo, VelocityPath, compose, compose_field, flow, inverse, jacobian, path_energy, path_length
from .dynamics import ControlPath, State, Trajectory, forced_rollout, geodesic_shoot
from .errors import (
    BlowUpError,
    ConfigurationError,
    DegenerateMapError,
    DiffSplineError,
    HypothesisError,
    IncompatibleGridError,
    InversionError,
)
from .solver import KnotSequence, SplineProblem, interpolate_sequence, solve
from .spectral import GridSpec, Momentum, SobolevMetric, VectorField
