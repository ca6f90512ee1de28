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
Problem documents. Every numeric setting of a run lives in one YAML (or JSON)
file; field entries are either paths to field files, resolved relative to the
document, or small inline generators such as `{kind: mode, wavevector: [1]}`.
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .diffeo import INTERPOLATION_METHODS, Diffeo
from .errors import ConfigurationError
from .foundation import AttributeDictionary
from .solver import KnotSequence, PenaltySchedule, SplineProblem, Tolerances, validate_orders
from .spectral import GridSpec, Momentum, SobolevMetric, VectorField, band_limited_random, flat
from .storage import load_field
from .utils import dict2obj, import_object


logger = logging.getLogger(__name__)

_MISSING = object()

DEFAULT_CHECKS = [
    "diffspline.checks:DualityCheck",
    "diffspline.checks:MetricCompatibilityCheck",
    "diffspline.checks:CoadjointDualityCheck",
    "diffspline.checks:ConservationCheck",
    "diffspline.checks:GronwallCheck",
    "diffspline.checks:TransportCheck",
    "diffspline.checks:GradientCheck",
    "diffspline.checks:HypothesisCheck",
]


@dataclass
class RunConfig:
    """
    What a single command-line invocation runs.

    Args:
        command (`str`):
            One of "geodesic", "spline", "sequence", "check"
        config_path (`Path`, *optional*):
            The problem document; optional only for "check"
        output_dir (`Path`):
            Directory receiving every output file
        verbose (`bool`):
            Log at DEBUG level
        seed (`int`):
            Seed for random initializations and generated fields
    """

    command: str
    config_path: Path = None
    output_dir: Path = Path("results")
    verbose: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed}", key="--seed")
        if self.config_path is not None:
            self.config_path = Path(self.config_path)
            if not self.config_path.is_file():
                raise ConfigurationError(f"configuration file not found: {self.config_path}", key="--config")
        elif self.command != "check":
            raise ConfigurationError(f"`{self.command}` needs --config", key="--config")
        self.output_dir = Path(self.output_dir)

    def prepare_output(self) -> Path:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"cannot create output directory {self.output_dir}: {e}", key="--out") from e
        if not os.access(self.output_dir, os.W_OK):
            raise ConfigurationError(f"output directory {self.output_dir} is not writable", key="--out")
        return self.output_dir


def read_document(path) -> AttributeDictionary:
    """
    Reads a YAML/JSON problem document into a nested `AttributeDictionary`.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"configuration file not found: {path}", key="--config") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse {path}: {e}", key="--config") from e
    if content is None:
        content = {}
    if not isinstance(content, dict):
        raise ConfigurationError(f"{path} must hold a mapping at the top level", key="--config")
    return dict2obj(content)


def get(document: dict, key: str, cast: Callable = None, default=_MISSING, prefix: str = ""):
    """
    Reads `key` from `document`, converting it with `cast`. Errors name the full
    key path.
    """
    name = f"{prefix}{key}"
    if key not in document or document[key] is None:
        if default is _MISSING:
            raise ConfigurationError(f"missing required key '{name}'", key=name)
        return default
    value = document[key]
    if cast is None:
        return value
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid value for '{name}': {value!r} ({e})", key=name) from e


def load_grid(document: dict) -> GridSpec:
    grid = get(document, "grid", dict)
    return GridSpec(get(grid, "dim", int, prefix="grid."), get(grid, "n", int, prefix="grid."))


def _method(document: dict) -> str:
    method = get(document, "method", str, default="cubic")
    if method not in INTERPOLATION_METHODS:
        raise ConfigurationError(f"method must be one of {INTERPOLATION_METHODS}, got '{method}'", key="method")
    return method


def _generated_field(entry: dict, grid: GridSpec, key: str, seed: int) -> VectorField:
    kind = get(entry, "kind", str, prefix=f"{key}.")
    if kind == "zero":
        return grid.zeros()
    if kind == "constant":
        value = get(entry, "value", list, prefix=f"{key}.")
        if len(value) != grid.dim:
            raise ConfigurationError(f"'{key}.value' needs {grid.dim} entries", key=f"{key}.value")
        return grid.constant(value)
    if kind == "mode":
        component = get(entry, "component", int, default=0, prefix=f"{key}.")
        wavevector = get(entry, "wavevector", list, prefix=f"{key}.")
        amplitude = get(entry, "amplitude", float, default=1.0, prefix=f"{key}.")
        phase = get(entry, "phase", str, default="cos", prefix=f"{key}.")
        if not 0 <= component < grid.dim or len(wavevector) != grid.dim or phase not in ("cos", "sin"):
            raise ConfigurationError(f"invalid mode generator {dict(entry)}", key=key)
        if any(abs(int(k)) > grid.n // 3 for k in wavevector):
            raise ConfigurationError(f"'{key}.wavevector' exceeds the resolved band |k| <= {grid.n // 3}", key=key)
        wave = np.cos if phase == "cos" else np.sin
        values = np.zeros((grid.dim,) + grid.shape)
        values[component] = amplitude * wave(np.tensordot(np.asarray(wavevector, dtype=float), grid.nodes(), axes=1))
        return VectorField(grid, values)
    if kind == "random":
        rng = np.random.default_rng(get(entry, "seed", int, default=seed, prefix=f"{key}."))
        return band_limited_random(
            grid,
            rng,
            amplitude=get(entry, "amplitude", float, default=0.05, prefix=f"{key}."),
            max_mode=get(entry, "max_mode", int, default=2, prefix=f"{key}."),
        )
    raise ConfigurationError(f"unknown field generator kind '{kind}'", key=f"{key}.kind")


def load_vector(entry, grid: GridSpec, base_dir: Path, key: str, seed: int = 0, kind: str = "vector"):
    """
    Resolves a field entry: a path (relative to `base_dir`) or an inline generator.

    Args:
        entry (`str` or `dict`):
            The value found in the document
        grid (`GridSpec`):
            Grid the field must live on
        base_dir (`Path`):
            Directory of the document
        key (`str`):
            Key path used in error messages
        seed (`int`, *optional*, defaults to 0):
            Default seed of "random" generators
        kind (`str`, *optional*, defaults to "vector"):
            "vector" or "momentum"
    """
    if isinstance(entry, str):
        path = Path(entry) if Path(entry).is_absolute() else base_dir / entry
        try:
            return load_field(path, grid=grid, kind=kind)
        except ConfigurationError as e:
            raise ConfigurationError(f"'{key}': {e}", key=key) from e
    if isinstance(entry, dict):
        field = _generated_field(entry, grid, key, seed)
        return Momentum(grid, field.values) if kind == "momentum" else field
    raise ConfigurationError(f"'{key}' must be a file path or a generator mapping, got {entry!r}", key=key)


def load_diffeo(entry, grid: GridSpec, base_dir: Path, key: str, seed: int = 0) -> Diffeo:
    """
    Resolves a diffeomorphism entry: a path, `{kind: identity}`,
    `{kind: translation, shift: [...]}` or any field generator used as the
    displacement.
    """
    if entry is None:
        return Diffeo.identity(grid)
    if isinstance(entry, dict) and entry.get("kind") == "identity":
        return Diffeo.identity(grid)
    if isinstance(entry, dict) and entry.get("kind") == "translation":
        shift = get(entry, "shift", list, prefix=f"{key}.")
        if len(shift) != grid.dim:
            raise ConfigurationError(f"'{key}.shift' needs {grid.dim} entries", key=f"{key}.shift")
        return Diffeo.translation(grid, shift)
    return Diffeo(load_vector(entry, grid, base_dir, key, seed=seed)).check(key)


def load_geodesic_config(path, seed: int = 0) -> AttributeDictionary:
    """
    Geodesic document keys: `grid`, `s`, `steps`, exactly one of `momentum`
    (initial Eulerian momentum) or `velocity` (initial Eulerian velocity),
    optional `phi0`, `method` and `stride` of the trajectory export.
    """
    path = Path(path)
    document, base_dir = read_document(path), path.parent
    grid = load_grid(document)
    s = get(document, "s", float)
    validate_orders(grid.dim, s)
    metric = SobolevMetric(s)
    steps = get(document, "steps", int)
    if steps < 4:
        raise ConfigurationError(f"steps must be >= 4, got {steps}", key="steps")
    if ("momentum" in document) == ("velocity" in document):
        raise ConfigurationError("give exactly one of 'momentum' or 'velocity'", key="momentum")
    if "momentum" in document:
        m0 = load_vector(document.momentum, grid, base_dir, "momentum", seed=seed, kind="momentum")
    else:
        m0 = flat(load_vector(document.velocity, grid, base_dir, "velocity", seed=seed), metric)
    return AttributeDictionary(
        grid=grid,
        metric=metric,
        steps=steps,
        m0=m0,
        phi0=load_diffeo(document.get("phi0"), grid, base_dir, "phi0", seed=seed),
        method=_method(document),
        stride=get(document, "stride", int, default=1),
        tolerance=get(document, "tolerance", float, default=1e-5),
    )


def _load_problem(document: dict, base_dir: Path, seed: int, boundary: bool) -> SplineProblem:
    grid = load_grid(document)
    s, s_prime = get(document, "s", float), get(document, "s_prime", float)
    allow = get(document, "allow_experimental_order", bool, default=False)
    # Reject before any field is read or generated.
    validate_orders(grid.dim, s, s_prime, allow)
    penalty = get(document, "penalty", dict, default={})
    tolerances = get(document, "tolerances", dict, default={})
    data = get(document, "boundary", dict, default={}) if boundary else {}
    start = data.get("phi0", document.get("phi0"))
    return SplineProblem(
        grid,
        s,
        s_prime,
        get(document, "steps", int),
        phi0=load_diffeo(start, grid, base_dir, "boundary.phi0", seed=seed),
        v0=load_vector(data["v0"], grid, base_dir, "boundary.v0", seed=seed) if "v0" in data else None,
        phi1=load_diffeo(data.get("phi1"), grid, base_dir, "boundary.phi1", seed=seed),
        v1=load_vector(data["v1"], grid, base_dir, "boundary.v1", seed=seed) if "v1" in data else None,
        penalty=PenaltySchedule(
            initial=get(penalty, "initial", float, default=10.0, prefix="penalty."),
            growth=get(penalty, "growth", float, default=10.0, prefix="penalty."),
            max_rounds=get(penalty, "max_rounds", int, default=5, prefix="penalty."),
        ),
        tolerances=Tolerances(
            gradient=get(tolerances, "gradient", float, default=1e-7, prefix="tolerances."),
            endpoint=get(tolerances, "endpoint", float, default=1e-6, prefix="tolerances."),
            max_iterations=get(tolerances, "max_iterations", int, default=200, prefix="tolerances."),
        ),
        allow_experimental_order=allow,
        method=_method(document),
        memory=get(document, "memory", int, default=10),
    )


def _load_init(document: dict) -> AttributeDictionary:
    init = get(document, "init", str, default="zero")
    if init not in ("zero", "random"):
        raise ConfigurationError(f"init must be 'zero' or 'random', got '{init}'", key="init")
    return AttributeDictionary(init=init, init_amplitude=get(document, "init_amplitude", float, default=1e-2))


def load_spline_config(path, seed: int = 0) -> AttributeDictionary:
    """
    Spline document keys: `grid`, `s`, `s_prime`, `steps`, optional
    `boundary: {phi0, v0, phi1, v1}`, `penalty: {initial, growth, max_rounds}`,
    `tolerances: {gradient, endpoint, max_iterations}`,
    `allow_experimental_order`, `method`, `memory`, `init` ("zero" or
    "random") and `init_amplitude`.
    """
    path = Path(path)
    document = read_document(path)
    config = _load_init(document)
    config.problem = _load_problem(document, path.parent, seed, boundary=True)
    return config


def load_sequence_config(path, seed: int = 0) -> AttributeDictionary:
    """
    Sequence document keys: those of a spline document without `boundary`,
    plus `phi0` (start map, identity by default), `speed_weight` and
    `knots: [{time, target}, ...]`.
    """
    path = Path(path)
    document = read_document(path)
    config = _load_init(document)
    config.problem = _load_problem(document, path.parent, seed, boundary=False)
    grid = config.problem.grid
    knots = get(document, "knots", list)
    times, targets = [], []
    for i, knot in enumerate(knots):
        if not isinstance(knot, dict):
            raise ConfigurationError(f"'knots[{i}]' must be a mapping with 'time' and 'target'", key=f"knots[{i}]")
        times.append(get(knot, "time", float, prefix=f"knots[{i}]."))
        target = get(knot, "target", prefix=f"knots[{i}].")
        targets.append(load_diffeo(target, grid, path.parent, f"knots[{i}].target"))
    config.knots = KnotSequence(times, targets, get(document, "speed_weight", float))
    return config


def get_checks(imports: list) -> list:
    """
    Imports every `module:Class` check, reporting all failures together.
    """
    checks, problematic_imports = [], []
    for location in imports:
        logger.debug(f"Attempting to import {location}")
        try:
            checks.append(import_object(location))
        except (ImportError, AttributeError, ValueError):
            problematic_imports.append(location)
    if len(problematic_imports) > 0:
        problematic_imports = "\n".join([f"- {problematic_import}" for problematic_import in problematic_imports])
        raise ConfigurationError(f"could not import the following checks:\n    {problematic_imports}", key="checks")
    return checks


def load_check_config(path=None, seed: int = 0) -> AttributeDictionary:
    """
    Check document keys (all optional): `checks` as a list of `module:Class`
    strings, `check_args` mapping class names to keyword arguments, and the
    shared context `s`, `s_prime`, `steps`, `method`.
    """
    document = AttributeDictionary() if path is None else read_document(path)
    imports = list(get(document, "checks", list, default=DEFAULT_CHECKS))
    check_args = get(document, "check_args", dict, default={})
    context = AttributeDictionary(
        seed=seed,
        s=get(document, "s", float, default=3.0),
        s_prime=get(document, "s_prime", float, default=4.0),
        steps=get(document, "steps", int, default=64),
        method=_method(document),
    )
    return AttributeDictionary(checks=get_checks(imports), check_args=check_args, context=context)
