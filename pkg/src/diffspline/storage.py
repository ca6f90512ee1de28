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
Field files: a `<stem>.json` sidecar holding `{dim, n, components, name, type}`
next to a `<stem>.f64` payload of little-endian float64 values, component-major
with row-major nodes.
"""
import json
import logging
from pathlib import Path
from typing import Union

import jax.numpy as jnp
import numpy as np

from .diffeo import Diffeo
from .dynamics import ControlPath, Trajectory
from .errors import ConfigurationError, IncompatibleGridError
from .foundation import AttributeDictionary
from .spectral import GridSpec, Momentum, VectorField


logger = logging.getLogger(__name__)

FIELD_TYPES = {"vector": VectorField, "momentum": Momentum, "diffeo": Diffeo}


def _stem(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".json", ".f64") else path


def write_json(path: Union[str, Path], content: dict):
    """
    Writes `content` as UTF-8 JSON with sorted keys.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(AttributeDictionary(content).to_json() + "\n", encoding="utf-8")


def save_field(field: Union[VectorField, Momentum, Diffeo], path: Union[str, Path], name: str = None) -> Path:
    """
    Saves a field or a diffeomorphism (its displacement) to `path`.

    Args:
        field (`VectorField`, `Momentum` or `Diffeo`):
            What to save
        path (`str` or `os.PathLike`):
            Destination stem, any `.json` / `.f64` suffix is dropped
        name (`str`, *optional*):
            Free-form label stored in the sidecar, defaults to the file stem

    Returns:
        The stem the two files were written to.
    """
    stem = _stem(path)
    kind = {Diffeo: "diffeo", Momentum: "momentum"}.get(type(field), "vector")
    values = field.displacement.values if isinstance(field, Diffeo) else field.values
    grid = field.grid
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.asarray(values, dtype="<f8").tofile(stem.with_suffix(".f64"))
    sidecar = dict(dim=grid.dim, n=grid.n, components=int(values.shape[0]), name=name or stem.name, type=kind)
    write_json(stem.with_suffix(".json"), sidecar)
    return stem


def load_field(path: Union[str, Path], grid: GridSpec = None, kind: str = None):
    """
    Loads a field file written by `save_field`.

    Args:
        path (`str` or `os.PathLike`):
            The stem, or either of the two files
        grid (`GridSpec`, *optional*):
            Expected grid; a mismatch raises `IncompatibleGridError`
        kind (`str`, *optional*):
            Convert to "vector", "momentum" or "diffeo" regardless of the stored
            type, e.g. to read a displacement as a plain field
    """
    stem = _stem(path)
    sidecar_path, payload_path = stem.with_suffix(".json"), stem.with_suffix(".f64")
    for required in (sidecar_path, payload_path):
        if not required.is_file():
            raise ConfigurationError(f"field file not found: {required}", key=str(path))
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        field_grid = GridSpec(int(sidecar["dim"]), int(sidecar["n"]))
        components = int(sidecar["components"])
        stored_kind = sidecar.get("type", "vector")
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"malformed field sidecar {sidecar_path}: {e}", key=str(path)) from e
    kind = stored_kind if kind is None else kind
    if kind not in FIELD_TYPES:
        raise ConfigurationError(f"unknown field type '{kind}' in {sidecar_path}", key=str(path))
    if grid is not None and grid != field_grid:
        raise IncompatibleGridError(f"{stem} lives on {field_grid}, expected {grid}")

    payload = np.fromfile(payload_path, dtype="<f8")
    expected = components * field_grid.size
    if payload.size != expected:
        raise ConfigurationError(
            f"{payload_path} holds {payload.size} values, sidecar announces {expected}", key=str(path)
        )
    values = jnp.asarray(payload.reshape((components,) + field_grid.shape))
    logger.debug(f"Loaded {kind} field {stem} on {field_grid}")
    if kind == "diffeo":
        return Diffeo(VectorField(field_grid, values))
    return FIELD_TYPES[kind](field_grid, values)


def save_trajectory(trajectory: Trajectory, directory: Union[str, Path], stride: int = 1) -> Path:
    """
    Exports every `stride`-th node of a trajectory as field files plus a
    `manifest.json` listing times and file stems relative to `directory`.
    """
    directory = Path(directory)
    indices = list(range(0, len(trajectory), stride))
    if indices[-1] != len(trajectory) - 1:
        indices.append(len(trajectory) - 1)
    nodes = []
    for index in indices:
        phi_stem = save_field(trajectory.phi(index), directory / f"phi_{index:04d}")
        momentum_stem = save_field(trajectory.momentum(index), directory / f"momentum_{index:04d}")
        velocity_stem = save_field(trajectory.velocity(index), directory / f"velocity_{index:04d}")
        nodes.append(
            dict(
                index=index,
                time=index * trajectory.dt,
                phi=phi_stem.name,
                momentum=momentum_stem.name,
                velocity=velocity_stem.name,
            )
        )
    manifest = dict(
        dim=trajectory.grid.dim,
        n=trajectory.grid.n,
        s=trajectory.metric.order,
        steps=trajectory.steps,
        nodes=nodes,
    )
    write_json(directory / "manifest.json", manifest)
    logger.info(f"Wrote {len(nodes)} trajectory nodes to {directory}")
    return directory / "manifest.json"


def save_control(control: ControlPath, directory: Union[str, Path]) -> Path:
    """
    Exports the control nodes as `alpha_XXXX` field files plus `control.json`.
    """
    directory = Path(directory)
    stems = [save_field(control.field(j), directory / f"alpha_{j:04d}").name for j in range(len(control))]
    write_json(directory / "control.json", dict(steps=control.steps, times=control.times, nodes=stems))
    return directory / "control.json"


def load_control(directory: Union[str, Path], grid: GridSpec = None) -> ControlPath:
    """
    Reads a control exported by `save_control`, e.g. to warm-start a solve.
    """
    directory = Path(directory)
    manifest_path = directory / "control.json"
    if not manifest_path.is_file():
        raise ConfigurationError(f"control manifest not found: {manifest_path}", key=str(directory))
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    fields = [load_field(directory / stem, grid=grid, kind="vector") for stem in manifest["nodes"]]
    return ControlPath.from_fields(fields)
