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

import importlib
import os

from .foundation import AttributeDictionary


THREADS_ENV = "DIFFSPLINE_THREADS"


def dict2obj(d: dict, dict_function: callable = AttributeDictionary) -> AttributeDictionary:
    """
    Convert (possibly nested) dictionaries (or list of dictionaries)
    to `AttributeDictionary`

    Args:
        d (`dict`):
            A dictionary to convert
        dict_function (`callable`, *optional*, defaults to AttributeDictionary):
            A function to convert dictionaries to
    """
    if isinstance(d, list):
        return list(map(dict2obj, d))
    if not isinstance(d, dict):
        return d
    return dict_function(**{k: dict2obj(v) for k, v in d.items()})


def configure_threads():
    """
    Caps XLA and BLAS thread pools from `DIFFSPLINE_THREADS`. Has to run
    before `jax` is imported for the XLA flag to take effect.
    """
    threads = os.environ.get(THREADS_ENV)
    if not threads:
        return None
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {threads}")
    flags = os.environ.get("XLA_FLAGS", "")
    if "intra_op_parallelism_threads" not in flags:
        os.environ["XLA_FLAGS"] = (
            f"{flags} --xla_cpu_multi_thread_eigen={'true' if threads > 1 else 'false'} "
            f"intra_op_parallelism_threads={threads}"
        ).strip()
    for name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(name, str(threads))
    return threads


def import_object(location: str):
    """
    Imports an object given as `"module.path:ObjectName"`.

    Args:
        location (`str`):
            The import string, such as `diffspline.checks:DualityCheck`
    """
    module_location, class_name = location.split(":")
    module = importlib.import_module(module_location)
    return getattr(module, class_name)
