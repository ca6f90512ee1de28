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

import json

import numpy as np


def to_builtin(value):
    """
    Recursively converts numpy/jax scalars and arrays into plain Python
    objects so they can be written as JSON.
    """
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if hasattr(value, "tolist"):
        return to_builtin(value.tolist())
    return value


class AttributeDictionary(dict):
    """
    `dict` subclass that also provides access to keys as attributes.
    Used for configurations, check results and solver reports.

    Example:
        ```python
        >>> report = AttributeDictionary(objective=0.5, converged=True)
        >>> report.objective
        0.5
        >>> report.rounds = []
        >>> report["rounds"]
        []
        ```
    """

    def __getattr__(self, k):
        if k not in self:
            raise AttributeError(k)
        return self[k]

    def __setattr__(self, k, v):
        is_private = k[0] == "_"
        if is_private:
            super().__setattr__(k, v)
        else:
            self[k] = v

    def __dir__(self):
        res = [*self.keys()]
        res.extend(super().__dir__())
        return res

    def to_json(self, exclude: tuple = ()) -> str:
        """
        Serializes to JSON with sorted keys.

        Args:
            exclude (`tuple`, *optional*, defaults to `()`):
                Top-level keys to leave out, e.g. `("timing",)` when
                comparing reports of two runs.
        """
        content = {k: v for k, v in self.items() if k not in exclude}
        return json.dumps(to_builtin(content), sort_keys=True, indent=2, ensure_ascii=False)
