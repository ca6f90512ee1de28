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
import logging

import numpy as np

from .errors import ConfigurationError
from .foundation import AttributeDictionary


logger = logging.getLogger(__name__)


class Check:
    """
    Base class for all invariant checks.
    Any check should inherit this class and implement `run`.

    Class attributes set the defaults of every option; keyword arguments given
    at construction (the `check_args` of a configuration) override them.

    Example:

    ```python
    class ZeroCheck(Check):
        "Checks that nothing is larger than the tolerance"
        defaults = dict(tolerance=1e-12)

        def run(self):
            return self.result(0.0, detail="nothing to measure")
    ```
    """

    defaults: dict = dict(tolerance=1e-8)

    def __init__(self, context: AttributeDictionary = None, **options):
        """
        Args:
            context (`AttributeDictionary`, *optional*):
                Shared settings such as `seed`, `s`, `s_prime`, `steps` and `method`
            options:
                Overrides of `defaults`
        """
        unknown = set(options) - set(self.defaults)
        if unknown:
            raise ConfigurationError(
                f"{self.name} got unknown options {sorted(unknown)}, expected a subset of {sorted(self.defaults)}",
                key="check_args",
            )
        self.context = AttributeDictionary(seed=0) if context is None else context
        self.options = AttributeDictionary({**self.defaults, **options})

    @property
    def name(self) -> str:
        return type(self).__name__

    @property
    def tolerance(self) -> float:
        return self.options.tolerance

    def setting(self, key: str):
        """
        An option of this check, falling back to the shared context
        """
        if self.options.get(key) is not None:
            return self.options[key]
        if self.context.get(key) is None:
            raise ConfigurationError(f"{self.name} needs '{key}' in its options or the shared context", key=key)
        return self.context[key]

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.context.get("seed", 0), offset])

    def result(self, value: float, detail=None, passed: bool = None) -> AttributeDictionary:
        """
        Packs an outcome. `passed` defaults to `value <= tolerance`.
        """
        value = float(value)
        if passed is None:
            passed = bool(np.isfinite(value) and value <= self.tolerance)
        if isinstance(detail, dict) or detail is None:
            detail = AttributeDictionary(detail or {})
        return AttributeDictionary(passed=bool(passed), value=value, tolerance=self.tolerance, detail=detail)

    def run(self) -> AttributeDictionary:
        raise NotImplementedError("You must implement the `run` method to apply this check")

    def __call__(self) -> AttributeDictionary:
        return self.run()


class CheckSuite:
    """
    Runs a list of checks and collects their outcomes.

    Args:
        checks (`list`):
            Check classes to instantiate
        context (`AttributeDictionary`, *optional*):
            Shared settings handed to every check
        check_args (`dict`, *optional*, defaults to `{}`):
            Per-check keyword arguments, structured as `{"CheckName": {"option": value}}`
    """

    def __init__(self, checks: list, context: AttributeDictionary = None, check_args: dict = None):
        check_args = {} if check_args is None else check_args
        self.checks = [check(context, **check_args.get(check.__name__, {})) for check in checks]

    def run(self) -> AttributeDictionary:
        results = AttributeDictionary()
        for check in self.checks:
            try:
                outcome = check()
            except Exception as e:
                msg = f"Error running check `{check.__module__}.{check.name}`:"
                msg = f"{msg} {e.args[0]}" if e.args else msg
                e.args = (msg,) + e.args[1:]
                raise
            level = logging.INFO if outcome.passed else logging.WARNING
            verdict = "pass" if outcome.passed else "FAIL"
            logger.log(level, f"{check.name}: {verdict} ({outcome.value:.3g} vs tolerance {outcome.tolerance:g})")
            results[check.name] = outcome
        return AttributeDictionary(checks=results, all_passed=all(r.passed for r in results.values()))
