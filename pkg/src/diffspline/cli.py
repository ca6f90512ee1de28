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
import argparse
import logging
import sys

from .check import CheckSuite
from .config import RunConfig, load_check_config, load_geodesic_config, load_sequence_config, load_spline_config
from .dynamics import conservation_report, geodesic_shoot, lagrangian_velocity
from .errors import ConfigurationError, DiffSplineError
from .foundation import AttributeDictionary
from .solver import initial_velocity, interpolate_sequence, random_control, solve
from .storage import save_control, save_field, save_trajectory, write_json


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def cmd_geodesic(run: RunConfig) -> int:
    """
    Shoots a geodesic from the configured initial momentum and writes the
    trajectory, a conservation report and boundary fixtures (`fixture/phi1`,
    `fixture/v1`, `fixture/v0`, `fixture/xi0`) a spline problem can point at.
    """
    config = load_geodesic_config(run.config_path, seed=run.seed)
    out = run.prepare_output()
    trajectory = geodesic_shoot(config.m0, config.metric, config.steps, phi0=config.phi0, method=config.method)
    report = conservation_report(trajectory, tolerance=config.tolerance, method=config.method)
    report.problem = AttributeDictionary(
        dim=config.grid.dim, n=config.grid.n, s=config.metric.order, steps=config.steps, method=config.method
    )
    save_trajectory(trajectory, out / "trajectory", stride=config.stride)
    save_field(trajectory.phi(-1), out / "fixture" / "phi1")
    save_field(lagrangian_velocity(trajectory, -1, method=config.method), out / "fixture" / "v1")
    save_field(lagrangian_velocity(trajectory, 0, method=config.method), out / "fixture" / "v0")
    save_field(trajectory.velocity(0), out / "fixture" / "xi0")
    write_json(out / "conservation.json", report)
    logger.info(
        f"Geodesic: energy drift {report.energy_drift:.3g}, momentum error {report.momentum_error:.3g}, "
        f"all pass {report.all_pass}"
    )
    return EXIT_OK


def _initial_control(config, seed: int):
    if config.init == "random":
        return random_control(config.problem, seed, amplitude=config.init_amplitude)
    return None


def _write_solution(out, trajectory, control, report):
    write_json(out / "report.json", report)
    save_control(control, out / "control")
    save_trajectory(trajectory, out / "trajectory")
    status = "converged" if report.converged else report.status
    logger.info(f"Objective {report.objective:.6g}, {status} after {len(report.rounds)} penalty rounds")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_spline(run: RunConfig) -> int:
    """
    Solves a boundary-value spline problem. Exits 0 iff the report says converged.
    """
    config = load_spline_config(run.config_path, seed=run.seed)
    out = run.prepare_output()
    trajectory, control, report = solve(config.problem, init=_initial_control(config, run.seed))
    return _write_solution(out, trajectory, control, report)


def cmd_sequence(run: RunConfig) -> int:
    """
    Interpolates a time sequence of diffeomorphisms; additionally writes the
    recovered initial momentum and velocity.
    """
    config = load_sequence_config(run.config_path, seed=run.seed)
    out = run.prepare_output()
    trajectory, control, report = interpolate_sequence(
        config.knots, config.problem, init=_initial_control(config, run.seed)
    )
    save_field(trajectory.momentum(0), out / "initial_momentum")
    save_field(initial_velocity(trajectory), out / "initial_velocity")
    return _write_solution(out, trajectory, control, report)


def cmd_check(run: RunConfig) -> int:
    """
    Runs the invariant suite and writes `checks.json`. Exits 0 iff every check passes.
    """
    config = load_check_config(run.config_path, seed=run.seed)
    out = run.prepare_output()
    results = CheckSuite(config.checks, context=config.context, check_args=config.check_args).run()
    write_json(out / "checks.json", results)
    return EXIT_OK if results.all_passed else EXIT_NOT_CONVERGED


COMMANDS = {"geodesic": cmd_geodesic, "spline": cmd_spline, "sequence": cmd_sequence, "check": cmd_check}


class _Parser(argparse.ArgumentParser):
    """
    Reports usage errors on one line, like every other failure of the tool.
    """

    def error(self, message: str):
        _report_error(message, "usage-error")
        sys.exit(EXIT_CONFIG)


def get_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default=None,
        help="The path to the YAML or JSON problem document holding every numeric setting of the run.",
    )
    common.add_argument(
        "--out",
        type=str,
        default="results",
        help="The directory where reports and field files are written, created if missing.",
    )
    common.add_argument(
        "--seed", type=int, default=0, help="Seed for random initializations and generated fields."
    )
    common.add_argument("--verbose", action="store_true", help="Log per-iteration progress.")

    parser = _Parser(
        prog="diffspline", description="Geodesics and Riemannian splines on the diffeomorphism group of the torus."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("geodesic", parents=[common], help="Shoot a geodesic from an initial momentum.")
    subparsers.add_parser("spline", parents=[common], help="Solve a boundary-value spline problem.")
    subparsers.add_parser("sequence", parents=[common], help="Interpolate a time sequence of diffeomorphisms.")
    subparsers.add_parser("check", parents=[common], help="Run the invariant check suite.")
    return parser


def _report_error(e, reason: str):
    message = " ".join(str(e).split())
    print(f"diffspline: error: {reason}: {message}", file=sys.stderr)


def main(argv: list = None) -> int:
    args = get_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        run = RunConfig(args.command, args.config, args.out, args.verbose, args.seed)
        return COMMANDS[run.command](run)
    except ConfigurationError as e:
        _report_error(e, e.reason)
        return EXIT_CONFIG
    except DiffSplineError as e:
        _report_error(e, e.reason)
        return EXIT_NUMERICAL
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        _report_error(e, "internal-error")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
