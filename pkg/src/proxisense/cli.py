"""Command-line surface: simulate, estimate, shape, validate, bench.

Exit codes: 0 success, 2 parse/validation error, 3 infeasible scenario,
4 every frame failed estimation, 5 failed validation check.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import bench, geometry, traceio, validation
from .config import RobotConfig, default_config, load_config, load_scenario
from .errors import (ConfigError, InfeasibleScenarioError, ProxisenseError,
                     ScenarioError)
from .perception import ProximalEstimator
from .simulator import QuasiStaticPlant, run_scenario

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_ALL_FAILED = 4
EXIT_VALIDATION = 5


def _load_config_arg(path) -> RobotConfig:
    return load_config(path) if path else default_config()


def _add_common(parser):
    parser.add_argument("--config", help="robot config JSON (default: bundled planar robot)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario / run seed")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for the parallelizable stages")


def cmd_simulate(args) -> int:
    config = _load_config_arg(args.config)
    scenario = load_scenario(args.scenario, default_noise=config.noise)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    trace = run_scenario(scenario, config.params)
    traceio.write_trace(trace, args.out, ground_truth=not args.no_ground_truth)
    print(f"wrote {len(trace.frames)} frames to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    config = _load_config_arg(args.config)
    trace = traceio.read_trace(args.trace)
    estimator = ProximalEstimator(config.params, mode=args.mode)

    def run_pass():
        results = []
        for frame in trace.frames:
            try:
                results.append(estimator.process(frame))
            except ProxisenseError:
                results.append(None)
        return results

    estimates = run_pass()
    if args.recalibrate:
        # second pass with the friction-sign state settled by the first;
        # the recorded-trace stand-in for the physical reciprocation
        estimator.reset_tracking()
        estimates = run_pass()

    truth = trace.truth if trace.truth else None
    summary = traceio.write_estimates(
        estimates, args.out, truth=truth,
        timestamps=[f.timestamp for f in trace.frames])
    for key, value in summary.items():
        print(f"{key}={value}")
    if all(e is None for e in estimates):
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_shape(args) -> int:
    config = _load_config_arg(args.config)
    params = config.params
    trace = traceio.read_trace(args.trace)

    # contact-blind displacement-control pipeline; runs the same plant logic
    # as the simulator so noiseless ramp traces reproduce exactly
    plant = QuasiStaticPlant(params, noise=None)
    shapes = []
    for frame in trace.frames:
        plant.time = frame.timestamp
        plant.command(frame.set_lengths)
        shapes.append(geometry.chain_forward_kinematics(plant.state, params))

    truth = trace.truth if trace.truth else None
    summary = traceio.write_shape(shapes, args.out,
                                  timestamps=[f.timestamp for f in trace.frames],
                                  truth=truth)
    for key, value in summary.items():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load_config_arg(args.config)
    results = validation.run_validation(config.params, threads=args.threads,
                                        seed=args.seed or 0)
    failed = 0
    for check in results:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name}: {check.detail}")
        failed += 0 if check.passed else 1
    if failed:
        print(f"{failed} of {len(results)} checks failed")
        return EXIT_VALIDATION
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config_arg(args.config)
    stats = bench.run_benchmark(config.params, frames=args.frames,
                                seed=args.seed or 0)
    print(f"contact estimation: median {1e3 * stats['estimate_median_s']:.2f} ms "
          f"-> {stats['estimate_hz']:.1f} solves/s over {stats['estimate_solves']} frames")
    print(f"shape-only solve:   median {1e3 * stats['shape_median_s']:.2f} ms "
          f"-> {stats['shape_hz']:.1f} solves/s over {stats['shape_solves']} frames")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxisense",
        description="Shape, contact force, and contact location sensing for "
                    "cable-driven continuum robots from proximal measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a sensor trace from a scenario")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("out", help="output trace CSV")
    p.add_argument("--no-ground-truth", action="store_true",
                   help="omit the gt_* columns")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate contact force/location per frame")
    p.add_argument("trace", help="input trace CSV")
    p.add_argument("out", help="output estimates CSV")
    p.add_argument("--mode", choices=("auto", "tip", "body"), default="auto")
    p.add_argument("--recalibrate", action="store_true",
                   help="reprocess the trace with the settled friction-sign state")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("shape", help="displacement-control backbone shape per frame")
    p.add_argument("trace", help="input trace CSV")
    p.add_argument("out", help="output shape CSV")
    _add_common(p)
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("validate", help="run the model health checks")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="measure estimation/shape throughput")
    p.add_argument("--frames", type=int, default=80)
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleScenarioError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ProxisenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
