"""Throughput benchmark for the estimation and shape pipelines.

Builds a warm-started ramp-and-hold trace with a mid-body contact and
measures the median per-frame solve time of the full contact estimator
and of the shape-only displacement solve.
"""

from __future__ import annotations

import time

import numpy as np

from . import equilibrium
from .params import NoiseModel, RobotParams
from .perception import ProximalEstimator
from .simulator import ContactEvent, Scenario, antagonist_payout, run_scenario


def benchmark_scenario(params: RobotParams, frames: int, seed: int,
                       noise: NoiseModel | None) -> Scenario:
    pull = 1.8
    duration = float(frames)
    ramp_end = 0.45 * duration
    payout = antagonist_payout(pull)
    return Scenario(
        duration_s=duration, sample_rate_hz=1.0, seed=seed, noise=noise,
        actuation=(
            ((0.0, 0.0), (ramp_end, -pull), (duration, -pull)),
            ((0.0, 0.0), (ramp_end, payout), (duration, payout)),
        ),
        contacts=(ContactEvent(start_s=0.55 * duration, end_s=duration,
                               location_mm=0.6 * params.backbone_length,
                               force_gf=(-20.0, 0.0, 0.0)),))


def run_benchmark(params: RobotParams, *, frames: int = 80, seed: int = 0,
                  noise: NoiseModel | None = None, warmup: int = 4) -> dict:
    """Median solve rates (Hz) for contact estimation and shape-only solves."""
    trace = run_scenario(benchmark_scenario(params, frames, seed, noise), params)

    estimator = ProximalEstimator(params)
    est_times = []
    for k, frame in enumerate(trace.frames):
        est = estimator.process(frame)
        if k >= warmup and est.detected:
            est_times.append(est.solve_time_s)

    signs = np.zeros((params.joint_count, params.cable_count))
    state = None
    tensions = None
    shape_times = []
    for k, frame in enumerate(trace.frames):
        t0 = time.perf_counter()
        res = equilibrium.solve_displacement_control(
            frame.set_lengths, None, signs, params, init=state,
            tension_init=tensions)
        dt = time.perf_counter() - t0
        state, tensions = res.states, res.input_tensions
        if k >= warmup:
            shape_times.append(dt)

    est_median = float(np.median(est_times)) if est_times else float("nan")
    shape_median = float(np.median(shape_times)) if shape_times else float("nan")
    return {
        "frames": len(trace.frames),
        "estimate_solves": len(est_times),
        "estimate_median_s": est_median,
        "estimate_hz": 1.0 / est_median if est_median > 0 else float("nan"),
        "shape_solves": len(shape_times),
        "shape_median_s": shape_median,
        "shape_hz": 1.0 / shape_median if shape_median > 0 else float("nan"),
    }
