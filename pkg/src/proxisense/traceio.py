"""CSV serialization of sensor traces, estimates, and backbone shapes.

Floats are written in shortest round-trip form (Python repr), so
write-read-write cycles are byte identical and file hashes are stable
under a fixed seed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .params import n_to_gf
from .perception import ContactEstimate, ProximalFrame
from .simulator import GroundTruth, SensorTrace

TRACE_COLUMNS = ["t_s", "fx_N", "fy_N", "fz_N", "tx_Nmm", "ty_Nmm", "tz_Nmm",
                 "tension_1_N", "tension_2_N", "setlen_1_mm", "setlen_2_mm"]
GT_COLUMNS = ["gt_contact", "gt_fx_N", "gt_fy_N", "gt_fz_N", "gt_sc_mm",
              "gt_cx_mm", "gt_cy_mm", "gt_cz_mm",
              "gt_tipx_mm", "gt_tipy_mm", "gt_tipz_mm",
              "gt_tension_1_N", "gt_tension_2_N"]

EST_COLUMNS = ["t_s", "detected", "mode", "fx_gf", "fy_gf", "fz_gf", "sc_mm",
               "cx_mm", "cy_mm", "cz_mm", "theta_c_rad", "residual_mm",
               "converged", "low_confidence", "multi_contact", "solve_time_s"]
EST_ERR_COLUMNS = ["err_fx_gf", "err_fy_gf", "err_fz_gf", "err_sc_mm"]

SHAPE_COLUMNS = ["t_s", "joint", "x_mm", "y_mm", "z_mm", "theta_rad"]


def _fmt(value) -> str:
    return repr(float(value))


def write_trace(trace: SensorTrace, path, ground_truth: bool = True) -> None:
    include_gt = ground_truth and trace.truth
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS + (GT_COLUMNS if include_gt else []))
        for k, frame in enumerate(trace.frames):
            row = ([_fmt(frame.timestamp)] + [_fmt(v) for v in frame.wrench]
                   + [_fmt(v) for v in frame.tensions]
                   + [_fmt(v) for v in frame.set_lengths])
            if include_gt:
                gt = trace.truth[k]
                row += ([str(int(gt.contact))] + [_fmt(v) for v in gt.force_n]
                        + [_fmt(gt.s_c)] + [_fmt(v) for v in gt.contact_point]
                        + [_fmt(v) for v in gt.tip] + [_fmt(v) for v in gt.tensions])
            writer.writerow(row)


def read_trace(path) -> SensorTrace:
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise ConfigError(f"{path}: empty trace file")
    header = rows[0]
    if header[:len(TRACE_COLUMNS)] != TRACE_COLUMNS:
        raise ConfigError(f"{path}: unexpected trace header {header[:len(TRACE_COLUMNS)]}")
    has_gt = header[len(TRACE_COLUMNS):] == GT_COLUMNS
    if not has_gt and len(header) != len(TRACE_COLUMNS):
        raise ConfigError(f"{path}: unexpected trailing columns {header[len(TRACE_COLUMNS):]}")

    trace = SensorTrace()
    expected = len(TRACE_COLUMNS) + (len(GT_COLUMNS) if has_gt else 0)
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != expected:
            raise ConfigError(f"{path}: line {ln}: expected {expected} columns, got {len(row)}")
        try:
            vals = [float(v) for v in row[:11]]
            trace.frames.append(ProximalFrame(
                timestamp=vals[0], wrench=np.array(vals[1:7]),
                tensions=np.array(vals[7:9]), set_lengths=np.array(vals[9:11])))
            if has_gt:
                g = row[11:]
                trace.truth.append(GroundTruth(
                    contact=bool(int(g[0])), force_n=np.array([float(v) for v in g[1:4]]),
                    s_c=float(g[4]), contact_point=np.array([float(v) for v in g[5:8]]),
                    tip=np.array([float(v) for v in g[8:11]]),
                    tensions=np.array([float(v) for v in g[11:13]])))
        except ValueError as exc:
            raise ConfigError(f"{path}: line {ln}: {exc}") from exc
    return trace


def write_estimates(estimates: list[ContactEstimate | None], path,
                    truth: list[GroundTruth] | None = None,
                    timestamps=None) -> dict:
    """Per-frame estimate rows plus a '# key=value' summary footer.

    ``None`` entries mark frames whose estimation failed. Returns the
    summary dict (also written to the footer).
    """
    has_gt = truth is not None and len(truth) == len(estimates)
    columns = EST_COLUMNS + (EST_ERR_COLUMNS if has_gt else [])
    err_force, err_sc, times = [], [], []
    failed = 0
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for k, est in enumerate(estimates):
            t = timestamps[k] if timestamps is not None else k
            if est is None:
                failed += 1
                row = [_fmt(t), "0", "failed"] + ["nan"] * (len(columns) - 3)
                writer.writerow(row)
                continue
            row = ([_fmt(t), str(int(est.detected)), est.mode]
                   + [_fmt(v) for v in est.force_gf]
                   + [_fmt(est.s_c)] + [_fmt(v) for v in est.contact_point]
                   + [_fmt(est.theta_c), _fmt(est.residual_mm),
                      str(int(est.converged)), str(int(est.low_confidence)),
                      str(int(est.multi_contact_suspected)), _fmt(est.solve_time_s)])
            times.append(est.solve_time_s)
            if has_gt:
                gt = truth[k]
                dforce = est.force_gf - n_to_gf(gt.force_n)
                dsc = (est.s_c - gt.s_c) if gt.contact and np.isfinite(est.s_c) else float("nan")
                row += [_fmt(v) for v in dforce] + [_fmt(dsc)]
                if gt.contact and est.detected:
                    err_force.append(np.abs(dforce))
                    if np.isfinite(dsc):
                        err_sc.append(abs(dsc))
            writer.writerow(row)

        summary = {"frames": len(estimates), "failed": failed}
        if times:
            summary["median_solve_time_s"] = float(np.median(times))
        if has_gt and err_force:
            errs = np.array(err_force)
            summary["mean_abs_force_error_gf"] = float(errs.mean())
            summary["max_abs_force_error_gf"] = float(errs.max())
        if has_gt and err_sc:
            summary["mean_sc_error_mm"] = float(np.mean(err_sc))
            summary["max_sc_error_mm"] = float(np.max(err_sc))
        for key, value in summary.items():
            handle.write(f"# {key}={value}\n")
    return summary


def write_shape(shapes, path, timestamps=None,
                truth: list[GroundTruth] | None = None) -> dict:
    """Backbone pose rows (one per frame and joint) for external plotting."""
    tip_err = []
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SHAPE_COLUMNS)
        for k, poses in enumerate(shapes):
            t = timestamps[k] if timestamps is not None else k
            for j, pose in enumerate(poses):
                theta = float(np.arctan2(pose.rotation[0, 2], pose.rotation[2, 2]))
                writer.writerow([_fmt(t), str(j + 1)]
                                + [_fmt(v) for v in pose.position] + [_fmt(theta)])
            if truth is not None and k < len(truth):
                tip_err.append(float(np.linalg.norm(poses[-1].position - truth[k].tip)))
        summary = {"frames": len(shapes)}
        if tip_err:
            summary["mean_tip_error_mm"] = float(np.mean(tip_err))
            summary["max_tip_error_mm"] = float(np.max(tip_err))
        for key, value in summary.items():
            handle.write(f"# {key}={value}\n")
    return summary
