"""Inverse pipeline: decouple the contact force from proximal measurements,
locate the contact along the backbone, classify the contact mode, and run
the reciprocating friction recalibration.

The location search evaluates a force-control equilibrium for every
candidate arc length (one batched solve), scores the squared set-length
mismatch of the taut cables, and refines the best cell with a bounded
Brent minimization.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import equilibrium, geometry
from .equilibrium import ContactSpec, EquilibriumResult
from .errors import EstimationFailedError, ProxisenseError, RecalibrationAborted
from .friction import friction_sign_update
from .geometry import JointState, Pose
from .params import N_PER_GF, RobotParams, n_to_gf

# contact detection threshold: 3 x the configured decoupled-force noise scale
DETECTION_SIGMA_GF = 1.0
REFINE_TOL_MM = 1e-3
FLAT_TOL_MM = 1e-3
RESIDUAL_FLOOR_MM = 1e-3


@dataclass(frozen=True)
class ProximalFrame:
    """One sample of every proximal measurement channel."""

    timestamp: float
    wrench: np.ndarray        # fx, fy, fz (N), tx, ty, tz (N*mm), global frame
    tensions: np.ndarray      # input cable tensions (N)
    set_lengths: np.ndarray   # commanded cable lengths (mm)

    def __post_init__(self):
        object.__setattr__(self, "wrench", np.asarray(self.wrench, dtype=float))
        object.__setattr__(self, "tensions", np.asarray(self.tensions, dtype=float))
        object.__setattr__(self, "set_lengths", np.asarray(self.set_lengths, dtype=float))


@dataclass
class ContactEstimate:
    """Estimated contact force, location, and robot shape for one frame."""

    force_n: np.ndarray            # decoupled contact force (N, global)
    force_gf: np.ndarray           # same force in grams-force
    s_c: float                     # contact arc length (mm); nan when undetected
    contact_point: np.ndarray      # contact point (mm, global); nan when undetected
    theta_c: float
    residual_mm: float             # sqrt of the set-length mismatch sum
    mode: str                      # none | active | passive | tip
    shape: list[Pose] = field(default_factory=list)
    detected: bool = False
    converged: bool = True
    low_confidence: bool = False
    multi_contact_suspected: bool = False
    iterations: int = 0
    solve_time_s: float = 0.0
    states: JointState | None = None


def default_cable_directions(params: RobotParams) -> np.ndarray:
    """Cable force directions at the base: the straight proximal axis (+Z)."""
    dirs = np.zeros((params.cable_count, 3))
    dirs[:, 2] = 1.0
    return dirs


def decouple_contact_force(frame: ProximalFrame, cable_directions=None,
                           params: RobotParams | None = None) -> np.ndarray:
    """Contact force = measured base force minus the input cable forces.

    Negative tension readings (sensor noise around a slack cable) are
    clamped to zero before subtraction.
    """
    if cable_directions is None:
        if params is None:
            cable_directions = np.array([[0.0, 0.0, 1.0]] * len(frame.tensions))
        else:
            cable_directions = default_cable_directions(params)
    tensions = np.maximum(frame.tensions, 0.0)
    return frame.wrench[:3] - tensions @ np.asarray(cable_directions, dtype=float)


def _model_lengths(r, z, th, tensions, params: RobotParams) -> np.ndarray:
    """Cable lengths (..., C) from batched state arrays plus elastic stretch."""
    seg = geometry._cable_arrays(r, z, th, params.pitch_radius)[2]
    path = seg.sum(axis=-2) + params.joint_count * params.channel_length
    return path + params.cable_elongation(tensions)


def _length_cost(model_lengths, set_lengths, taut) -> np.ndarray:
    dl = (set_lengths - model_lengths) * taut
    return (dl * dl).sum(axis=-1)


class _WarmState:
    """Warm-start carrier shared across frames of one estimation stream."""

    def __init__(self):
        self.single: JointState | None = None
        self.grid: tuple | None = None      # (s_values, r, z, th)
        self.tensions: np.ndarray | None = None


def _scan_grid(params: RobotParams, grid_step):
    step = grid_step if grid_step is not None else params.beam_length / 4.0
    s_lo = params.channel_length      # joint-1 channel carries no flexure signal
    s_hi = params.backbone_length
    count = int(np.ceil((s_hi - s_lo) / step)) + 1
    return np.linspace(s_lo, s_hi, count)


def estimate_contact(frame: ProximalFrame, friction_signs, params: RobotParams,
                     prior: ContactEstimate | None = None, *,
                     cable_directions=None,
                     detection_threshold_n=3.0 * DETECTION_SIGMA_GF * N_PER_GF,
                     grid_step=None, refine_tol=REFINE_TOL_MM,
                     flat_tol_mm=FLAT_TOL_MM, residual_floor_mm=RESIDUAL_FLOOR_MM,
                     mode: str | None = None, warm: _WarmState | None = None,
                     theta_tol=equilibrium.THETA_TOL,
                     max_iter=equilibrium.MAX_ITER,
                     damping=equilibrium.DAMPING) -> ContactEstimate:
    """Single-frame contact force, location, and shape estimate.

    Below the detection threshold the frame is treated as contact free and
    only the displacement-control shape is returned.
    """
    t0 = time.perf_counter()
    warm = warm if warm is not None else _WarmState()
    signs = np.asarray(friction_signs, dtype=float)
    force = decouple_contact_force(frame, cable_directions, params)
    tensions = np.maximum(frame.tensions, 0.0)

    if np.linalg.norm(force) < detection_threshold_n:
        return _no_contact_estimate(frame, force, signs, params, warm,
                                    theta_tol, max_iter, damping, t0)

    theta_c = float(np.arctan2(force[1], force[0]))
    s_values = _scan_grid(params, grid_step)
    batch = s_values.size
    taut = (tensions > 0.0).astype(float)

    if warm.grid is not None and warm.grid[0].shape == s_values.shape:
        init = warm.grid[1:]
    elif warm.single is not None:
        init = tuple(np.tile(a[None, :], (batch, 1))
                     for a in (warm.single.r, warm.single.z, warm.single.theta))
    else:
        init = None

    term = (np.tile(force, (batch, 1)), s_values, np.full(batch, theta_c))
    out = equilibrium._batch_solve(
        np.tile(tensions, (batch, 1)), [term], np.tile(signs, (batch, 1, 1)),
        params, init=init, theta_tol=theta_tol, max_iter=max_iter,
        damping=damping)

    usable = out["converged"] & out["bcm_ok"]
    if not usable.any():
        raise EstimationFailedError("no contact-location candidate converged")
    lengths = _model_lengths(out["r"], out["z"], out["theta"], tensions, params)
    cost = _length_cost(lengths, frame.set_lengths, taut)
    cost = np.where(usable, cost, np.inf)
    warm.grid = (s_values, out["r"], out["z"], out["theta"])

    best = int(np.argmin(cost))
    lo = s_values[max(best - 1, 0)]
    hi = s_values[min(best + 1, batch - 1)]

    holder = {"result": None, "s": None}
    best_state = JointState(out["r"][best].copy(), out["z"][best].copy(),
                            out["theta"][best].copy(), signs.copy())
    contact_of = lambda s: ContactSpec(force=force, s_c=float(s), theta_c=theta_c)

    def cost_at(s):
        init_state = holder["result"].states if holder["result"] is not None else best_state
        try:
            res = equilibrium.solve_force_control(
                tensions, contact_of(s), signs, params, init=init_state,
                theta_tol=theta_tol, max_iter=max_iter, damping=damping)
        except ProxisenseError:
            return 1e9 * (1.0 + abs(s - s_values[best]))
        holder["result"] = res
        holder["s"] = float(s)
        dl = (frame.set_lengths - res.cable_path_lengths) * taut
        return float(dl @ dl)

    opt = minimize_scalar(cost_at, bounds=(lo, hi), method="bounded",
                          options={"xatol": refine_tol, "maxiter": 60})
    s_star = float(opt.x)
    if holder["s"] != s_star or holder["result"] is None:
        final_cost = cost_at(s_star)
    else:
        final_cost = float(opt.fun)
    if holder["result"] is None:
        raise EstimationFailedError("contact-location refinement failed to converge")
    result = holder["result"]
    warm.single = result.states

    grid_span = (np.sqrt(np.min(cost[usable])), np.sqrt(np.max(cost[usable])))
    residual = float(np.sqrt(final_cost))
    pose_c = geometry.contact_pose(s_star, theta_c, result.states, params)
    estimate = ContactEstimate(
        force_n=force, force_gf=n_to_gf(force), s_c=s_star,
        contact_point=pose_c.position, theta_c=theta_c, residual_mm=residual,
        mode=mode or "passive",
        shape=geometry.chain_forward_kinematics(result.states, params),
        detected=True, converged=result.converged,
        low_confidence=bool(grid_span[1] - grid_span[0] < flat_tol_mm),
        multi_contact_suspected=bool(residual > 10.0 * residual_floor_mm),
        iterations=result.iterations,
        solve_time_s=time.perf_counter() - t0,
        states=result.states,
    )
    return estimate


def _no_contact_estimate(frame, force, signs, params, warm,
                         theta_tol, max_iter, damping, t0) -> ContactEstimate:
    res = equilibrium.solve_displacement_control(
        frame.set_lengths, None, signs, params, init=warm.single,
        tension_init=warm.tensions, theta_tol=theta_tol, max_iter=max_iter,
        damping=damping)
    warm.single = res.states
    warm.tensions = res.input_tensions
    residual = float(np.linalg.norm(
        equilibrium.cable_length_residual(res, frame.set_lengths)))
    return ContactEstimate(
        force_n=force, force_gf=n_to_gf(force), s_c=float("nan"),
        contact_point=np.full(3, np.nan), theta_c=0.0, residual_mm=residual,
        mode="none", shape=geometry.chain_forward_kinematics(res.states, params),
        detected=False, converged=res.converged, iterations=res.iterations,
        solve_time_s=time.perf_counter() - t0, states=res.states)


def estimate_tip_force(frame: ProximalFrame, params: RobotParams,
                       friction_signs=None, *, cable_directions=None,
                       detection_threshold_n=3.0 * DETECTION_SIGMA_GF * N_PER_GF,
                       warm: _WarmState | None = None,
                       theta_tol=equilibrium.THETA_TOL,
                       max_iter=equilibrium.MAX_ITER,
                       damping=equilibrium.DAMPING) -> ContactEstimate:
    """Contact estimate with the location pinned to the backbone tip.

    Skips the arc-length scan; the shape is solved under displacement
    control with the decoupled tip load applied.
    """
    t0 = time.perf_counter()
    warm = warm if warm is not None else _WarmState()
    signs = (np.asarray(friction_signs, dtype=float) if friction_signs is not None
             else np.zeros((params.joint_count, params.cable_count)))
    force = decouple_contact_force(frame, cable_directions, params)
    if np.linalg.norm(force) < detection_threshold_n:
        return _no_contact_estimate(frame, force, signs, params, warm,
                                    theta_tol, max_iter, damping, t0)

    theta_c = float(np.arctan2(force[1], force[0]))
    s_tip = params.backbone_length
    contact = ContactSpec(force=force, s_c=s_tip, theta_c=theta_c)
    res = equilibrium.solve_displacement_control(
        frame.set_lengths, contact, signs, params, init=warm.single,
        tension_init=warm.tensions, theta_tol=theta_tol, max_iter=max_iter,
        damping=damping)
    warm.single = res.states
    warm.tensions = res.input_tensions
    residual = float(np.linalg.norm(
        equilibrium.cable_length_residual(res, frame.set_lengths)))
    pose_c = geometry.contact_pose(s_tip, theta_c, res.states, params)
    return ContactEstimate(
        force_n=force, force_gf=n_to_gf(force), s_c=s_tip,
        contact_point=pose_c.position, theta_c=theta_c, residual_mm=residual,
        mode="tip", shape=geometry.chain_forward_kinematics(res.states, params),
        detected=True, converged=res.converged, iterations=res.iterations,
        solve_time_s=time.perf_counter() - t0, states=res.states)


def classify_contact_mode(history, detection: bool, *,
                          cable_directions=None, params: RobotParams | None = None,
                          detection_threshold_n=3.0 * DETECTION_SIGMA_GF * N_PER_GF,
                          motion_tol_mm=1e-6) -> str:
    """Active vs passive contact from the force onset and actuation activity.

    Active: the decoupled-force onset coincides with a commanded set-length
    change (the robot moved into the obstacle). Passive: onset while the
    set lengths were constant.
    """
    if not detection:
        return "none"
    frames = list(history)
    if len(frames) < 2:
        raise ValueError("classification needs at least two frames of history")
    mags = [np.linalg.norm(decouple_contact_force(f, cable_directions, params))
            for f in frames]
    onset = len(frames) - 1
    while onset > 0 and mags[onset - 1] >= detection_threshold_n:
        onset -= 1
    ref = max(onset, 1)
    moving = np.any(np.abs(frames[ref].set_lengths
                           - frames[ref - 1].set_lengths) > motion_tol_mm)
    return "active" if moving else "passive"


class ProximalEstimator:
    """Stateful per-frame driver: friction-sign tracking, warm starts,
    classification history, and mode dispatch.

    ``mode`` is "auto" (scan for the contact location, classify
    active/passive), "tip" (location pinned to the tip), or "body"
    (scan, classification still applied).
    """

    def __init__(self, params: RobotParams, *, mode: str = "auto",
                 cable_directions=None, detection_sigma_gf: float = DETECTION_SIGMA_GF,
                 grid_step: float | None = None, refine_tol: float = REFINE_TOL_MM,
                 flat_tol_mm: float = FLAT_TOL_MM,
                 residual_floor_mm: float = RESIDUAL_FLOOR_MM,
                 initial_signs=None, history_len: int = 64,
                 theta_tol: float = equilibrium.THETA_TOL,
                 max_iter: int = equilibrium.MAX_ITER,
                 damping: float = equilibrium.DAMPING):
        if mode not in ("auto", "tip", "body"):
            raise ValueError("mode must be auto, tip, or body")
        self.params = params
        self.mode = mode
        self.cable_directions = (np.asarray(cable_directions, dtype=float)
                                 if cable_directions is not None
                                 else default_cable_directions(params))
        self.detection_threshold_n = 3.0 * detection_sigma_gf * N_PER_GF
        self.grid_step = grid_step
        self.refine_tol = refine_tol
        self.flat_tol_mm = flat_tol_mm
        self.residual_floor_mm = residual_floor_mm
        self.solver_opts = dict(theta_tol=theta_tol, max_iter=max_iter, damping=damping)
        n, c = params.joint_count, params.cable_count
        self.signs = (np.array(initial_signs, dtype=float) if initial_signs is not None
                      else np.zeros((n, c)))
        self.warm = _WarmState()
        self.history: deque[ProximalFrame] = deque(maxlen=history_len)
        self.last_estimate: ContactEstimate | None = None
        self._lengths_prev: np.ndarray | None = None

    def reset_signs(self, signs) -> None:
        self.signs = np.array(signs, dtype=float)

    def reset_tracking(self) -> None:
        """Clear warm starts, history, and length tracking; keep the signs."""
        self.warm = _WarmState()
        self.history.clear()
        self.last_estimate = None
        self._lengths_prev = None

    # -- sign tracking -------------------------------------------------------

    def _update_signs(self, states: JointState, tensions) -> bool:
        lengths = geometry.cable_geometry(states, self.params).length
        changed = False
        if self._lengths_prev is not None:
            new = friction_sign_update(self.signs, lengths, self._lengths_prev,
                                       np.maximum(tensions, 0.0), self.params)
            changed = not np.array_equal(new, self.signs)
            self.signs = new
        self._lengths_prev = lengths
        return changed

    # -- frame processing ------------------------------------------------------

    def _estimate_once(self, frame: ProximalFrame, mode_hint: str | None) -> ContactEstimate:
        if self.mode == "tip":
            return estimate_tip_force(
                frame, self.params, self.signs,
                cable_directions=self.cable_directions,
                detection_threshold_n=self.detection_threshold_n,
                warm=self.warm, **self.solver_opts)
        return estimate_contact(
            frame, self.signs, self.params, prior=self.last_estimate,
            cable_directions=self.cable_directions,
            detection_threshold_n=self.detection_threshold_n,
            grid_step=self.grid_step, refine_tol=self.refine_tol,
            flat_tol_mm=self.flat_tol_mm,
            residual_floor_mm=self.residual_floor_mm,
            mode=mode_hint, warm=self.warm, **self.solver_opts)

    def process(self, frame: ProximalFrame) -> ContactEstimate:
        """Full estimate for one frame; updates signs and warm starts."""
        t0 = time.perf_counter()
        self.history.append(frame)
        mode_hint = None
        force = decouple_contact_force(frame, self.cable_directions)
        if (np.linalg.norm(force) >= self.detection_threshold_n
                and len(self.history) >= 2 and self.mode != "tip"):
            mode_hint = classify_contact_mode(
                self.history, True, cable_directions=self.cable_directions,
                detection_threshold_n=self.detection_threshold_n)

        estimate = self._estimate_once(frame, mode_hint)
        lengths_before = self._lengths_prev
        if estimate.states is not None and self._update_signs(estimate.states, frame.tensions):
            # friction state flipped: redo the solve once with the settled signs
            self._lengths_prev = lengths_before
            estimate = self._estimate_once(frame, mode_hint)
            if estimate.states is not None:
                self._update_signs(estimate.states, frame.tensions)
        estimate.solve_time_s = time.perf_counter() - t0
        self.last_estimate = estimate
        return estimate

    def observe(self, frame: ProximalFrame) -> np.ndarray:
        """Cheap tracking update (signs, warm starts) without a location scan.

        Uses the last known contact belief for the shape solve; intended for
        intermediate samples of a commanded maneuver.
        """
        self.history.append(frame)
        force = decouple_contact_force(frame, self.cable_directions)
        contact = None
        if (self.last_estimate is not None and self.last_estimate.detected
                and np.isfinite(self.last_estimate.s_c)
                and np.linalg.norm(force) >= self.detection_threshold_n):
            contact = ContactSpec(force=force, s_c=self.last_estimate.s_c)
        res = equilibrium.solve_displacement_control(
            frame.set_lengths, contact, self.signs, self.params,
            init=self.warm.single, tension_init=self.warm.tensions,
            **self.solver_opts)
        self.warm.single = res.states
        self.warm.tensions = res.input_tensions
        self._update_signs(res.states, frame.tensions)
        return force


def reciprocation_recalibrate(controller, estimator: ProximalEstimator,
                              amplitude_mm: float = 0.3, cycles: int = 2, *,
                              substeps: int = 4,
                              max_load_drift_n: float = 5.0 * N_PER_GF) -> ContactEstimate:
    """Drive a short reciprocating motion to reset the friction state, then
    re-estimate the contact at the settled configuration.

    ``controller`` receives a set-length offset (mm, per cable) relative to
    the pre-maneuver command and must return the settled ProximalFrame.
    Aborts when the decoupled force drifts during the maneuver, meaning the
    external load changed mid-move.
    """
    if estimator.last_estimate is None or not estimator.last_estimate.detected:
        raise ValueError("recalibration needs a detected contact estimate")
    c = estimator.params.cable_count
    # wiggle the drive cable only; a symmetric antagonist command
    # over-constrains the cable lengths at the micrometer scale
    pattern = np.zeros(c)
    pattern[0] = 1.0

    force_ref = estimator.last_estimate.force_n
    offsets = []
    for _ in range(max(cycles, 0)):
        for leg_target in (amplitude_mm, 0.0, -amplitude_mm, 0.0):
            start = offsets[-1] if offsets else 0.0
            for k in range(1, substeps + 1):
                offsets.append(start + (leg_target - start) * k / substeps)
    final_frame = None
    for off in offsets:
        frame = controller(off * pattern)
        force = estimator.observe(frame)
        if np.linalg.norm(force - force_ref) > max_load_drift_n:
            raise RecalibrationAborted(
                "external load drifted during the reciprocation maneuver")
        final_frame = frame
    if final_frame is None:
        final_frame = controller(np.zeros(c))
    return estimator.process(final_frame)
