"""Coupled load-deformation equilibrium of the joint chain.

Force control: propagate the input tensions joint to joint through the
capstan relation, assemble per-beam tip loads (cables plus an optional
single-point contact), update every flexure through the constraint model,
and iterate the damped fixed point until the tip angles settle.

Displacement control: an outer root find on the input tensions so that the
model cable lengths reproduce the commanded set lengths, with cables that
would need to push released as slack.

The fixed-point kernel is batched: independent load cases (for example the
candidate grid of a contact-location scan) are iterated together as one
array problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .beam import BeamLoads, bcm_deflection_arrays, effective_modulus
from .errors import BucklingError, ConvergenceError, InfeasibleDisplacementError
from .friction import chain_tension_exponents
from .geometry import JointState, Pose, SIDES
from .params import RobotParams

THETA_TOL = 1e-6          # rad, fixed-point convergence on tip angles
MAX_ITER = 200
DAMPING = 0.5
LENGTH_TOL = 1e-4         # mm, displacement-control root tolerance
TENSION_MAX = 50.0        # N, admissible input-tension bracket
_DAMPING_MIN = 1.0 / 64.0


@dataclass(frozen=True)
class ContactSpec:
    """Hypothesized or known single-point contact load.

    ``force`` is the global-frame contact force (N); ``s_c`` the arc length
    of the application point from the proximal end (mm); ``theta_c`` the
    contact-frame rotation, derived from the force components when omitted.
    """

    force: np.ndarray
    s_c: float
    theta_c: float | None = None
    present: bool = True

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float))

    @staticmethod
    def none() -> "ContactSpec":
        return ContactSpec(force=np.zeros(3), s_c=0.0, theta_c=0.0, present=False)

    def resolved_theta_c(self) -> float:
        if self.theta_c is not None:
            return float(self.theta_c)
        return float(np.arctan2(self.force[1], self.force[0]))


@dataclass
class EquilibriumResult:
    """Converged chain state plus the cable quantities derived from it."""

    states: JointState
    tensions_at_b: np.ndarray      # free-segment tension per joint/cable (N)
    input_tensions: np.ndarray     # proximal tension per cable (N)
    cable_path_lengths: np.ndarray  # model cable length per cable (mm)
    iterations: int
    converged: bool
    residual_norm: float           # rad, fixed-point mismatch on tip angles


def _batch_solve(f_in, contacts, signs, params: RobotParams, init=None,
                 theta_tol=THETA_TOL, max_iter=MAX_ITER, damping=DAMPING):
    """Damped fixed-point iteration over a batch of independent load cases.

    f_in (B, C); signs (B, N, C); ``contacts`` is a list of point-load
    terms, each a tuple (force (B, 3), s_c (B,), theta_c (B,) or None).
    Returns a dict of arrays; rows that hit the compressive singularity are
    flagged in ``bcm_ok`` and frozen rather than raising.
    """
    f_in = np.asarray(f_in, dtype=float)
    nb = params.joint_count
    batch = f_in.shape[0]
    lb, pr = params.beam_length, params.pitch_radius

    if init is None:
        r = np.zeros((batch, nb))
        z = np.full((batch, nb), lb)
        th = np.zeros((batch, nb))
    else:
        r, z, th = (np.array(a, dtype=float) for a in init)

    # per-contact bookkeeping is static across iterations
    terms = []
    for force, s_c, theta_c in contacts:
        force = np.asarray(force, dtype=float)
        s_c = np.asarray(s_c, dtype=float)
        m_idx, back = geometry.locate_contact_joint(s_c, params)
        loaded = geometry.loaded_joint_mask(s_c, params).astype(float)
        if theta_c is None:
            theta_c = np.arctan2(force[:, 1], force[:, 0])
        else:
            theta_c = np.broadcast_to(np.asarray(theta_c, dtype=float), (batch,))
        terms.append((force[:, 0], force[:, 2], m_idx[:, None], loaded,
                      np.cos(theta_c) * pr, back - np.sin(theta_c) * pr))

    lam = np.full(batch, damping)
    res_prev = np.full(batch, np.inf)
    iters = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    alive_ok = np.ones(batch, dtype=bool)

    tensions = np.zeros((batch, nb, f_in.shape[1]))
    residual = np.full(batch, np.inf)

    for it in range(1, max_iter + 1):
        x, zg, psi, base = geometry.chain_positions(r, z, th, params)
        sb, cb = np.sin(base), np.cos(base)

        _, _, _, phi_a, phi_b, sin_a, cos_a = geometry._cable_arrays(r, z, th, pr)
        expo = chain_tension_exponents(phi_a, phi_b, signs)
        tensions = f_in[:, None, :] * np.exp(expo)

        st, ct = np.sin(th), np.cos(th)
        cos_phi_b = ct[:, :, None] * cos_a + st[:, :, None] * sin_a
        f_r_tip = (tensions * sin_a).sum(axis=2)
        f_z_tip = (tensions * cos_a).sum(axis=2)
        m_y_tip = (SIDES * pr * tensions * cos_phi_b).sum(axis=2)

        for f_x, f_z, take, loaded, off_x, off_z in terms:
            psi_m = np.take_along_axis(psi, take, axis=1)[:, 0]
            x_m = np.take_along_axis(x, take, axis=1)[:, 0]
            z_m = np.take_along_axis(zg, take, axis=1)[:, 0]
            spm, cpm = np.sin(psi_m), np.cos(psi_m)
            pc_x = x_m + spm * off_z + cpm * off_x
            pc_z = z_m + cpm * off_z - spm * off_x
            # contact force in each beam root frame; M_y is Ry-invariant
            f_r_tip = f_r_tip + loaded * (cb * f_x[:, None] - sb * f_z[:, None])
            f_z_tip = f_z_tip + loaded * (sb * f_x[:, None] + cb * f_z[:, None])
            m_y_tip = m_y_tip + loaded * ((pc_z[:, None] - zg) * f_x[:, None]
                                          - (pc_x[:, None] - x) * f_z[:, None])

        e_eff = effective_modulus(th, params)
        r_new, z_new, th_new, ok = bcm_deflection_arrays(f_r_tip, f_z_tip,
                                                         m_y_tip, e_eff, params)
        row_ok = ok.all(axis=1)
        newly_dead = alive_ok & ~row_ok
        iters[newly_dead] = it
        alive_ok &= row_ok

        res = np.abs(th_new - th).max(axis=1)
        res = np.where(alive_ok, res, np.inf)
        residual = np.where(alive_ok, res, residual)

        newly = alive_ok & ~converged & (res < theta_tol)
        iters[newly] = it
        converged |= newly

        active = alive_ok & ~converged
        if not active.any():
            break

        # adaptive damping: halve on residual growth, relax back slowly
        grew = active & (res > res_prev)
        lam = np.where(grew, np.maximum(0.5 * lam, _DAMPING_MIN),
                       np.minimum(1.15 * lam, damping))
        res_prev = np.where(active, res, res_prev)

        step = (lam * active)[:, None]
        r += step * (r_new - r)
        z += step * (z_new - z)
        th += step * (th_new - th)
    else:
        iters[~converged] = max_iter

    return {
        "r": r, "z": z, "theta": th,
        "tensions": tensions,
        "iterations": iters,
        "converged": converged,
        "residual": residual,
        "bcm_ok": alive_ok,
    }


def _result_from_batch(out, row, f_in, signs, params) -> EquilibriumResult:
    state = JointState(r=out["r"][row].copy(), z=out["z"][row].copy(),
                       theta=out["theta"][row].copy(),
                       friction_sign=np.array(signs, dtype=float))
    geom = geometry.cable_geometry(state, params)
    lengths = geometry.total_cable_length(state, geom, f_in, params)
    return EquilibriumResult(
        states=state,
        tensions_at_b=out["tensions"][row].copy(),
        input_tensions=np.asarray(f_in, dtype=float).copy(),
        cable_path_lengths=lengths,
        iterations=int(out["iterations"][row]),
        converged=bool(out["converged"][row]),
        residual_norm=float(out["residual"][row]),
    )


def normalize_contacts(contact) -> list[ContactSpec]:
    """Accept None, one ContactSpec, or a sequence; keep present ones."""
    if contact is None:
        return []
    if isinstance(contact, ContactSpec):
        contact = [contact]
    return [c for c in contact if c.present]


def solve_force_control(input_tensions, contact, friction_signs,
                        params: RobotParams, init: JointState | None = None,
                        theta_tol=THETA_TOL, max_iter=MAX_ITER,
                        damping=DAMPING) -> EquilibriumResult:
    """Chain equilibrium under prescribed input tensions and contact load(s)."""
    f_in = np.asarray(input_tensions, dtype=float)
    if np.any(f_in < 0.0):
        raise ValueError("input tensions must be >= 0")
    signs = np.asarray(friction_signs, dtype=float)
    terms = [(c.force[None, :], np.array([c.s_c], dtype=float),
              np.array([c.resolved_theta_c()]))
             for c in normalize_contacts(contact)]

    init_arrays = None
    if init is not None:
        init_arrays = (init.r[None, :], init.z[None, :], init.theta[None, :])
    out = _batch_solve(f_in[None, :], terms, signs[None, :, :], params,
                       init=init_arrays, theta_tol=theta_tol,
                       max_iter=max_iter, damping=damping)
    if not out["bcm_ok"][0]:
        raise BucklingError("equilibrium hit the buckling-critical axial load")
    if not out["converged"][0]:
        raise ConvergenceError(
            f"force-control fixed point did not settle within {max_iter} iterations",
            residual=float(out["residual"][0]), iterations=max_iter)
    return _result_from_batch(out, 0, f_in, signs, params)


def beam_tip_loads(state: JointState, tensions_at_b, contact: ContactSpec | None,
                   poses: list[Pose], params: RobotParams) -> BeamLoads:
    """Per-beam tip loads from given free-segment tensions and contact.

    Cable terms: F_r = sum_a T_a sin(phi_A), F_z = sum_a T_a cos(phi_A),
    M_y = sum_a [(B -> tip) x T_a]_y. Contact terms are rotated into each
    beam root frame with the moment (P_c - P_i) x F taken about the beam
    tip; joints distal to the contact receive nothing.
    """
    tension = np.asarray(tensions_at_b, dtype=float)
    r_b, z_b, seg_len, phi_a, phi_b, sin_a, cos_a = geometry._cable_arrays(
        state.r, state.z, state.theta, params.pitch_radius)
    f_r = (tension * sin_a).sum(axis=1)
    f_z = (tension * cos_a).sum(axis=1)
    cos_phi_b = (np.cos(state.theta)[:, None] * cos_a
                 + np.sin(state.theta)[:, None] * sin_a)
    m_y = (SIDES * params.pitch_radius * tension * cos_phi_b).sum(axis=1)

    if contact is not None and contact.present:
        force = contact.force
        pose_c = geometry.contact_pose(contact.s_c, contact.resolved_theta_c(),
                                       state, params)
        loaded = geometry.loaded_joint_mask(np.array(contact.s_c), params)
        base_angle = np.cumsum(state.theta) - state.theta
        cb, sb = np.cos(base_angle), np.sin(base_angle)
        tips = np.array([p.position for p in poses])
        arm = pose_c.position[None, :] - tips
        f_r = f_r + loaded * (cb * force[0] - sb * force[2])
        f_z = f_z + loaded * (sb * force[0] + cb * force[2])
        m_y = m_y + loaded * (arm[:, 2] * force[0] - arm[:, 0] * force[2])

    return BeamLoads(f_r=f_r, f_z=f_z, m_y=m_y,
                     e_eff=effective_modulus(state.theta, params))


def cable_length_residual(result: EquilibriumResult, set_lengths,
                          slack_tol=1e-12) -> np.ndarray:
    """Set-length mismatch per cable; slack cables contribute zero."""
    dl = np.asarray(set_lengths, dtype=float) - result.cable_path_lengths
    return np.where(result.input_tensions <= slack_tol, 0.0, dl)


class _LengthObjective:
    """Cable lengths as a function of input tensions, with warm starts."""

    def __init__(self, set_lengths, contact, signs, params, init, solver_opts):
        self.set_lengths = np.asarray(set_lengths, dtype=float)
        self.contact = contact
        self.signs = signs
        self.params = params
        self.warm = init
        self.opts = solver_opts
        self.evals = 0
        self.last = None

    def residuals(self, f_in) -> np.ndarray:
        """g = L_set - L_model; increases with the cable's own tension."""
        f = np.maximum(f_in, 0.0)
        try:
            res = solve_force_control(f, self.contact, self.signs, self.params,
                                      init=self.warm, **self.opts)
        except (BucklingError, ConvergenceError):
            # a stale warm start can trap the fixed point; retry cold, damped
            opts = {**self.opts, "damping": 0.5 * self.opts.get("damping", DAMPING)}
            res = solve_force_control(f, self.contact, self.signs, self.params,
                                      init=None, **opts)
        self.warm = res.states
        self.last = res
        self.evals += 1
        return self.set_lengths - res.cable_path_lengths


def _root_with_slack(fn, x0, length_tol, tension_max, label):
    """Safeguarded secant for one monotone-increasing length residual.

    Solves fn(x) = 0 for x in [0, tension_max] under the cable
    complementarity: if fn(0) >= -length_tol the cable is slack and 0 is
    returned. Probes at which the equilibrium itself fails (far past the
    root, where the chain leaves the beam model's range) are treated as
    unusable and bisected back toward the last good point. ``fn`` must
    leave its own side effects consistent with the last evaluated x.
    """
    x0 = max(float(x0), 0.0)
    g0 = fn(x0)
    if abs(g0) <= length_tol:
        return x0
    if g0 > 0.0:
        # too much commanded length at this tension: try slack before rooting
        if x0 == 0.0:
            return 0.0
        gz = fn(0.0)
        if gz >= -length_tol:
            return 0.0
        lo, g_lo = 0.0, gz
        hi, g_hi = x0, g0
    else:
        lo, g_lo = x0, g0
        hi, g_hi = None, None
        x1 = x0 + max(0.2, 0.25 * x0)
        bad = 0
        while hi is None:
            if x1 > tension_max:
                raise InfeasibleDisplacementError(
                    f"{label}: no tension in [0, {tension_max} N] reproduces the set length")
            try:
                g1 = fn(x1)
            except (BucklingError, ConvergenceError):
                bad += 1
                if bad > 8 or x1 - lo < 1e-9:
                    raise InfeasibleDisplacementError(
                        f"{label}: equilibrium failed while bracketing the tension root")
                x1 = 0.5 * (lo + x1)
                continue
            if abs(g1) <= length_tol:
                return x1
            if g1 > 0.0:
                hi, g_hi = x1, g1
            else:
                # secant extrapolation toward the root, with growth margin
                gap = x1 - lo
                slope = (g1 - g_lo) / gap if gap > 0.0 else 0.0
                step = -g1 / slope * 1.25 if slope > 1e-12 else max(gap, 0.2)
                lo, g_lo = x1, g1
                x1 = x1 + min(max(step, 0.05), 4.0 * gap + 1.0)
    # secant within the bracket, bisection fallback
    for _ in range(60):
        denom = g_hi - g_lo
        x = hi - g_hi * (hi - lo) / denom if denom != 0.0 else 0.5 * (lo + hi)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        try:
            g = fn(x)
        except (BucklingError, ConvergenceError):
            hi = 0.5 * (x + hi)     # unusable interior point: shrink from above
            if hi - lo < 1e-9:
                raise InfeasibleDisplacementError(
                    f"{label}: equilibrium failed inside the tension bracket")
            continue
        if abs(g) <= length_tol:
            return x
        if g > 0.0:
            hi, g_hi = x, g
        else:
            lo, g_lo = x, g
        if hi - lo < 1e-12:
            return x
    raise InfeasibleDisplacementError(f"{label}: length root did not reach {length_tol} mm")


def _secant_single(obj: _LengthObjective, f_in, cable, length_tol, tension_max):
    """Safeguarded secant on one cable's tension, the others held.

    Every return path of the root find coincides with its last residual
    evaluation, so ``f_in`` and ``obj.last`` stay consistent.
    """

    def residual_at(x):
        f_in[cable] = x
        return obj.residuals(f_in)[cable]

    return _root_with_slack(residual_at, f_in[cable], length_tol, tension_max,
                            f"cable {cable + 1}")


def _secant_pair(obj: _LengthObjective, f_in, pair, length_tol, tension_max):
    """Nested safeguarded secants for two taut cables.

    The antagonistic pair is too strongly coupled for plain alternation
    (the geometric length sensitivities nearly cancel), so the outer
    cable's residual is evaluated with the inner cable re-solved each time,
    which leaves a monotone well-conditioned 1-D problem.
    """
    inner, outer = pair
    inner_tol = 0.25 * length_tol

    def outer_residual(x):
        f_in[outer] = x
        _secant_single(obj, f_in, inner, inner_tol, tension_max)
        return obj.set_lengths[outer] - obj.last.cable_path_lengths[outer]

    _root_with_slack(outer_residual, f_in[outer], length_tol, tension_max,
                     f"cable {outer + 1}")


def solve_displacement_control(set_lengths, contact, friction_signs,
                               params: RobotParams,
                               init: JointState | None = None, tension_init=None,
                               length_tol=LENGTH_TOL, tension_max=TENSION_MAX,
                               theta_tol=THETA_TOL, max_iter=MAX_ITER,
                               damping=DAMPING) -> EquilibriumResult:
    """Chain equilibrium under commanded cable lengths.

    Finds non-negative input tensions whose force-control solution
    reproduces the set lengths within ``length_tol``; a cable that would
    need to push is released as slack and its constraint dropped.
    """
    set_lengths = np.asarray(set_lengths, dtype=float)
    signs = np.asarray(friction_signs, dtype=float)
    n_cables = params.cable_count
    if set_lengths.shape != (n_cables,):
        raise ValueError(f"set_lengths must have shape ({n_cables},)")

    opts = dict(theta_tol=theta_tol, max_iter=max_iter, damping=damping)
    obj = _LengthObjective(set_lengths, contact, signs, params, init, opts)
    f_in = np.zeros(n_cables) if tension_init is None else np.array(tension_init, dtype=float)
    f_in = np.clip(f_in, 0.0, tension_max)

    for _ in range(6):
        g = obj.residuals(f_in)
        taut = [a for a in range(n_cables) if f_in[a] > 0.0 or g[a] < -length_tol]
        if len(taut) == 0:
            break
        if len(taut) == 1:
            _secant_single(obj, f_in, taut[0], length_tol, tension_max)
        else:
            _secant_pair(obj, f_in, taut, length_tol, tension_max)
        g = obj.residuals(f_in)
        ok_taut = all(abs(g[a]) <= length_tol for a in range(n_cables) if f_in[a] > 0.0)
        ok_slack = all(g[a] >= -length_tol for a in range(n_cables) if f_in[a] == 0.0)
        if ok_taut and ok_slack:
            break
    else:
        raise InfeasibleDisplacementError(
            "displacement control did not reach a consistent taut/slack state")

    return obj.last
