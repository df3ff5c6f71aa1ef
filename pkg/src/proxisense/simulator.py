"""Forward ground-truth generator and independent oracles.

Synthesizes the proximal sensor channels (base wrench, input tensions, set
lengths) for scripted actuation and contact scenarios, evolves the cable
friction state sample to sample, injects seeded Gaussian sensor noise, and
provides the Bernoulli-Euler shooting solver used to validate the
closed-form beam model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import equilibrium, geometry
from .beam import BeamLoads
from .equilibrium import ContactSpec, EquilibriumResult
from .errors import (InfeasibleScenarioError, OracleFailure, ProxisenseError,
                     ScenarioError)
from .friction import friction_sign_update
from .geometry import JointState, SIDES
from .params import N_PER_GF, NoiseModel, RobotParams
from .perception import ProximalFrame, default_cable_directions


# ---------------------------------------------------------------------------
# scenario description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactEvent:
    """A point load acting during [start_s, end_s).

    ``location_mm`` is the contact arc length, or the string "tip".
    Exactly one of ``force_gf`` (global 3-vector, grams-force) and
    ``mass_gf`` (suspended weight, acting along -Z global) must be given.
    """

    start_s: float
    end_s: float
    location_mm: float | str
    force_gf: tuple | None = None
    mass_gf: float | None = None

    def __post_init__(self):
        if (self.force_gf is None) == (self.mass_gf is None):
            raise ScenarioError("contact event needs exactly one of force_gf / mass_gf")
        if self.mass_gf is not None and self.mass_gf < 0.0:
            raise ScenarioError("suspended mass must be >= 0")
        if self.end_s < self.start_s:
            raise ScenarioError("contact event must have end_s >= start_s")

    def force_n(self) -> np.ndarray:
        if self.mass_gf is not None:
            return np.array([0.0, 0.0, -self.mass_gf * N_PER_GF])
        return np.asarray(self.force_gf, dtype=float) * N_PER_GF

    def arc_length(self, params: RobotParams) -> float:
        if isinstance(self.location_mm, str):
            if self.location_mm != "tip":
                raise ScenarioError(f"unknown contact location {self.location_mm!r}")
            return params.backbone_length
        return float(self.location_mm)

    def active(self, t: float) -> bool:
        return self.start_s <= t < self.end_s


@dataclass(frozen=True)
class Scenario:
    """Scripted actuation and contact timeline for the forward simulator.

    ``actuation`` holds per-cable piecewise-linear knots [(t_s, length_mm)];
    with ``actuation_mode`` == "delta" the lengths are offsets from the rest
    cable length.
    """

    duration_s: float
    sample_rate_hz: float
    actuation: tuple
    contacts: tuple = ()
    noise: NoiseModel | None = None
    seed: int = 0
    actuation_mode: str = "delta"

    def __post_init__(self):
        if self.duration_s <= 0.0 or self.sample_rate_hz <= 0.0:
            raise ScenarioError("duration and sample rate must be positive")
        if self.actuation_mode not in ("delta", "absolute"):
            raise ScenarioError("actuation_mode must be 'delta' or 'absolute'")
        for knots in self.actuation:
            times = [k[0] for k in knots]
            if len(knots) < 1 or any(b < a for a, b in zip(times, times[1:])):
                raise ScenarioError("actuation knots must be time sorted and non-empty")
        for ev in self.contacts:
            if ev.end_s > self.duration_s + 1e-9:
                raise ScenarioError("contact event extends past the scenario duration")

    def sample_times(self) -> np.ndarray:
        count = int(round(self.duration_s * self.sample_rate_hz))
        return np.arange(count) / self.sample_rate_hz

    def set_lengths_at(self, t: float, params: RobotParams) -> np.ndarray:
        if len(self.actuation) != params.cable_count:
            raise ScenarioError(
                f"scenario drives {len(self.actuation)} cables, robot has {params.cable_count}")
        rest = params.backbone_length
        out = np.empty(params.cable_count)
        for a, knots in enumerate(self.actuation):
            ts = np.array([k[0] for k in knots])
            vs = np.array([k[1] for k in knots])
            val = float(np.interp(t, ts, vs))
            out[a] = rest + val if self.actuation_mode == "delta" else val
        return out

    def contacts_at(self, t: float, params: RobotParams) -> list[ContactSpec]:
        return [ContactSpec(force=ev.force_n(), s_c=ev.arc_length(params))
                for ev in self.contacts if ev.active(t)]


@dataclass
class GroundTruth:
    """True channel stored alongside each synthesized frame."""

    contact: bool
    force_n: np.ndarray
    s_c: float
    contact_point: np.ndarray
    tip: np.ndarray
    tensions: np.ndarray


@dataclass
class SensorTrace:
    frames: list[ProximalFrame] = field(default_factory=list)
    truth: list[GroundTruth] = field(default_factory=list)


# ---------------------------------------------------------------------------
# sensor synthesis
# ---------------------------------------------------------------------------

def synthesize_base_wrench(result: EquilibriumResult, contact,
                           params: RobotParams, cable_directions=None) -> np.ndarray:
    """What the base F/T sensor reads for a converged state.

    Force: input cable forces plus the contact force(s). Torque: cable base
    moments (attachment at +-d_c/2 on the x axis) plus P_c x F per contact.
    Inverts the force-decoupling relation identically.
    """
    dirs = (np.asarray(cable_directions, dtype=float) if cable_directions is not None
            else default_cable_directions(params))
    force = result.input_tensions @ dirs
    torque = np.zeros(3)
    for a in range(params.cable_count):
        attach = np.array([SIDES[a] * params.pitch_radius, 0.0, 0.0])
        torque += np.cross(attach, result.input_tensions[a] * dirs[a])
    for c in equilibrium.normalize_contacts(contact):
        pose = geometry.contact_pose(c.s_c, c.resolved_theta_c(), result.states, params)
        force = force + c.force
        torque = torque + np.cross(pose.position, c.force)
    return np.concatenate([force, torque])


class QuasiStaticPlant:
    """Interactive ground-truth robot for closed-loop maneuvers.

    Commands are absolute set lengths (or deltas from rest); each command
    settles a displacement-control equilibrium, evolves the friction state,
    and returns the noisy sensor frame.
    """

    def __init__(self, params: RobotParams, noise: NoiseModel | None = None,
                 seed: int = 0, cable_directions=None):
        self.params = params
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        self.dirs = (np.asarray(cable_directions, dtype=float)
                     if cable_directions is not None
                     else default_cable_directions(params))
        n, c = params.joint_count, params.cable_count
        self.signs = np.zeros((n, c))
        self.state: JointState | None = None
        self.tensions = np.zeros(c)
        self.contacts: list[ContactSpec] = []
        self.set_lengths = np.full(c, params.backbone_length)
        self.set_lengths_base = self.set_lengths.copy()
        self._seg_prev: np.ndarray | None = None
        self.time = 0.0
        self.time_step = 1.0
        self.result: EquilibriumResult | None = None

    def set_contacts(self, contacts) -> None:
        self.contacts = equilibrium.normalize_contacts(contacts)

    def command(self, set_lengths) -> ProximalFrame:
        """Settle at the commanded absolute set lengths and return the frame."""
        self.set_lengths = np.asarray(set_lengths, dtype=float).copy()
        trial = self.signs
        # friction signs depend on the new segment lengths: iterate to a
        # consistent sign state, keeping the last one on a flip-flop
        for _ in range(3):
            res = equilibrium.solve_displacement_control(
                self.set_lengths, self.contacts, trial, self.params,
                init=self.state, tension_init=self.tensions)
            used = trial
            seg = geometry.cable_geometry(res.states, self.params).length
            if self._seg_prev is None:
                break
            new_signs = friction_sign_update(self.signs, seg, self._seg_prev,
                                             res.input_tensions, self.params)
            if np.array_equal(new_signs, used):
                break
            trial = new_signs
        self.signs = used
        self.state = res.states
        self.tensions = res.input_tensions
        self.result = res
        self._seg_prev = geometry.cable_geometry(res.states, self.params).length
        frame = self._frame(res)
        self.time += self.time_step
        return frame

    def command_delta(self, delta) -> ProximalFrame:
        rest = np.full(self.params.cable_count, self.params.backbone_length)
        return self.command(rest + np.asarray(delta, dtype=float))

    def command_offset(self, offset) -> ProximalFrame:
        """Offset relative to the current command; reciprocation callback."""
        return self.command(self.set_lengths_base + np.asarray(offset, dtype=float))

    def hold_reference(self) -> None:
        """Pin the current command as the offset reference."""
        self.set_lengths_base = self.set_lengths.copy()

    def _frame(self, res: EquilibriumResult) -> ProximalFrame:
        wrench = synthesize_base_wrench(res, self.contacts, self.params, self.dirs)
        tensions = res.input_tensions.copy()
        if self.noise is not None:
            wrench = wrench + np.concatenate([
                self.rng.normal(0.0, self.noise.force_n, 3),
                self.rng.normal(0.0, self.noise.torque_nmm, 3)])
            tensions = tensions + self.rng.normal(0.0, self.noise.tension_n,
                                                  self.params.cable_count)
        return ProximalFrame(timestamp=self.time, wrench=wrench,
                             tensions=tensions, set_lengths=self.set_lengths.copy())

    def truth(self) -> GroundTruth:
        res = self.result
        force = np.zeros(3)
        for c in self.contacts:
            force = force + c.force
        single = len(self.contacts) == 1
        point = np.full(3, np.nan)
        s_c = float("nan")
        if single:
            c = self.contacts[0]
            s_c = c.s_c
            point = geometry.contact_pose(c.s_c, c.resolved_theta_c(),
                                          res.states, self.params).position
        tip = geometry.chain_forward_kinematics(res.states, self.params)[-1].position
        return GroundTruth(contact=bool(self.contacts), force_n=force, s_c=s_c,
                           contact_point=point, tip=tip,
                           tensions=res.input_tensions.copy())


def run_scenario(scenario: Scenario, params: RobotParams) -> SensorTrace:
    """Synthesize the full sensor trace for a scripted scenario."""
    plant = QuasiStaticPlant(params, noise=scenario.noise, seed=scenario.seed)
    times = scenario.sample_times()
    if times.size:
        plant.time_step = times[1] - times[0] if times.size > 1 else 1.0 / scenario.sample_rate_hz
    trace = SensorTrace()
    for k, t in enumerate(times):
        plant.time = float(t)
        plant.set_contacts(scenario.contacts_at(float(t), params))
        try:
            frame = plant.command(scenario.set_lengths_at(float(t), params))
        except ProxisenseError as exc:
            raise InfeasibleScenarioError(f"sample {k} (t = {t:.6g} s): {exc}") from exc
        trace.frames.append(frame)
        trace.truth.append(plant.truth())
    return trace


@dataclass
class StaticScene:
    """One settled contact configuration with its true channel and signs."""

    frame: ProximalFrame
    truth: GroundTruth
    signs: np.ndarray
    states: JointState


def antagonist_payout(pull_mm: float) -> float:
    """Slack-side payout for a drive-cable pull of ``pull_mm``.

    Bending lengthens the antagonist path slightly more than it shortens
    the pulled cable (second-order curvature asymmetry), so an exactly
    symmetric command over-constrains the pair; pay out with margin.
    """
    return 1.25 * pull_mm + 0.1


def static_contact_scene(params: RobotParams, pull_mm: float, force_n,
                         s_c: float, *, noise: NoiseModel | None = None,
                         seed: int = 0, ramp_steps: int = 6) -> StaticScene:
    """Ramp to a bent pose, engage one contact, settle, and return the frame.

    Cable 1 is shortened by ``pull_mm`` while cable 2 pays out with slack
    margin; the contact force (N, global) is applied at arc length ``s_c``
    after the motion stops, as in the passive-contact protocol.
    """
    plant = QuasiStaticPlant(params, noise=noise, seed=seed)
    for k in range(1, ramp_steps + 1):
        d = pull_mm * k / ramp_steps
        plant.command_delta(np.array([-d, antagonist_payout(d)]))
    hold = np.array([-pull_mm, antagonist_payout(pull_mm)])
    plant.set_contacts(ContactSpec(force=np.asarray(force_n, dtype=float), s_c=s_c))
    plant.command_delta(hold)
    frame = plant.command_delta(hold)
    return StaticScene(frame=frame, truth=plant.truth(),
                       signs=plant.signs.copy(), states=plant.state.copy())


# ---------------------------------------------------------------------------
# independent beam oracle
# ---------------------------------------------------------------------------

def _integrate_beam(omega0: float, f_r: float, f_z: float, ei: float,
                    length: float, rtol: float):
    def rhs(_s, y):
        theta = y[0]
        return (y[1], (f_z * np.sin(theta) - f_r * np.cos(theta)) / ei,
                np.sin(theta), np.cos(theta))

    sol = solve_ivp(rhs, (0.0, length), (0.0, omega0, 0.0, 0.0),
                    method="DOP853", rtol=rtol, atol=1e-12)
    if not sol.success:
        raise OracleFailure(f"beam ODE integration failed: {sol.message}")
    theta, omega, x, z = sol.y[:, -1]
    return theta, omega, x, z


def ode_shooting_deflection(loads: BeamLoads, length: float, params: RobotParams,
                            rtol: float = 1e-9):
    """Tip deflection from the Bernoulli-Euler rod: E I theta'' =
    F_z sin(theta) - F_r cos(theta), theta(0) = 0, theta'(L) = M / (E I).

    Shoots on theta'(0) with a bracketed root find; the independent
    reference for the closed-form flexure model.
    """
    f_r = float(np.atleast_1d(loads.f_r)[0])
    f_z = float(np.atleast_1d(loads.f_z)[0])
    m_y = float(np.atleast_1d(loads.m_y)[0])
    e_gpa = float(np.atleast_1d(loads.e_eff)[0])
    ei = 1e3 * e_gpa * params.second_moment
    target = m_y / ei

    def mismatch(omega0):
        return _integrate_beam(omega0, f_r, f_z, ei, length, rtol)[1] - target

    guess = (m_y + f_r * length) / ei
    width = max(0.5 * abs(guess), 0.05 / length)
    lo, hi = guess - width, guess + width
    g_lo, g_hi = mismatch(lo), mismatch(hi)
    for _ in range(60):
        if g_lo == 0.0:
            hi = lo
            break
        if g_lo * g_hi < 0.0:
            break
        width *= 2.0
        lo, hi = guess - width, guess + width
        g_lo, g_hi = mismatch(lo), mismatch(hi)
    else:
        raise OracleFailure("shooting bracket for theta'(0) did not close")

    omega0 = lo if hi == lo else brentq(mismatch, lo, hi, xtol=1e-13, rtol=1e-14)
    theta, _, x, z = _integrate_beam(omega0, f_r, f_z, ei, length, rtol)
    return x, z, theta
