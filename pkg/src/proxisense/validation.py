"""Model health checks: closed-form beam vs ODE oracle, capstan properties,
geometry identities, and decoupling inversion, run against a concrete
configuration. Shared by the CLI validate command and the test suite.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import equilibrium, geometry, simulator
from .beam import BeamLoads, bcm_deflection_arrays
from .friction import capstan_propagate
from .geometry import JointState
from .params import RobotParams
from .perception import decouple_contact_force
from .simulator import ode_shooting_deflection


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_wrap_identity(params, rng) -> CheckResult:
    worst = 0.0
    for _ in range(200):
        state = JointState.rest(params)
        state.theta = rng.uniform(-0.3, 0.3, params.joint_count)
        state.r = rng.uniform(-0.3, 0.3, params.joint_count)
        state.z = params.beam_length * (1.0 - rng.uniform(0.0, 0.02, params.joint_count))
        geom = geometry.cable_geometry(state, params)
        worst = max(worst, float(np.abs(geom.phi_a + geom.phi_b
                                        - state.theta[:, None]).max()))
    return CheckResult("wrap-angle identity phi_A + phi_B = theta", worst < 1e-12,
                       f"max deviation {worst:.2e} rad")


def _check_capstan(params, rng, count=10_000) -> CheckResult:
    u = params.friction_coeff if params.friction_coeff > 0 else 0.33
    worst = 0.0
    bad_order = 0
    for _ in range(count):
        n = rng.integers(1, 8)
        phis = rng.uniform(0.0, 0.6, n)
        signs = rng.choice([-u, 0.0, u], n)
        t_in = rng.uniform(0.1, 5.0)
        split = capstan_propagate(t_in, zip(phis, signs))
        merged = capstan_propagate(t_in, [(phis.sum() if np.all(signs == signs[0]) else 0.0,
                                           signs[0])]) if np.all(signs == signs[0]) else None
        if merged is not None:
            worst = max(worst, abs(split - merged) / max(merged, 1e-30))
        lo = capstan_propagate(t_in, zip(phis, np.full(n, -u)))
        hi = capstan_propagate(t_in, zip(phis, np.full(n, u)))
        if not lo <= split <= hi or not lo <= t_in <= hi:
            bad_order += 1
    ok = worst < 1e-12 and bad_order == 0
    return CheckResult("capstan telescoping and monotonic bracketing", ok,
                       f"max telescoping error {worst:.2e}, ordering violations {bad_order}")


def _check_zero_load(params) -> CheckResult:
    state = JointState.rest(params)
    res = equilibrium.solve_force_control(np.zeros(params.cable_count), None,
                                          state.friction_sign, params)
    straight = (float(np.abs(res.states.theta).max()) == 0.0
                and float(np.abs(res.states.r).max()) == 0.0)
    ok = straight and res.iterations == 1 and res.residual_norm < 1e-15
    return CheckResult("zero-load straight fixed point", ok,
                       f"iterations {res.iterations}, residual {res.residual_norm:.2e}")


def _check_orthonormality(params, rng) -> CheckResult:
    state = JointState.rest(params)
    state.theta = rng.uniform(-0.3, 0.3, params.joint_count)
    worst = 0.0
    for pose in geometry.chain_forward_kinematics(state, params):
        drift = np.abs(pose.rotation @ pose.rotation.T - np.eye(3)).max()
        det = abs(np.linalg.det(pose.rotation) - 1.0)
        worst = max(worst, float(drift), float(det))
    return CheckResult("forward-kinematics orthonormality", worst < 1e-9,
                       f"max drift {worst:.2e}")


def _beam_case(args):
    f_r, f_z, m_y, params = args
    e_gpa = params.austenite_modulus_gpa
    loads = BeamLoads(f_r=np.array([f_r]), f_z=np.array([f_z]),
                      m_y=np.array([m_y]), e_eff=np.array([e_gpa]))
    r_b, z_b, th_b, ok = bcm_deflection_arrays(loads.f_r, loads.f_z, loads.m_y,
                                               loads.e_eff, params)
    if not ok.all():
        return np.inf, np.inf
    r_o, z_o, th_o = ode_shooting_deflection(loads, params.beam_length, params)
    pos = float(np.hypot(r_b[0] - r_o, z_b[0] - z_o)) / params.beam_length
    ang = abs(float(th_b[0]) - th_o) / max(abs(th_o), 1e-6)
    return pos, ang


def operating_envelope_loads(params: RobotParams, tension_max=4.0, count=48):
    """Per-joint load combinations spanning the cable-driven duty range."""
    pr = params.pitch_radius
    cases = []
    tensions = np.linspace(0.25, tension_max, count // 3)
    for t in tensions:
        cases.append((0.0, t, t * pr))                  # single taut cable, straight-ish
        cases.append((0.15 * t, t, 0.6 * t * pr))       # bent joint, partial moment
        cases.append((-0.1 * t, 0.8 * t, -0.4 * t * pr))  # antagonist-dominated
    return cases


def _check_beam_envelope(params, threads) -> CheckResult:
    cases = [(f_r, f_z, m_y, params) for f_r, f_z, m_y in operating_envelope_loads(params)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_beam_case, cases))
    else:
        results = [_beam_case(c) for c in cases]
    pos = max(r[0] for r in results)
    ang = max(r[1] for r in results)
    ok = pos <= 0.01 and ang <= 0.01
    return CheckResult("closed-form beam vs ODE oracle over the duty range", ok,
                       f"max tip-position error {100 * pos:.3f}% of L_b, "
                       f"max tip-angle error {100 * ang:.3f}%")


def _check_decoupling(params) -> CheckResult:
    scene = simulator.static_contact_scene(params, 1.2,
                                           np.array([-0.15, 0.0, 0.02]), 10.0)
    err = float(np.abs(decouple_contact_force(scene.frame, params=params)
                       - scene.truth.force_n).max())
    return CheckResult("base-wrench decoupling inversion", err < 1e-12,
                       f"max force error {err:.2e} N")


def _check_mirror(params) -> CheckResult:
    signs = np.zeros((params.joint_count, params.cable_count))
    a = equilibrium.solve_force_control(np.array([1.8, 0.2]), None, signs, params)
    b = equilibrium.solve_force_control(np.array([0.2, 1.8]), None, signs, params)
    err = max(float(np.abs(a.states.theta + b.states.theta).max()),
              float(np.abs(a.states.r + b.states.r).max()),
              float(np.abs(a.states.z - b.states.z).max()))
    return CheckResult("mirror symmetry of the antagonistic pair", err < 1e-9,
                       f"max asymmetry {err:.2e}")


def run_validation(params: RobotParams, threads: int = 1, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        _check_wrap_identity(params, rng),
        _check_capstan(params, rng),
        _check_zero_load(params),
        _check_orthonormality(params, rng),
        _check_beam_envelope(params, threads),
        _check_decoupling(params),
        _check_mirror(params),
    ]
