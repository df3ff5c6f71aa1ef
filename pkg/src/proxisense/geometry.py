"""Cable-path geometry and forward kinematics of the notched joint chain.

Joint-local frame: z along the undeformed beam axis, x in the bending plane,
y out of plane; joint rotations are about y. Cable 1 runs on the +x side,
cable 2 on the -x side, both at the pitch radius d_c/2. All lengths mm,
angles rad.

Per joint, the cable leaves the guide at A = (side * d_c/2, 0), spans the
flexure to the attachment B on the tip disc, and deflects by phi_A at A and
phi_B at B with the identity phi_A + phi_B = theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import RobotParams

# cable side signs: cable 1 on +x, cable 2 on -x
SIDES = np.array([1.0, -1.0])


@dataclass
class JointState:
    """Per-beam deformation triple plus per-cable friction-sign state.

    ``r``/``z`` are the flexure tip displacements in the joint-local frame,
    ``theta`` the tip rotation. ``friction_sign`` holds the mobilized
    quasi-static friction value in [-u, +u] per joint and cable.
    """

    r: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    friction_sign: np.ndarray

    @classmethod
    def rest(cls, params: RobotParams) -> "JointState":
        n, c = params.joint_count, params.cable_count
        return cls(
            r=np.zeros(n),
            z=np.full(n, params.beam_length),
            theta=np.zeros(n),
            friction_sign=np.zeros((n, c)),
        )

    def copy(self) -> "JointState":
        return JointState(self.r.copy(), self.z.copy(), self.theta.copy(),
                          self.friction_sign.copy())

    def validate(self, params: RobotParams) -> None:
        n = params.joint_count
        for name in ("r", "z", "theta"):
            arr = getattr(self, name)
            if arr.shape != (n,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"JointState.{name} must be a finite ({n},) array")
        if np.any(self.z <= 0.0) or np.any(self.z > params.beam_length * 1.001):
            raise ValueError("JointState.z must lie in (0, beam_length]")
        if self.friction_sign.shape != (n, params.cable_count):
            raise ValueError("JointState.friction_sign has the wrong shape")
        if np.any(np.abs(self.friction_sign) > params.friction_coeff + 1e-12):
            raise ValueError("friction signs must lie in [-u, +u]")


@dataclass(frozen=True)
class Pose:
    """Rigid-body pose in the global frame: 3x3 rotation and position (mm)."""

    rotation: np.ndarray
    position: np.ndarray


@dataclass
class CableGeometry:
    """Cable-path quantities per joint (axis 0) and cable (axis 1)."""

    attach_r: np.ndarray   # B point x-coordinate, joint-local (mm)
    attach_z: np.ndarray   # B point z-coordinate, joint-local (mm)
    length: np.ndarray     # free-segment length |A -> B| (mm)
    phi_a: np.ndarray      # deflection at the guide exit A (rad)
    phi_b: np.ndarray      # deflection at the attachment B (rad)


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def cable_attach_point(r, z, theta, side, params: RobotParams) -> np.ndarray:
    """Position [r_B, z_B] of the cable attachment on the tip disc.

    ``side`` is +1 for cable 1, -1 for cable 2. The disc offset d_c/2 is
    rotated with the tip: r_B = r + side*(d_c/2)*cos(theta),
    z_B = z - side*(d_c/2)*sin(theta).
    """
    pr = params.pitch_radius
    return np.array([r + side * pr * np.cos(theta),
                     z - side * pr * np.sin(theta)])


def cable_wrap_angles(attach, theta, params: RobotParams, side=1.0):
    """Cable deflection angles (phi_A, phi_B) at the guide and the disc.

    phi_A = atan((r_B - side*d_c/2) / z_B); phi_B = theta - phi_A, so the
    identity phi_A + phi_B = theta holds exactly. Requires z_B > 0.
    """
    r_b, z_b = float(attach[0]), float(attach[1])
    if z_b <= 0.0:
        raise ValueError("degenerate cable geometry: attachment z must be positive")
    phi_a = np.arctan2(r_b - side * params.pitch_radius, z_b)
    return phi_a, theta - phi_a


def _cable_arrays(r, z, theta, pitch_radius):
    """Vectorized cable-path geometry for state arrays of shape (..., N).

    Returns (r_B, z_B, length, phi_a, phi_b, sin_a, cos_a), each (..., N, C).
    """
    ct = np.cos(theta)[..., None]
    st = np.sin(theta)[..., None]
    off = SIDES * pitch_radius
    r_b = r[..., None] + off * ct
    z_b = z[..., None] - off * st
    da = r_b - off
    length = np.hypot(da, z_b)
    phi_a = np.arctan2(da, z_b)
    phi_b = theta[..., None] - phi_a
    return r_b, z_b, length, phi_a, phi_b, da / length, z_b / length


def cable_geometry(state: JointState, params: RobotParams) -> CableGeometry:
    """Cable-path geometry for every joint and cable of a chain state."""
    r_b, z_b, length, phi_a, phi_b, _, _ = _cable_arrays(
        state.r, state.z, state.theta, params.pitch_radius)
    return CableGeometry(attach_r=r_b, attach_z=z_b, length=length,
                         phi_a=phi_a, phi_b=phi_b)


def chain_positions(r, z, theta, params: RobotParams):
    """Beam-tip positions and orientations along the chain, vectorized.

    Accepts state arrays of shape (..., N). Returns (x, z, psi, psi_base)
    where psi is the cumulative bending angle after each joint and psi_base
    the orientation of each beam's root frame.
    """
    psi = np.cumsum(theta, axis=-1)
    base = psi - theta
    sb, cb = np.sin(base), np.cos(base)
    lc = params.channel_length
    dx = lc * sb + r * cb + z * sb
    dz = lc * cb - r * sb + z * cb
    return np.cumsum(dx, axis=-1), np.cumsum(dz, axis=-1), psi, base


def chain_forward_kinematics(state: JointState, params: RobotParams) -> list[Pose]:
    """Pose of every beam tip in the global frame.

    Composes Trz(L_c) * Tr(r, 0, z) * Ry(theta) per joint. Rotations are
    built from the cumulative angle, so orthonormality is exact at any
    chain depth.
    """
    x, z, psi, _ = chain_positions(state.r, state.z, state.theta, params)
    return [Pose(rotation=rot_y(psi[i]), position=np.array([x[i], 0.0, z[i]]))
            for i in range(params.joint_count)]


def locate_contact_joint(s_c, params: RobotParams):
    """Containing joint index and back-offset from that joint's tip frame.

    The offset is s_c minus the cumulative arc length through the containing
    joint, hence <= 0; the contact frame is reached by translating backward
    along the joint-tip tangent.
    """
    s = np.asarray(s_c, dtype=float)
    total = params.backbone_length
    if np.any(s < -1e-9) or np.any(s > total + 1e-9):
        raise ValueError(f"contact arc length outside the backbone [0, {total}] mm")
    pitch = params.joint_pitch
    ends = pitch * np.arange(1, params.joint_count + 1)
    idx = np.minimum(np.searchsorted(ends, s, side="left"), params.joint_count - 1)
    return idx, s - ends[idx]


def loaded_joint_mask(s_c, params: RobotParams):
    """Boolean mask of beams that carry the contact load.

    A beam is loaded when its flexure starts proximal to the contact point;
    joints distal to the contact carry nothing.
    """
    s = np.asarray(s_c, dtype=float)
    flex_start = params.joint_pitch * np.arange(params.joint_count) + params.channel_length
    return s[..., None] > flex_start


def contact_pose(s_c: float, theta_c: float, state: JointState,
                 params: RobotParams) -> Pose:
    """Contact frame at arc length s_c, rotated by theta_c about the tangent plane.

    T_c = T_m * Trz(back) * Ry(theta_c) * Ry(pi/2) * Trz(d_c/2) with m the
    containing joint. The radial offset places the point on the contactor
    ring at the cable pitch radius.
    """
    idx, back = locate_contact_joint(float(s_c), params)
    idx = int(idx)
    x, z, psi, _ = chain_positions(state.r, state.z, state.theta, params)
    psi_m = psi[idx]
    pr = params.pitch_radius
    # local offset of the contact point relative to the joint tip frame
    ox = np.cos(theta_c) * pr
    oz = float(back) - np.sin(theta_c) * pr
    cx = x[idx] + np.sin(psi_m) * oz + np.cos(psi_m) * ox
    cz = z[idx] + np.cos(psi_m) * oz - np.sin(psi_m) * ox
    rotation = rot_y(psi_m + theta_c + 0.5 * np.pi)
    return Pose(rotation=rotation, position=np.array([cx, 0.0, cz]))


def total_cable_length(state: JointState, geometry: CableGeometry, tensions,
                       params: RobotParams) -> np.ndarray:
    """Model cable length per cable: free segments + channels + elastic stretch."""
    path = geometry.length.sum(axis=0) + params.joint_count * params.channel_length
    return path + params.cable_elongation(tensions)
