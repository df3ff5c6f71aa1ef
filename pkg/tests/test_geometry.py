import numpy as np
import pytest

from proxisense import (JointState, cable_attach_point, cable_geometry,
                        cable_wrap_angles, chain_forward_kinematics,
                        contact_pose, total_cable_length)
from proxisense.geometry import locate_contact_joint, rot_y


def random_state(params, rng, scale=0.25):
    state = JointState.rest(params)
    state.theta = rng.uniform(-scale, scale, params.joint_count)
    state.r = 0.5 * params.beam_length * np.sin(state.theta) * rng.uniform(0.8, 1.0)
    state.z = params.beam_length * (1.0 - 0.2 * state.theta**2)
    return state


def homogeneous_chain(state, params):
    """Independent forward kinematics: explicit 4x4 transform products."""

    def trz(d):
        t = np.eye(4)
        t[2, 3] = d
        return t

    def tr(x, y, z):
        t = np.eye(4)
        t[:3, 3] = (x, y, z)
        return t

    def ry(a):
        t = np.eye(4)
        t[:3, :3] = rot_y(a)
        return t

    t = np.eye(4)
    poses = []
    for i in range(params.joint_count):
        t = t @ trz(params.channel_length) @ tr(state.r[i], 0.0, state.z[i]) @ ry(state.theta[i])
        poses.append(t.copy())
    return poses


class TestCableAttachPoint:
    def test_straight_plus_side(self, params):
        b = cable_attach_point(0.0, 2.1, 0.0, +1, params)
        np.testing.assert_allclose(b, [1.3, 2.1], atol=1e-15)

    def test_straight_minus_side(self, params):
        b = cable_attach_point(0.0, 2.1, 0.0, -1, params)
        np.testing.assert_allclose(b, [-1.3, 2.1], atol=1e-15)

    def test_bent_matches_matrix_oracle(self, params):
        # independent evaluation through the explicit 2x2 rotation block
        theta, r, z = 0.2, 0.21, 2.08
        block = np.array([[np.sin(theta), np.cos(theta)],
                          [np.cos(theta), -np.sin(theta)]])
        expected = np.array([r, z]) + block @ np.array([0.0, params.pitch_radius])
        b = cable_attach_point(r, z, theta, +1, params)
        np.testing.assert_allclose(b, expected, rtol=0, atol=1e-14)


class TestWrapAngles:
    def test_straight_joint_no_deflection(self, params):
        b = cable_attach_point(0.0, 2.1, 0.0, +1, params)
        phi_a, phi_b = cable_wrap_angles(b, 0.0, params, side=+1)
        assert phi_a == 0.0 and phi_b == 0.0

    def test_direct_formula(self, params):
        theta, r, z = 0.2, 0.21, 2.08
        b = cable_attach_point(r, z, theta, +1, params)
        phi_a, phi_b = cable_wrap_angles(b, theta, params, side=+1)
        expected = np.arctan((b[0] - params.pitch_radius) / b[1])
        assert phi_a == pytest.approx(expected, abs=1e-15)
        assert phi_b == pytest.approx(theta - expected, abs=1e-15)

    def test_mirrored_state_negates_angles(self, params):
        theta, r, z = 0.18, 0.19, 2.07
        b1 = cable_attach_point(r, z, theta, +1, params)
        b2 = cable_attach_point(-r, z, -theta, -1, params)
        a1 = cable_wrap_angles(b1, theta, params, side=+1)
        a2 = cable_wrap_angles(b2, -theta, params, side=-1)
        np.testing.assert_allclose(a2, (-a1[0], -a1[1]), atol=1e-14)

    def test_identity_holds_for_all_joints_and_cables(self, params, rng):
        for _ in range(50):
            state = random_state(params, rng)
            geom = cable_geometry(state, params)
            expected = np.broadcast_to(state.theta[:, None], geom.phi_a.shape)
            np.testing.assert_allclose(geom.phi_a + geom.phi_b, expected,
                                       rtol=0, atol=1e-14)

    def test_degenerate_attachment_rejected(self, params):
        with pytest.raises(ValueError):
            cable_wrap_angles(np.array([1.3, 0.0]), 0.0, params)


class TestForwardKinematics:
    def test_rest_chain_tip(self, params):
        poses = chain_forward_kinematics(JointState.rest(params), params)
        np.testing.assert_allclose(poses[-1].position, [0.0, 0.0, 21.0], atol=1e-12)
        np.testing.assert_allclose(poses[-1].rotation, np.eye(3), atol=1e-15)

    def test_single_joint_quarter_turn(self, params):
        state = JointState.rest(params)
        state.theta[0] = np.pi / 2
        pose = chain_forward_kinematics(state, params)[0]
        np.testing.assert_allclose(pose.rotation, rot_y(np.pi / 2), atol=1e-15)

    def test_seven_equal_joints_match_matrix_chain(self, params):
        state = JointState.rest(params)
        state.theta[:] = 0.1
        state.r[:] = 0.104
        state.z[:] = 2.096
        poses = chain_forward_kinematics(state, params)
        oracle = homogeneous_chain(state, params)
        for pose, t in zip(poses, oracle):
            np.testing.assert_allclose(pose.rotation, t[:3, :3], atol=1e-12)
            np.testing.assert_allclose(pose.position, t[:3, 3], atol=1e-12)

    def test_orthonormality_at_depth(self, params, rng):
        state = random_state(params, rng, scale=0.35)
        for pose in chain_forward_kinematics(state, params):
            drift = np.abs(pose.rotation @ pose.rotation.T - np.eye(3)).max()
            assert drift < 1e-9
            assert abs(np.linalg.det(pose.rotation) - 1.0) < 1e-9


class TestContactPose:
    def test_base_contact_offset(self, params):
        pose = contact_pose(0.0, 0.0, JointState.rest(params), params)
        np.testing.assert_allclose(pose.position, [1.3, 0.0, 0.0], atol=1e-12)

    def test_tip_contact_matches_tip_pose(self, params):
        state = JointState.rest(params)
        pose = contact_pose(params.backbone_length, 0.0, state, params)
        tip = chain_forward_kinematics(state, params)[-1]
        np.testing.assert_allclose(pose.position,
                                   tip.position + [1.3, 0.0, 0.0], atol=1e-12)

    def test_mid_joint_bent_matches_transform_walk(self, params):
        state = JointState.rest(params)
        state.theta[:] = 0.15
        state.r[:] = 0.157
        state.z[:] = 2.091
        s_c = 3.5 * params.joint_pitch   # middle of joint 4
        theta_c = np.pi
        pose = contact_pose(s_c, theta_c, state, params)

        # independent walk: compose transforms to the containing joint tip,
        # then translate back along its tangent and apply the contact frame
        idx, back = locate_contact_joint(s_c, params)
        t = homogeneous_chain(state, params)[int(idx)]
        local = np.array([np.cos(theta_c) * params.pitch_radius, 0.0,
                          float(back) - np.sin(theta_c) * params.pitch_radius, 1.0])
        np.testing.assert_allclose(pose.position, (t @ local)[:3], atol=1e-12)
        expected_rot = t[:3, :3] @ rot_y(theta_c) @ rot_y(np.pi / 2)
        np.testing.assert_allclose(pose.rotation, expected_rot, atol=1e-12)

    def test_out_of_range_rejected(self, params):
        with pytest.raises(ValueError):
            contact_pose(params.backbone_length + 1.0, 0.0,
                         JointState.rest(params), params)
        with pytest.raises(ValueError):
            locate_contact_joint(-0.5, params)


class TestTotalCableLength:
    def test_rest_path(self, params):
        state = JointState.rest(params)
        geom = cable_geometry(state, params)
        lengths = total_cable_length(state, geom, np.zeros(2), params)
        np.testing.assert_allclose(lengths, [21.0, 21.0], atol=1e-12)

    def test_elastic_elongation(self, params):
        state = JointState.rest(params)
        geom = cable_geometry(state, params)
        tension = np.array([3.0, 0.0])
        lengths = total_cable_length(state, geom, tension, params)
        expected = 21.0 + 3.0 * params.unloaded_cable_length / params.cable_axial_stiffness
        assert lengths[0] == pytest.approx(expected, abs=1e-12)
        assert lengths[1] == pytest.approx(21.0, abs=1e-12)

    def test_bent_path_matches_global_polyline(self, params, rng):
        state = random_state(params, rng)
        geom = cable_geometry(state, params)
        lengths = total_cable_length(state, geom, np.zeros(2), params)

        # polyline oracle over global-frame cable waypoints
        transforms = homogeneous_chain(state, params)
        pr = params.pitch_radius
        for cable, side in enumerate((1.0, -1.0)):
            total = 0.0
            base = np.eye(4)
            for i in range(params.joint_count):
                base_i = base.copy()
                base_i[:3, 3] += base_i[:3, :3] @ [0.0, 0.0, params.channel_length]
                a_pt = base_i @ np.array([side * pr, 0.0, 0.0, 1.0])
                b_local = np.array([geom.attach_r[i, cable], 0.0,
                                    geom.attach_z[i, cable], 1.0])
                b_pt = base_i @ b_local
                total += np.linalg.norm((b_pt - a_pt)[:3]) + params.channel_length
                base = transforms[i]
            assert lengths[cable] == pytest.approx(total, abs=1e-10)


class TestJointStateValidation:
    def test_rest_is_valid(self, params):
        JointState.rest(params).validate(params)

    def test_bad_friction_sign_rejected(self, params):
        state = JointState.rest(params)
        state.friction_sign[0, 0] = 2 * params.friction_coeff
        with pytest.raises(ValueError):
            state.validate(params)

    def test_nonpositive_z_rejected(self, params):
        state = JointState.rest(params)
        state.z[3] = 0.0
        with pytest.raises(ValueError):
            state.validate(params)
