import math

import numpy as np
import pytest

from exoteleop.errors import InvalidInputError, SchemaError
from exoteleop.kinematics import (
    ChainLink,
    KinematicChain,
    Pose,
    fk_points,
    forward_kinematics,
    quat_from_rpy,
    quat_normalize,
    tcp_twist,
)


def single_joint_chain(length=1.0, scale=1.0, axis=(0.0, 0.0, 1.0)):
    """One revolute joint at the origin, link of ``length`` along +x to the TCP."""
    return KinematicChain(
        links=(ChainLink(origin_xyz=(0.0, 0.0, 0.0), origin_rpy=(0.0, 0.0, 0.0), axis=axis),),
        base_pose=Pose.identity(),
        gripper_offset=(length, 0.0, 0.0),
        scale=scale,
    )


class TestForwardKinematics:
    def test_home_pose_matches_config(self, model):
        # All-zero joints: chain extends along the base yaw direction.
        fk = forward_kinematics(model.chains[0], np.zeros(7))
        base = model.chains[0].base_pose.position
        reach = 0.14 + 0.14 + 0.11 + 0.11 + 0.10 + 0.12
        yaw = 2.5307274153917776
        expect = base + reach * np.array([math.cos(yaw), math.sin(yaw), 0.0])
        assert np.allclose(fk.tcp.position, expect, atol=1e-12)

    def test_unit_rotation_hand_check(self):
        # Rotate a 1 m link by pi/2 about z: x-hat maps to y-hat.
        chain = single_joint_chain()
        fk = forward_kinematics(chain, [math.pi / 2])
        assert np.allclose(fk.tcp.position, [0.0, 1.0, 0.0], atol=1e-12)

    def test_scale_shrinks_translations(self):
        chain = single_joint_chain(scale=0.8)
        fk = forward_kinematics(chain, [math.pi / 2])
        assert np.allclose(fk.tcp.position, [0.0, 0.8, 0.0], atol=1e-12)

    def test_scale_equivariance_zero_base(self):
        chain = single_joint_chain()
        scaled = chain.scaled(0.8)
        rng = np.random.default_rng(0)
        for _ in range(50):
            q = rng.uniform(-3, 3, 1)
            a = forward_kinematics(chain, q).tcp.position
            b = forward_kinematics(scaled, q).tcp.position
            assert np.allclose(b, 0.8 * a, atol=1e-12)

    def test_wrong_joint_count(self, model):
        with pytest.raises(SchemaError):
            forward_kinematics(model.chains[0], np.zeros(6))

    def test_rigid_link_lengths_invariant(self, model):
        chain = model.chains[0]
        lengths0 = None
        rng = np.random.default_rng(1)
        for _ in range(100):
            q = rng.uniform(-2.8, 2.8, 7)
            pts = forward_kinematics(chain, q).link_origins()
            lengths = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if lengths0 is None:
                lengths0 = lengths
            assert np.allclose(lengths, lengths0, atol=1e-9)

    def test_quaternions_unit_norm_fuzz(self, model):
        rng = np.random.default_rng(2)
        for _ in range(500):
            q = rng.uniform(-2.8, 2.8, 7)
            fk = forward_kinematics(model.chains[1], q)
            for pose in fk.link_poses + (fk.tcp,):
                assert abs(np.linalg.norm(pose.orientation) - 1.0) < 1e-9
        # 10k-sample sweep on the fast path (library-equivalent, see
        # test_fast_path_agrees_with_reference).
        for _ in range(10_000):
            q = rng.uniform(-2.8, 2.8, 7)
            _, tcp = fk_points(model.chains[0], q)
            assert abs(np.linalg.norm(tcp[3:]) - 1.0) < 1e-9

    def test_fast_path_agrees_with_reference(self, model):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = rng.uniform(-2.8, 2.8, 7)
            for chain in model.chains:
                ref = forward_kinematics(chain, q)
                pts, tcp = fk_points(chain, q)
                assert np.allclose(ref.link_origins(), pts, atol=1e-12)
                assert np.allclose(ref.tcp.position, tcp[:3], atol=1e-12)
                qd = ref.tcp.orientation
                assert min(np.abs(qd - tcp[3:]).max(), np.abs(qd + tcp[3:]).max()) < 1e-9


class TestTcpTwist:
    def test_zero_velocity(self, model):
        tw = tcp_twist(model.chains[0], np.zeros(7), np.zeros(7))
        assert np.allclose(tw, 0.0, atol=1e-12)

    def test_angular_speed_matches_joint_rate(self):
        chain = single_joint_chain()
        tw = tcp_twist(chain, [0.3], [1.0], dt=1e-4)
        assert abs(np.linalg.norm(tw[3:]) - 1.0) < 1e-3
        assert np.allclose(tw[3:] / np.linalg.norm(tw[3:]), [0, 0, 1], atol=1e-6)

    def test_linear_speed_equals_omega_times_lever(self):
        chain = single_joint_chain(length=0.7)
        tw = tcp_twist(chain, [0.0], [2.0], dt=1e-4)
        assert abs(np.linalg.norm(tw[:3]) - 2.0 * 0.7) < 1e-3

    def test_rejects_bad_dt(self):
        chain = single_joint_chain()
        with pytest.raises(InvalidInputError):
            tcp_twist(chain, [0.0], [1.0], dt=0.0)


class TestPose:
    def test_norm_checked(self):
        with pytest.raises(InvalidInputError):
            Pose(position=np.zeros(3), orientation=np.array([0.0, 0.0, 0.0, 1.1]))

    def test_compose_against_homogeneous_matrices(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            p1 = Pose(position=rng.uniform(-1, 1, 3),
                      orientation=quat_normalize(quat_from_rpy(*rng.uniform(-3, 3, 3))))
            p2 = Pose(position=rng.uniform(-1, 1, 3),
                      orientation=quat_normalize(quat_from_rpy(*rng.uniform(-3, 3, 3))))
            out = p1.compose(p2)
            m = _mat(p1) @ _mat(p2)
            assert np.allclose(out.position, m[:3, 3], atol=1e-9)
            assert np.allclose(_mat(out)[:3, :3], m[:3, :3], atol=1e-9)


def _mat(pose: Pose) -> np.ndarray:
    x, y, z, w = pose.orientation
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    m = np.eye(4)
    m[:3, :3] = R
    m[:3, 3] = pose.position
    return m
