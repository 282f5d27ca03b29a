"""Forward kinematics for the seven-joint arms.

Chains are described URDF-style: each joint carries a fixed transform
(translation + RPY rotation) from its parent frame followed by a rotation
about a fixed axis.  The tool center point hangs off the last joint frame by
a fixed offset.  A global ``scale`` shrinks every translation (0.8 for the
wearable exoskeleton build, 1.0 for the robot); rotations are unaffected.

Poses use unit quaternions in (x, y, z, w) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, InvalidRangeError, SchemaError

QUAT_NORM_TOL = 1e-9

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise InvalidInputError("cannot normalize zero quaternion")
    return q / n


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    x1, y1, z1, w1 = q1
    x2, y2, z2, w2 = q2
    return np.array(
        [
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    u = q[:3]
    w = q[3]
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, math.cos(half)])


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    return quat_multiply(quat_multiply(qz, qy), qx)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position in meters plus unit quaternion (x, y, z, w)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        quat = np.asarray(self.orientation, dtype=np.float64)
        if pos.shape != (3,) or quat.shape != (4,):
            raise SchemaError(f"pose shapes {pos.shape}/{quat.shape} != (3,)/(4,)")
        norm = math.sqrt(float(np.dot(quat, quat)))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise InvalidInputError(f"quaternion norm {norm} deviates from 1 beyond {QUAT_NORM_TOL}")
        pos.setflags(write=False)
        quat.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @staticmethod
    def identity() -> "Pose":
        return Pose(position=np.zeros(3), orientation=IDENTITY_QUAT.copy())

    def compose(self, other: "Pose") -> "Pose":
        """self * other (apply other in self's frame)."""
        pos = self.position + quat_rotate(self.orientation, other.position)
        quat = quat_normalize(quat_multiply(self.orientation, other.orientation))
        return Pose(position=pos, orientation=quat)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, np.asarray(p, dtype=np.float64))

    def as_vector(self) -> np.ndarray:
        """7-vector (x, y, z, rx, ry, rz, rw)."""
        return np.concatenate([self.position, self.orientation])


@dataclass(frozen=True)
class ChainLink:
    """One joint: fixed parent->joint transform plus a unit rotation axis."""

    origin_xyz: Tuple[float, float, float]
    origin_rpy: Tuple[float, float, float]
    axis: Tuple[float, float, float]

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=np.float64)
        n = float(np.linalg.norm(a))
        if abs(n - 1.0) > 1e-9:
            raise InvalidInputError(f"joint axis {self.axis} is not unit length")


@dataclass(frozen=True)
class KinematicChain:
    """A serial revolute chain with a fixed TCP offset after the last joint."""

    links: Tuple[ChainLink, ...]
    base_pose: Pose
    gripper_offset: Tuple[float, float, float]
    scale: float = 1.0
    name: str = "arm"

    def __post_init__(self):
        if not (self.scale > 0.0):
            raise InvalidRangeError(f"chain scale must be > 0, got {self.scale}")
        if not self.links:
            raise SchemaError("chain needs at least one link")

    @property
    def joint_count(self) -> int:
        return len(self.links)

    def scaled(self, scale: float) -> "KinematicChain":
        return KinematicChain(
            links=self.links,
            base_pose=self.base_pose,
            gripper_offset=self.gripper_offset,
            scale=scale,
            name=self.name,
        )

    @staticmethod
    def from_config(cfg: dict) -> "KinematicChain":
        links = tuple(
            ChainLink(
                origin_xyz=tuple(link["origin_xyz"]),
                origin_rpy=tuple(link["origin_rpy"]),
                axis=tuple(link["axis"]),
            )
            for link in cfg["links"]
        )
        base = cfg.get("base_pose", {})
        base_pose = Pose(
            position=np.asarray(base.get("xyz", (0.0, 0.0, 0.0)), dtype=np.float64),
            orientation=quat_normalize(quat_from_rpy(*base.get("rpy", (0.0, 0.0, 0.0)))),
        )
        return KinematicChain(
            links=links,
            base_pose=base_pose,
            gripper_offset=tuple(cfg.get("gripper_offset", (0.0, 0.0, 0.0))),
            scale=float(cfg.get("scale", 1.0)),
            name=str(cfg.get("name", "arm")),
        )


@dataclass(frozen=True)
class FkResult:
    """World poses of every joint frame plus the tool center point."""

    link_poses: Tuple[Pose, ...]
    tcp: Pose

    def link_origins(self) -> np.ndarray:
        """(n+1, 3) array: joint frame origins followed by the TCP position."""
        pts = [p.position for p in self.link_poses]
        pts.append(self.tcp.position)
        return np.stack(pts)


def forward_kinematics(chain: KinematicChain, q: Sequence[float]) -> FkResult:
    """Compose the chain's transforms for joint vector ``q``.

    Raises:
        SchemaError: if ``len(q)`` differs from the chain's joint count.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.joint_count,):
        raise SchemaError(f"joint vector shape {q.shape} != ({chain.joint_count},)")
    s = chain.scale
    pose = chain.base_pose
    link_poses: List[Pose] = []
    for link, angle in zip(chain.links, q):
        fixed = Pose(
            position=s * np.asarray(link.origin_xyz, dtype=np.float64),
            orientation=quat_normalize(quat_from_rpy(*link.origin_rpy)),
        )
        joint = Pose(
            position=np.zeros(3),
            orientation=quat_normalize(
                quat_from_axis_angle(np.asarray(link.axis, dtype=np.float64), float(angle))
            ),
        )
        pose = pose.compose(fixed).compose(joint)
        link_poses.append(pose)
    tcp = pose.compose(
        Pose(
            position=s * np.asarray(chain.gripper_offset, dtype=np.float64),
            orientation=IDENTITY_QUAT.copy(),
        )
    )
    return FkResult(link_poses=tuple(link_poses), tcp=tcp)


def _rot_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def _rot_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (x, y, z, w)."""
    t = float(np.trace(R))
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    return q / math.sqrt(float(np.dot(q, q)))


class _ChainCache:
    """Precomputed fixed transforms for the fast FK path."""

    __slots__ = ("base_R", "base_p", "fixed_R", "origins", "axes", "gripper")

    def __init__(self, chain: KinematicChain):
        q = chain.base_pose.orientation
        self.base_R = _quat_to_matrix(q)
        self.base_p = chain.base_pose.position.copy()
        self.fixed_R = [_rot_from_rpy(*link.origin_rpy) for link in chain.links]
        self.origins = [chain.scale * np.asarray(link.origin_xyz) for link in chain.links]
        self.axes = [np.asarray(link.axis, dtype=np.float64) for link in chain.links]
        self.gripper = chain.scale * np.asarray(chain.gripper_offset)


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def fk_points(chain: KinematicChain, q: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Fast FK: joint-frame origins plus the TCP pose vector.

    Matrix-composition path used by the stepping loops; agrees with
    :func:`forward_kinematics` to floating-point roundoff (fuzz-tested).

    Returns:
        (points, tcp): ``points`` is (n+1, 3) joint origins followed by the
        TCP position; ``tcp`` is the 7-vector (x, y, z, rx, ry, rz, rw).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.joint_count,):
        raise SchemaError(f"joint vector shape {q.shape} != ({chain.joint_count},)")
    cache = getattr(chain, "_fk_cache", None)
    if cache is None:
        cache = _ChainCache(chain)
        object.__setattr__(chain, "_fk_cache", cache)
    R = cache.base_R
    p = cache.base_p
    points = np.empty((chain.joint_count + 1, 3))
    for i in range(chain.joint_count):
        p = p + R @ cache.origins[i]
        R = R @ cache.fixed_R[i] @ _rot_from_axis_angle(cache.axes[i], float(q[i]))
        points[i] = p
    tcp_p = p + R @ cache.gripper
    points[chain.joint_count] = tcp_p
    return points, np.concatenate([tcp_p, quat_from_matrix(R)])


def tcp_twist(
    chain: KinematicChain,
    q: Sequence[float],
    q_dot: Sequence[float],
    dt: float = 1e-4,
) -> np.ndarray:
    """Finite-difference TCP twist (vx, vy, vz, wx, wy, wz).

    Evaluates FK at ``q`` and ``q + q_dot * dt`` and differences the poses.
    ``dt`` only controls the finite-difference step, not simulation time.

    Raises:
        InvalidInputError: if ``dt`` is not strictly positive.
    """
    if not (dt > 0.0):
        raise InvalidInputError(f"finite-difference step must be > 0, got {dt}")
    q = np.asarray(q, dtype=np.float64)
    q_dot = np.asarray(q_dot, dtype=np.float64)
    _, a = fk_points(chain, q)
    _, b = fk_points(chain, q + q_dot * dt)
    linear = (b[:3] - a[:3]) / dt
    rel = quat_multiply(b[3:], quat_conjugate(a[3:]))
    rel = quat_normalize(rel)
    if rel[3] < 0.0:
        rel = -rel
    vec_norm = float(np.linalg.norm(rel[:3]))
    angle = 2.0 * math.atan2(vec_norm, float(rel[3]))
    if vec_norm < 1e-15:
        angular = np.zeros(3)
    else:
        angular = rel[:3] / vec_norm * (angle / dt)
    return np.concatenate([linear, angular])
