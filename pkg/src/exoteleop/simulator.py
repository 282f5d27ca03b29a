"""Kinematic dual-arm simulator backend.

Joints track commanded positions under per-joint velocity caps; there are no
dynamics.  Each step the arms are wrapped in capsules, the active task world
is updated (ball pushing, curtain, grasp attachment), and collision pairs
(arm-arm, arm-table, arm-shelf, excluding adjacent links) are evaluated and
appended to the event log.  Stepping is deterministic: identical initial
state, command sequence and dt sequence produce bit-identical states.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .collision import Capsule
from .config import RobotModel
from .core import ARM_JOINTS, NS_PER_S
from .errors import InvalidInputError, SchemaError
from .kinematics import fk_points
from .worlds import StepContext, load_world

ARM_NAMES = ("left", "right")


@dataclass(frozen=True)
class Command:
    """Dual-arm joint targets plus gripper width targets."""

    joints: np.ndarray  # (2, 7) radians
    widths: np.ndarray  # (2,) meters

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        widths = np.asarray(self.widths, dtype=np.float64)
        if joints.shape != (2, ARM_JOINTS) or widths.shape != (2,):
            raise SchemaError(f"command shapes {joints.shape}/{widths.shape}")
        if not (np.all(np.isfinite(joints)) and np.all(np.isfinite(widths))):
            raise InvalidInputError("command contains non-finite values")
        joints.setflags(write=False)
        widths.setflags(write=False)
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "widths", widths)


@dataclass
class SimState:
    """Snapshot of the simulator: arm state, world state, event log."""

    q: np.ndarray  # (2, 7)
    dq: np.ndarray  # (2, 7)
    widths: np.ndarray  # (2,)
    sim_time: int  # ns
    collision_events: Tuple[Tuple[int, str], ...]
    world_events: Tuple[Tuple[int, str], ...]
    world_snapshot: dict
    tcp_poses: Tuple[np.ndarray, np.ndarray]  # 7-vectors (xyz + quat)

    @property
    def collided(self) -> bool:
        return len(self.collision_events) > 0

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.q.tobytes())
        h.update(self.dq.tobytes())
        h.update(self.widths.tobytes())
        h.update(np.int64(self.sim_time).tobytes())
        for events in (self.collision_events, self.world_events):
            for t, pair in events:
                h.update(np.int64(t).tobytes())
                h.update(pair.encode())
        h.update(self.tcp_poses[0].tobytes())
        h.update(self.tcp_poses[1].tobytes())
        h.update(self._world_bytes)
        return h.hexdigest()

    _world_bytes: bytes = b""


def _batch_segment_distance(P1, Q1, P2, Q2):
    """Vectorized closest distance between segment pairs.

    All inputs are (n, 3).  Mirrors the scalar clamped-quadratic solver in
    collision.py; fuzz-tested against it.
    """
    d1 = Q1 - P1
    d2 = Q2 - P2
    r = P1 - P2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)

    eps = 1e-12
    a_deg = a <= eps
    e_deg = e <= eps
    a_safe = np.where(a_deg, 1.0, a)
    e_safe = np.where(e_deg, 1.0, e)

    denom = a * e - b * b
    s = np.where(denom > eps, np.clip((b * f - c * e) / np.where(denom > eps, denom, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / e_safe
    t_lo = t < 0.0
    t_hi = t > 1.0
    t = np.clip(t, 0.0, 1.0)
    s = np.where(t_lo, np.clip(-c / a_safe, 0.0, 1.0), s)
    s = np.where(t_hi, np.clip((b - c) / a_safe, 0.0, 1.0), s)

    # Degenerate segments reduce to points.
    s = np.where(a_deg, 0.0, s)
    t_deg = np.clip(f / e_safe, 0.0, 1.0)
    t = np.where(a_deg & ~e_deg, t_deg, t)
    t = np.where(e_deg, 0.0, t)
    s_pt = np.clip(-c / a_safe, 0.0, 1.0)
    s = np.where(e_deg & ~a_deg, s_pt, s)

    c1 = P1 + s[:, None] * d1
    c2 = P2 + t[:, None] * d2
    return np.linalg.norm(c1 - c2, axis=1)


class DualArmSim:
    """Single-writer simulation backend.

    One stepping context owns the instance; read access goes through the
    immutable snapshots returned by :meth:`step`.
    """

    def __init__(self, model: RobotModel, world_cfg: dict, seed: int = 0):
        self.model = model
        self.world = load_world(world_cfg)
        self._collision_pairs = self._build_pairs()
        self.reset(seed)

    # -- capsule layout -----------------------------------------------------

    def _arm_capsules(self, pts: np.ndarray) -> Tuple[Capsule, ...]:
        radii = self.model.capsule_radii
        return tuple(
            Capsule(a=pts[i], b=pts[i + 1], radius=radii[i]) for i in range(len(radii))
        )

    def _build_pairs(self) -> List[Tuple[str, int, str, int]]:
        """Static list of capsule pairs to check: (kind_a, idx_a, kind_b, idx_b)."""
        n = len(self.model.capsule_radii)
        pairs: List[Tuple[str, int, str, int]] = []
        for arm in ARM_NAMES:
            for i in range(n):
                for j in range(i + 2, n):  # adjacent links exempt
                    pairs.append((arm, i, arm, j))
        for i in range(n):
            for j in range(n):
                pairs.append((ARM_NAMES[0], i, ARM_NAMES[1], j))
        n_shelf = len(getattr(self.world, "shelf_capsules", ()))
        for arm in ARM_NAMES:
            for i in range(n):
                for j in range(n_shelf):
                    pairs.append((arm, i, "shelf", j))
        return pairs

    # -- lifecycle ----------------------------------------------------------

    def reset(self, seed: int) -> SimState:
        self.world.reset(seed)
        self._q = np.zeros((2, ARM_JOINTS))
        self._dq = np.zeros((2, ARM_JOINTS))
        self._widths = np.array(
            [d.gripper_width_range[1] for d in self.model.descriptors]
        )
        self._t = 0
        self._events: List[Tuple[int, str]] = []
        self._world_events: List[Tuple[int, str]] = []
        self._last_fk = None
        return self.snapshot()

    @property
    def joint_limits(self) -> np.ndarray:
        return np.array([d.arm_joint_limits for d in self.model.descriptors])

    def clamp_command(self, command: Command) -> Command:
        lim = self.joint_limits
        joints = np.clip(command.joints, lim[:, :, 0], lim[:, :, 1])
        widths = np.array(
            [
                np.clip(command.widths[i], *self.model.descriptors[i].gripper_width_range)
                for i in range(2)
            ]
        )
        return Command(joints=joints, widths=widths)

    def step(self, command: Command, dt: float) -> SimState:
        if not (dt > 0.0):
            raise InvalidInputError(f"dt must be > 0, got {dt}")
        command = self.clamp_command(command)
        max_step = self.model.velocity_cap_rad_s * dt
        delta = np.clip(command.joints - self._q, -max_step, max_step)
        new_q = self._q + delta
        self._dq = delta / dt
        self._q = new_q
        w_step = self.model.gripper_velocity_cap_m_s * dt
        self._widths = self._widths + np.clip(command.widths - self._widths, -w_step, w_step)
        self._t += int(round(dt * NS_PER_S))

        fk = [fk_points(self.model.chains[i], self._q[i]) for i in range(2)]
        caps = (self._arm_capsules(fk[0][0]), self._arm_capsules(fk[1][0]))
        tcps = (fk[0][0][-1], fk[1][0][-1])
        ctx = StepContext(t=self._t, capsules=caps, tcps=tcps, widths=self._widths.copy())

        self._world_events.extend(self.world.update(ctx))
        self._detect_collisions(caps)
        self._last_fk = fk
        return self.snapshot()

    def _detect_collisions(self, caps) -> None:
        shelf_caps = tuple(getattr(self.world, "shelf_capsules", ()))
        by_kind = {"left": caps[0], "right": caps[1], "shelf": shelf_caps}
        if self._collision_pairs:
            P1 = np.stack([by_kind[ka][ia].a for ka, ia, kb, ib in self._collision_pairs])
            Q1 = np.stack([by_kind[ka][ia].b for ka, ia, kb, ib in self._collision_pairs])
            P2 = np.stack([by_kind[kb][ib].a for ka, ia, kb, ib in self._collision_pairs])
            Q2 = np.stack([by_kind[kb][ib].b for ka, ia, kb, ib in self._collision_pairs])
            r1 = np.array([by_kind[ka][ia].radius for ka, ia, kb, ib in self._collision_pairs])
            r2 = np.array([by_kind[kb][ib].radius for ka, ia, kb, ib in self._collision_pairs])
            dist = _batch_segment_distance(P1, Q1, P2, Q2) - r1 - r2
            for idx in np.nonzero(dist < 0.0)[0]:
                ka, ia, kb, ib = self._collision_pairs[idx]
                self._events.append((self._t, f"{ka}{ia}:{kb}{ib}"))
        # Table plane: any capsule dipping below z = 0.
        for name, arm_caps in zip(ARM_NAMES, caps):
            for i, cap in enumerate(arm_caps):
                if cap.z_min < 0.0:
                    self._events.append((self._t, f"{name}{i}:table"))

    def snapshot(self) -> SimState:
        fk = self._last_fk
        if fk is None:
            fk = [fk_points(self.model.chains[i], self._q[i]) for i in range(2)]
        state = SimState(
            q=self._q.copy(),
            dq=self._dq.copy(),
            widths=self._widths.copy(),
            sim_time=self._t,
            collision_events=tuple(self._events),
            world_events=tuple(self._world_events),
            world_snapshot=self.world.snapshot(),
            tcp_poses=(fk[0][1].copy(), fk[1][1].copy()),
        )
        state._world_bytes = self.world.pack_state()
        return state

    def capsules(self) -> Tuple[Tuple[Capsule, ...], Tuple[Capsule, ...]]:
        fk = [fk_points(self.model.chains[i], self._q[i]) for i in range(2)]
        return (self._arm_capsules(fk[0][0]), self._arm_capsules(fk[1][0]))
