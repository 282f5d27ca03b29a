"""Encoder-to-joint calibration and the affine joint mapping.

A calibration is captured at a single matched pose: the robot arms are parked
at a known configuration (e.g. fully extended), the exoskeleton is aligned to
the same posture, and the joint positions plus encoder readings are recorded
together.  Afterwards each encoder channel maps to a robot joint through

    q = clamp(q_c + k * (p - p_c) * resolution, lo, hi)

where ``k`` is a direction/scale coefficient (typically +-1) and ``(lo, hi)``
is either the kinematic joint limit or a tighter task-specific constraint.
Grippers bypass the affine map: their encoder range is interpolated linearly
onto the opening width range.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    ARM_DOF,
    ARM_JOINTS,
    DEFAULT_ENCODER_RESOLUTION_RAD,
    ArmDescriptor,
    EncoderFrame,
    JointVector,
    clamp,
)
from .errors import InvalidInputError, InvalidRangeError, SchemaError

CALIBRATION_SCHEMA = "airexo-cal/1"

ARM_IDS = ("left", "right")


@dataclass(frozen=True)
class JointCalibration:
    """Per-joint anchor: matched (q_c, p_c) pair, direction k and limits."""

    q_c: float
    p_c: int
    k: float
    q_min: float
    q_max: float

    def __post_init__(self):
        if not self.q_min <= self.q_c <= self.q_max:
            raise InvalidRangeError(
                f"calibration pose q_c={self.q_c} outside limits [{self.q_min}, {self.q_max}]"
            )
        if self.k == 0.0:
            raise InvalidInputError("calibration coefficient k must be nonzero")


@dataclass(frozen=True)
class GripperCalibration:
    """Linear map from the gripper encoder range to the opening width range."""

    p_open: int
    p_closed: int
    width_open: float
    width_closed: float = 0.0

    def __post_init__(self):
        if self.p_open == self.p_closed:
            raise InvalidRangeError("gripper calibration needs p_open != p_closed")
        if not self.width_open > self.width_closed >= 0.0:
            raise InvalidRangeError(
                f"gripper widths must satisfy open > closed >= 0, got "
                f"({self.width_open}, {self.width_closed})"
            )


@dataclass(frozen=True)
class ArmCalibration:
    """Calibration entries for one arm: seven joints plus the gripper."""

    joints: Tuple[JointCalibration, ...]
    gripper: GripperCalibration

    def __post_init__(self):
        if len(self.joints) != ARM_JOINTS:
            raise SchemaError(f"arm calibration needs {ARM_JOINTS} joint entries, got {len(self.joints)}")

    @property
    def dof(self) -> int:
        return len(self.joints) + 1


@dataclass(frozen=True)
class CalibrationRecord:
    """A complete dual-arm calibration captured at one matched pose."""

    left: ArmCalibration
    right: ArmCalibration
    created_at: int
    pose_label: str
    schema: str = CALIBRATION_SCHEMA

    def arm(self, arm_index: int) -> ArmCalibration:
        return (self.left, self.right)[arm_index]


@dataclass(frozen=True)
class JointConstraint:
    """Task-specific range (and optional k override) for a single joint."""

    q_t_min: float
    q_t_max: float
    k: Optional[float] = None

    def __post_init__(self):
        if not self.q_t_min < self.q_t_max:
            raise InvalidRangeError(
                f"task constraint range [{self.q_t_min}, {self.q_t_max}] inverted"
            )


@dataclass(frozen=True)
class TaskConstraint:
    """Per-task joint ranges nested inside the kinematic limits.

    ``left`` / ``right`` hold one optional entry per arm joint; ``None``
    leaves the kinematic limit active for that joint.
    """

    task_id: str
    left: Tuple[Optional[JointConstraint], ...]
    right: Tuple[Optional[JointConstraint], ...]

    def __post_init__(self):
        for arm_id, entries in (("left", self.left), ("right", self.right)):
            if len(entries) != ARM_JOINTS:
                raise SchemaError(
                    f"task {self.task_id!r} {arm_id}: expected {ARM_JOINTS} entries, got {len(entries)}"
                )

    def entries(self, arm_index: int) -> Tuple[Optional[JointConstraint], ...]:
        return (self.left, self.right)[arm_index]

    def validate_nesting(self, descriptors: Sequence[ArmDescriptor]) -> None:
        """Check that every constrained range nests inside the kinematic range."""
        for arm_index, desc in enumerate(descriptors):
            for j, entry in enumerate(self.entries(arm_index)):
                if entry is None:
                    continue
                lo, hi = desc.joint_limits[j]
                if entry.q_t_min < lo or entry.q_t_max > hi:
                    raise InvalidRangeError(
                        f"task {self.task_id!r} {desc.name} joint {j}: "
                        f"[{entry.q_t_min}, {entry.q_t_max}] not inside [{lo}, {hi}]"
                    )


@dataclass(frozen=True)
class MappedFrame:
    """Robot-domain result of mapping one encoder frame: joints plus widths."""

    t: int
    joints: np.ndarray  # (2, 7) radians, [left, right]
    widths: np.ndarray  # (2,) meters

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        widths = np.asarray(self.widths, dtype=np.float64)
        if joints.shape != (2, ARM_JOINTS) or widths.shape != (2,):
            raise SchemaError(
                f"mapped frame shapes {joints.shape}/{widths.shape} != (2,{ARM_JOINTS})/(2,)"
            )
        joints.setflags(write=False)
        widths.setflags(write=False)
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "widths", widths)


def map_encoder_to_joint(
    cal: JointCalibration,
    p: int,
    res: float,
    constraint: Optional[JointConstraint] = None,
) -> float:
    """Map one encoder reading to a robot joint angle.

    Applies the affine map anchored at the calibration pose, then clamps to
    the task constraint range when one is supplied, otherwise to the
    kinematic range.  The result always lies inside the active range.
    """
    if not (res > 0.0):
        raise InvalidInputError(f"resolution must be > 0, got {res}")
    k = cal.k
    lo, hi = cal.q_min, cal.q_max
    if constraint is not None:
        lo, hi = constraint.q_t_min, constraint.q_t_max
        if constraint.k is not None:
            k = constraint.k
    q = cal.q_c + k * (float(p) - float(cal.p_c)) * res
    return clamp(q, lo, hi)


def map_gripper(gcal: GripperCalibration, p: int) -> float:
    """Map a gripper encoder reading to an opening width in meters.

    Linear interpolation between the closed and open anchor ticks, clamped to
    the physical width range on both ends.
    """
    frac = (float(p) - gcal.p_closed) / (gcal.p_open - gcal.p_closed)
    width = gcal.width_closed + frac * (gcal.width_open - gcal.width_closed)
    return clamp(width, gcal.width_closed, gcal.width_open)


def map_frame(
    cal: CalibrationRecord,
    frame: EncoderFrame,
    constraint: Optional[TaskConstraint] = None,
) -> MappedFrame:
    """Map a full dual-arm encoder frame to robot joints and gripper widths."""
    if frame.ticks.shape[0] != 2 * ARM_DOF:
        raise SchemaError(f"expected {2 * ARM_DOF} ticks, got {frame.ticks.shape[0]}")
    joints = np.zeros((2, ARM_JOINTS))
    widths = np.zeros(2)
    for arm_index in range(2):
        arm_cal = cal.arm(arm_index)
        ticks = frame.arm_ticks(arm_index)
        entries = constraint.entries(arm_index) if constraint is not None else (None,) * ARM_JOINTS
        for j in range(ARM_JOINTS):
            joints[arm_index, j] = map_encoder_to_joint(
                arm_cal.joints[j], int(ticks[j]), frame.resolution_rad, entries[j]
            )
        widths[arm_index] = map_gripper(arm_cal.gripper, int(ticks[ARM_JOINTS]))
    return MappedFrame(t=frame.t, joints=joints, widths=widths)


def invert_joint_map(cal: JointCalibration, q: float, res: float) -> float:
    """Exact (unrounded) encoder reading whose affine image is ``q``."""
    return cal.p_c + (q - cal.q_c) / (cal.k * res)


def capture_calibration(
    robot_joints: Sequence[JointVector],
    frame: EncoderFrame,
    pose_label: str,
    descriptors: Sequence[ArmDescriptor],
    k_signs: Sequence[Sequence[float]],
    gripper_open_offset: int = 1500,
    created_at: Optional[int] = None,
) -> CalibrationRecord:
    """Capture a calibration record at a matched robot/exoskeleton pose.

    The caller is responsible for having both devices at the same physical
    configuration, with the grippers fully closed.  Joint entries pair the
    supplied robot joint values with the encoder readings; ``k`` defaults
    come from the per-joint sign table.  The gripper entry anchors its
    closed width at the captured tick and places the open anchor at
    ``gripper_open_offset`` ticks away.

    Raises:
        SchemaError: on any length mismatch between joints, descriptors and
            the encoder frame.
    """
    if len(robot_joints) != 2 or len(descriptors) != 2 or len(k_signs) != 2:
        raise SchemaError("capture needs exactly two arms (left, right)")
    arms = []
    for arm_index, (jv, desc, signs) in enumerate(zip(robot_joints, descriptors, k_signs)):
        jv.require_dof(desc)
        if len(signs) != ARM_JOINTS:
            raise SchemaError(f"k sign table for arm {arm_index} must have {ARM_JOINTS} entries")
        ticks = frame.arm_ticks(arm_index)
        joints = tuple(
            JointCalibration(
                q_c=float(jv.values[j]),
                p_c=int(ticks[j]),
                k=float(signs[j]),
                q_min=desc.joint_limits[j][0],
                q_max=desc.joint_limits[j][1],
            )
            for j in range(ARM_JOINTS)
        )
        gripper = GripperCalibration(
            p_open=int(ticks[ARM_JOINTS]) + int(gripper_open_offset),
            p_closed=int(ticks[ARM_JOINTS]),
            width_open=desc.gripper_width_range[1],
            width_closed=desc.gripper_width_range[0],
        )
        arms.append(ArmCalibration(joints=joints, gripper=gripper))
    stamp = int(created_at) if created_at is not None else time.monotonic_ns()
    return CalibrationRecord(
        left=arms[0], right=arms[1], created_at=stamp, pose_label=pose_label
    )


def coverage_report(
    cal: CalibrationRecord,
    encoder_tick_range: Sequence[Sequence[Tuple[int, int]]],
    descriptors: Sequence[ArmDescriptor],
    res: float = DEFAULT_ENCODER_RESOLUTION_RAD,
) -> np.ndarray:
    """Fraction of each robot joint range reachable from the encoder range.

    For each joint, the image of ``[min_ticks, max_ticks]`` under the affine
    map (before clamping) is intersected with the kinematic range and divided
    by the kinematic span.  The gripper entry reports the covered fraction of
    the width range.  Returns a (2, 8) array of fractions in [0, 1].

    Raises:
        InvalidRangeError: if a robot joint range is degenerate.
    """
    out = np.zeros((2, ARM_DOF))
    for arm_index in range(2):
        arm_cal = cal.arm(arm_index)
        desc = descriptors[arm_index]
        ranges = encoder_tick_range[arm_index]
        if len(ranges) != ARM_DOF:
            raise SchemaError(f"need {ARM_DOF} tick ranges per arm, got {len(ranges)}")
        for j in range(ARM_JOINTS):
            lo_t, hi_t = ranges[j]
            if hi_t < lo_t:
                raise InvalidRangeError(f"tick range ({lo_t}, {hi_t}) inverted")
            jc = arm_cal.joints[j]
            q_min, q_max = desc.joint_limits[j]
            if q_max <= q_min:
                raise InvalidRangeError(f"degenerate robot range for joint {j}")
            a = jc.q_c + jc.k * (lo_t - jc.p_c) * res
            b = jc.q_c + jc.k * (hi_t - jc.p_c) * res
            img_lo, img_hi = min(a, b), max(a, b)
            overlap = max(0.0, min(img_hi, q_max) - max(img_lo, q_min))
            out[arm_index, j] = overlap / (q_max - q_min)
        # Gripper: covered fraction of the width range under the linear map.
        g = arm_cal.gripper
        lo_t, hi_t = ranges[ARM_JOINTS]
        w_a = map_gripper(g, lo_t)
        w_b = map_gripper(g, hi_t)
        span = g.width_open - g.width_closed
        out[arm_index, ARM_JOINTS] = abs(w_b - w_a) / span
    return out


# ---------------------------------------------------------------------------
# File format: one JSON document per record, schema "airexo-cal/1".
# ---------------------------------------------------------------------------

def _arm_to_json(arm: ArmCalibration) -> list:
    entries = [
        {"q_c": jc.q_c, "p_c": jc.p_c, "k": jc.k, "q_min": jc.q_min, "q_max": jc.q_max}
        for jc in arm.joints
    ]
    entries.append(
        {
            "p_open": arm.gripper.p_open,
            "p_closed": arm.gripper.p_closed,
            "width_open": arm.gripper.width_open,
        }
    )
    return entries


def _arm_from_json(entries: list) -> ArmCalibration:
    if len(entries) != ARM_DOF:
        raise SchemaError(f"calibration arm needs {ARM_DOF} entries, got {len(entries)}")
    joints = tuple(
        JointCalibration(
            q_c=float(e["q_c"]),
            p_c=int(e["p_c"]),
            k=float(e["k"]),
            q_min=float(e["q_min"]),
            q_max=float(e["q_max"]),
        )
        for e in entries[:ARM_JOINTS]
    )
    g = entries[ARM_JOINTS]
    gripper = GripperCalibration(
        p_open=int(g["p_open"]),
        p_closed=int(g["p_closed"]),
        width_open=float(g["width_open"]),
        width_closed=float(g.get("width_closed", 0.0)),
    )
    return ArmCalibration(joints=joints, gripper=gripper)


def calibration_to_json(cal: CalibrationRecord) -> dict:
    return {
        "schema": cal.schema,
        "created_at": cal.created_at,
        "pose_label": cal.pose_label,
        "arms": {"left": _arm_to_json(cal.left), "right": _arm_to_json(cal.right)},
    }


def calibration_from_json(doc: dict) -> CalibrationRecord:
    if doc.get("schema") != CALIBRATION_SCHEMA:
        raise SchemaError(f"unsupported calibration schema: {doc.get('schema')!r}")
    arms = doc["arms"]
    return CalibrationRecord(
        left=_arm_from_json(arms["left"]),
        right=_arm_from_json(arms["right"]),
        created_at=int(doc["created_at"]),
        pose_label=str(doc["pose_label"]),
    )


def save_calibration(cal: CalibrationRecord, path) -> None:
    Path(path).write_text(json.dumps(calibration_to_json(cal), indent=2, sort_keys=True) + "\n")


def load_calibration(path) -> CalibrationRecord:
    return calibration_from_json(json.loads(Path(path).read_text()))


def with_created_at(cal: CalibrationRecord, created_at: int) -> CalibrationRecord:
    return replace(cal, created_at=created_at)
