"""Scripted operator trajectories for the two tasks.

These stand in for a human operator: piecewise-linear joint-space keyframes
are inverse-mapped through a calibration into integer encoder tick scripts,
so scripted sessions exercise the same encoder -> joint -> command path as a
live operator.  The gather sweep drags each ball cluster along an arc into
the goal triangle; the shelf script runs the five task stages in order.

Keyframe timing is identical across arm variants so that databases built
from different variants stay aligned frame-for-frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .calibration import CalibrationRecord, invert_joint_map
from .core import (
    ARM_JOINTS,
    DEFAULT_ENCODER_RESOLUTION_RAD,
    NS_PER_S,
    EncoderFrame,
    Timestamped,
)
from .errors import InvalidInputError

GRIPPER_OPEN = 0.085
GRIPPER_CLOSED_ON_OBJECT = 0.02

# Gather sweep: arms start outside the ball clusters and drag them along an
# arc; balls ride the leading edge, so they settle slightly past the final
# strip line, inside the goal triangle.
GATHER_SWEEP_RAD = 1.5272  # ~87.5 degrees of shoulder yaw
GATHER_RETRACT_PITCH = -0.5

# Shelf task joint targets (paired with the shipped world_shelf.json geometry).
SHELF_RIGHT_REACH_YAW = 1.3823
SHELF_LEFT_GRASP_YAW = -1.5730
SHELF_LEFT_BIN_YAW = -0.7160
SHELF_ELBOW_UP = -1.5708


@dataclass(frozen=True)
class Keyframe:
    t_s: float
    left: Tuple[float, ...]
    right: Tuple[float, ...]
    width_left: float = GRIPPER_OPEN
    width_right: float = GRIPPER_OPEN


def _pose(j1=0.0, j2=0.0, j4=0.0) -> Tuple[float, ...]:
    q = [0.0] * ARM_JOINTS
    q[0] = j1
    q[1] = j2
    q[3] = j4
    return tuple(q)


HOME = _pose()


def gather_keyframes(arms: Sequence[str] = ("right", "left")) -> List[Keyframe]:
    """Sequential sweeps, one arm per time slot ([2, 23] s and [25, 46] s).

    ``arms`` lists the sweeping arms in slot order, so single-arm variants
    act immediately instead of idling through the first slot.
    """
    if not arms or any(a not in ("left", "right") for a in arms):
        raise InvalidInputError(f"arms must name 'left'/'right', got {arms!r}")
    slot_windows = ((2.0, 20.0, 23.0), (25.0, 43.0, 46.0))
    pose = {"left": HOME, "right": HOME}
    frames = [Keyframe(0.0, HOME, HOME)]

    def at(t_s):
        frames.append(Keyframe(t_s, pose["left"], pose["right"]))

    for arm, (t_start, t_swept, t_up) in zip(arms, slot_windows):
        sweep = GATHER_SWEEP_RAD if arm == "right" else -GATHER_SWEEP_RAD
        at(t_start)
        pose[arm] = _pose(j1=sweep)
        at(t_swept)
        pose[arm] = _pose(j1=sweep, j2=GATHER_RETRACT_PITCH)
        at(t_up)
    at(48.0)
    return frames


def shelf_keyframes() -> List[Keyframe]:
    """Five-stage shelf routine: reach in, push aside, approach, grasp, throw.

    The right arm enters the shelf bent and extends through the curtain
    aperture, then holds to keep the curtain aside; the left arm repeats the
    bent entry, grasps the object, lifts it out and releases it over the bin.
    """
    r_bent = _pose(j4=SHELF_ELBOW_UP)
    r_turned = _pose(j1=SHELF_RIGHT_REACH_YAW, j4=SHELF_ELBOW_UP)
    r_in = _pose(j1=SHELF_RIGHT_REACH_YAW)
    l_bent = _pose(j4=SHELF_ELBOW_UP)
    l_turned = _pose(j1=SHELF_LEFT_GRASP_YAW, j4=SHELF_ELBOW_UP)
    l_at_obj = _pose(j1=SHELF_LEFT_GRASP_YAW)
    l_lifted = _pose(j1=SHELF_LEFT_GRASP_YAW, j4=SHELF_ELBOW_UP)
    l_at_bin = _pose(j1=SHELF_LEFT_BIN_YAW, j4=SHELF_ELBOW_UP)
    OPEN, SHUT = GRIPPER_OPEN, GRIPPER_CLOSED_ON_OBJECT
    return [
        Keyframe(0.0, HOME, HOME),
        Keyframe(2.0, HOME, HOME),
        Keyframe(8.0, HOME, r_bent),
        Keyframe(18.0, HOME, r_turned),
        Keyframe(26.0, HOME, r_in),
        Keyframe(32.0, l_bent, r_in),
        Keyframe(42.0, l_turned, r_in),
        Keyframe(50.0, l_at_obj, r_in),
        Keyframe(54.0, l_at_obj, r_in, width_left=SHUT),
        Keyframe(62.0, l_lifted, r_in, width_left=SHUT),
        Keyframe(70.0, l_at_bin, r_in, width_left=SHUT),
        Keyframe(73.0, l_at_bin, r_in, width_left=OPEN),
        Keyframe(75.0, l_at_bin, r_in, width_left=OPEN),
    ]


def sample_keyframes(
    keyframes: Sequence[Keyframe], t_s: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Linear interpolation of (joints (2, 7), widths (2,)) at time ``t_s``."""
    if t_s <= keyframes[0].t_s:
        k = keyframes[0]
        return (
            np.array([k.left, k.right]),
            np.array([k.width_left, k.width_right]),
        )
    for a, b in zip(keyframes, keyframes[1:]):
        if t_s <= b.t_s:
            span = b.t_s - a.t_s
            w = 0.0 if span <= 0 else (t_s - a.t_s) / span
            joints = (1 - w) * np.array([a.left, a.right]) + w * np.array([b.left, b.right])
            widths = (1 - w) * np.array([a.width_left, a.width_right]) + w * np.array(
                [b.width_left, b.width_right]
            )
            return joints, widths
    k = keyframes[-1]
    return np.array([k.left, k.right]), np.array([k.width_left, k.width_right])


def joints_to_ticks(
    cal: CalibrationRecord,
    joints: np.ndarray,
    widths: np.ndarray,
    res: float = DEFAULT_ENCODER_RESOLUTION_RAD,
) -> np.ndarray:
    """Inverse calibration: robot-domain pose -> nearest integer ticks."""
    ticks = np.zeros(16, dtype=np.int64)
    for arm_index in range(2):
        arm_cal = cal.arm(arm_index)
        for j in range(ARM_JOINTS):
            exact = invert_joint_map(arm_cal.joints[j], float(joints[arm_index, j]), res)
            ticks[arm_index * 8 + j] = int(round(exact))
        g = arm_cal.gripper
        frac = (float(widths[arm_index]) - g.width_closed) / (g.width_open - g.width_closed)
        ticks[arm_index * 8 + ARM_JOINTS] = int(round(g.p_closed + frac * (g.p_open - g.p_closed)))
    return ticks


def keyframes_to_script(
    keyframes: Sequence[Keyframe],
    cal: CalibrationRecord,
    rate_hz: float = 30.0,
    duration_s: Optional[float] = None,
    res: float = DEFAULT_ENCODER_RESOLUTION_RAD,
) -> List[Timestamped[EncoderFrame]]:
    """Sample keyframes into a timestamped encoder tick script."""
    if not (rate_hz > 0.0):
        raise InvalidInputError(f"script rate must be > 0, got {rate_hz}")
    end = duration_s if duration_s is not None else keyframes[-1].t_s
    period = int(round(NS_PER_S / rate_hz))
    n = max(1, math.floor(rate_hz * end))
    out = []
    for k in range(n):
        t = k * period
        joints, widths = sample_keyframes(keyframes, t / NS_PER_S)
        ticks = joints_to_ticks(cal, joints, widths, res)
        out.append(Timestamped(t=t, value=EncoderFrame(ticks=ticks, resolution_rad=res, t=t)))
    return out


def task_keyframes(task_id: str, arms: Sequence[str] = ("right", "left")) -> List[Keyframe]:
    if task_id == "gather_balls":
        return gather_keyframes(arms)
    if task_id == "curtained_shelf":
        return shelf_keyframes()
    raise InvalidInputError(f"no scripted trajectory for task {task_id!r}")
