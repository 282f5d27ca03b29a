"""Shared numeric types and unit conventions.

Every module in this package speaks the same units: joint angles in radians,
lengths in meters, timestamps as monotonic integer nanoseconds.  Encoder
readings are raw integer ticks; the single tick->radian conversion constant
lives in :class:`EncoderFrame` so that unit conversion happens in exactly one
place.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Generic, Sequence, Tuple, TypeVar

import numpy as np

from .errors import InvalidInputError, InvalidRangeError, SchemaError

DEG = math.pi / 180.0

#: Radians per encoder tick (0.08 degree encoders).
DEFAULT_ENCODER_RESOLUTION_RAD = 0.08 * DEG

#: Joints per arm driven through the affine encoder map (gripper excluded).
ARM_JOINTS = 7
#: Degrees of freedom per arm including the gripper.
ARM_DOF = 8
#: Encoder channels in a dual-arm frame (8 left + 8 right).
DUAL_ARM_TICKS = 16

NS_PER_S = 1_000_000_000

#: Any joint value beyond this magnitude is treated as a probable unit bug
#: (a degree-valued vector sneaking through a radian interface).
ANGLE_SANITY_LIMIT = 4.0 * 2.0 * math.pi

T = TypeVar("T")


def clamp(x: float, lo: float, hi: float) -> float:
    """Clamp ``x`` into ``[lo, hi]``.

    Raises:
        InvalidRangeError: if ``lo > hi``.
    """
    if lo > hi:
        raise InvalidRangeError(f"clamp range inverted: lo={lo} > hi={hi}")
    return min(max(x, lo), hi)


def quantize_to_resolution(angle_rad: float, resolution_rad: float) -> int:
    """Convert an angle to integer encoder ticks.

    Rounds half-away-from-zero, matching typical encoder ADC behavior and
    keeping the map symmetric about zero.

    Raises:
        InvalidInputError: if the angle is non-finite or the resolution is
            not strictly positive.
    """
    if not math.isfinite(angle_rad):
        raise InvalidInputError(f"cannot quantize non-finite angle {angle_rad!r}")
    if not (resolution_rad > 0.0):
        raise InvalidInputError(f"resolution must be > 0, got {resolution_rad!r}")
    ratio = abs(angle_rad) / resolution_rad
    n = math.floor(ratio)
    frac = ratio - n
    # Unit conversions (degree-specified resolutions) leave the quotient a few
    # ulps off an exact half; snap those to the half so the rule stays exact.
    half_tol = 8.0 * sys.float_info.epsilon * max(1.0, ratio)
    if frac >= 0.5 - half_tol:
        n += 1
    return -n if angle_rad < 0 else n


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ArmDescriptor:
    """Static description of one arm: DoF count, limits and gripper range.

    ``joint_limits`` carries one ``(lo, hi)`` pair per DoF.  The first seven
    entries are joint angle limits in radians; the last entry is the gripper
    limit interval and equals ``gripper_width_range`` (meters).
    """

    name: str
    dof: int
    joint_limits: Tuple[Tuple[float, float], ...]
    gripper_width_range: Tuple[float, float]

    def __post_init__(self):
        if self.dof != len(self.joint_limits):
            raise SchemaError(
                f"arm {self.name!r}: dof={self.dof} but {len(self.joint_limits)} limit pairs"
            )
        for i, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                raise InvalidRangeError(f"arm {self.name!r} joint {i}: limits [{lo}, {hi}] inverted")
        w_lo, w_hi = self.gripper_width_range
        if not (w_hi > w_lo >= 0.0):
            raise InvalidRangeError(f"arm {self.name!r}: gripper width range [{w_lo}, {w_hi}]")

    @property
    def arm_joint_limits(self) -> Tuple[Tuple[float, float], ...]:
        """Limit pairs for the seven arm joints only."""
        return self.joint_limits[: self.dof - 1]


@dataclass(frozen=True)
class JointVector:
    """Ordered per-arm DoF values.

    Entries 0..6 are joint angles in radians; entry 7 carries the gripper DoF
    (handle angle on the exoskeleton side, opening width in meters on the
    robot side).  Validated for length and finiteness; the angle entries are
    additionally sanity-checked against :data:`ANGLE_SANITY_LIMIT`.
    """

    values: np.ndarray
    arm_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise SchemaError(f"joint vector must be 1-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(f"joint vector for {self.arm_id!r} contains non-finite values")
        if np.any(np.abs(values[:ARM_JOINTS]) > ANGLE_SANITY_LIMIT):
            raise InvalidInputError(
                f"joint angles for {self.arm_id!r} exceed {ANGLE_SANITY_LIMIT:.2f} rad; "
                "degree-valued input?"
            )
        object.__setattr__(self, "values", _freeze(values))

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def require_dof(self, descriptor: ArmDescriptor) -> "JointVector":
        if len(self) != descriptor.dof:
            raise SchemaError(
                f"joint vector length {len(self)} != {descriptor.name!r} dof {descriptor.dof}"
            )
        return self


@dataclass(frozen=True)
class EncoderFrame:
    """One dual-arm encoder sample: 16 integer ticks plus the tick size.

    Tick order is left arm channels 0-7 followed by right arm channels 8-15,
    with the gripper on channel 7 of each arm.
    """

    ticks: np.ndarray
    resolution_rad: float = DEFAULT_ENCODER_RESOLUTION_RAD
    t: int = 0

    def __post_init__(self):
        ticks = np.asarray(self.ticks)
        if ticks.shape != (DUAL_ARM_TICKS,):
            raise SchemaError(
                f"encoder frame needs {DUAL_ARM_TICKS} ticks, got shape {ticks.shape}"
            )
        if not np.issubdtype(ticks.dtype, np.integer):
            if not np.all(ticks == np.floor(ticks)):
                raise SchemaError("encoder ticks must be integers")
        if not (self.resolution_rad > 0.0):
            raise InvalidRangeError(f"encoder resolution must be > 0, got {self.resolution_rad}")
        object.__setattr__(self, "ticks", _freeze(ticks.astype(np.int64)))

    def arm_ticks(self, arm_index: int) -> np.ndarray:
        """Ticks for one arm: 0 = left, 1 = right."""
        return self.ticks[arm_index * ARM_DOF : (arm_index + 1) * ARM_DOF]


@dataclass(frozen=True)
class Timestamped(Generic[T]):
    """A value stamped with monotonic nanoseconds."""

    t: int
    value: T


def require_monotonic(times: Sequence[int], what: str = "timestamps") -> None:
    """Raise SchemaError unless the sequence is strictly increasing."""
    for a, b in zip(times, list(times)[1:]):
        if b <= a:
            raise SchemaError(f"{what} must be strictly increasing ({a} -> {b})")


def dual_arm_frame(
    left_ticks: Sequence[int],
    right_ticks: Sequence[int],
    t: int = 0,
    resolution_rad: float = DEFAULT_ENCODER_RESOLUTION_RAD,
) -> EncoderFrame:
    """Build an EncoderFrame from per-arm tick lists."""
    ticks = np.concatenate([np.asarray(left_ticks), np.asarray(right_ticks)])
    return EncoderFrame(ticks=ticks, resolution_rad=resolution_rad, t=t)
