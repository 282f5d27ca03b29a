import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exoteleop.core import (
    ANGLE_SANITY_LIMIT,
    DEFAULT_ENCODER_RESOLUTION_RAD,
    DEG,
    ArmDescriptor,
    EncoderFrame,
    JointVector,
    clamp,
    dual_arm_frame,
    quantize_to_resolution,
)
from exoteleop.errors import InvalidInputError, InvalidRangeError, SchemaError

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e9, max_value=1e9)


class TestClamp:
    def test_in_range_identity(self):
        assert clamp(0.3, -1.0, 1.0) == 0.3

    def test_upper_forced(self):
        assert clamp(2.0, -1.0, 1.0) == 1.0

    def test_lower_forced(self):
        assert clamp(-5.0, -1.0, 1.0) == -1.0

    def test_inverted_range_rejected(self):
        with pytest.raises(InvalidRangeError):
            clamp(0.0, 1.0, -1.0)

    @given(x=finite, lo=finite, hi=finite)
    def test_idempotent_and_bounded(self, x, lo, hi):
        if lo > hi:
            lo, hi = hi, lo
        once = clamp(x, lo, hi)
        assert lo <= once <= hi
        assert clamp(once, lo, hi) == once


class TestQuantize:
    def test_zero(self):
        assert quantize_to_resolution(0.0, DEFAULT_ENCODER_RESOLUTION_RAD) == 0

    def test_nearest_multiple(self):
        # 0.10 deg is closer to 1 tick (0.08 deg) than to 2 (0.16 deg).
        assert quantize_to_resolution(0.10 * DEG, 0.08 * DEG) == 1

    def test_half_rounds_away_from_zero(self):
        # 0.12/0.08 = 1.5 exactly; away-from-zero gives 2 (and -2 mirrored).
        assert quantize_to_resolution(0.12 * DEG, 0.08 * DEG) == 2
        assert quantize_to_resolution(-0.12 * DEG, 0.08 * DEG) == -2

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            quantize_to_resolution(float("nan"), 1.0)
        with pytest.raises(InvalidInputError):
            quantize_to_resolution(float("inf"), 1.0)

    def test_rejects_bad_resolution(self):
        with pytest.raises(InvalidInputError):
            quantize_to_resolution(1.0, 0.0)

    @given(angle=st.floats(min_value=-50.0, max_value=50.0),
           res=st.floats(min_value=1e-5, max_value=1.0))
    def test_reconstruction_error_bound(self, angle, res):
        ticks = quantize_to_resolution(angle, res)
        assert abs(ticks * res - angle) <= res / 2 + 1e-12


class TestJointVector:
    def test_length_and_finiteness(self):
        jv = JointVector(values=np.zeros(8), arm_id="left")
        assert len(jv) == 8
        with pytest.raises(InvalidInputError):
            JointVector(values=np.array([np.nan] * 8), arm_id="left")

    def test_degree_valued_vector_rejected(self):
        # 90 "degrees" smuggled in as radians exceeds the sanity limit.
        vals = np.zeros(8)
        vals[0] = 90.0
        assert 90.0 > ANGLE_SANITY_LIMIT
        with pytest.raises(InvalidInputError):
            JointVector(values=vals, arm_id="left")

    def test_dof_check(self):
        desc = ArmDescriptor(
            name="left", dof=8,
            joint_limits=tuple((-1.0, 1.0) for _ in range(7)) + ((0.0, 0.085),),
            gripper_width_range=(0.0, 0.085),
        )
        with pytest.raises(SchemaError):
            JointVector(values=np.zeros(7), arm_id="left").require_dof(desc)


class TestEncoderFrame:
    def test_requires_sixteen_ticks(self):
        with pytest.raises(SchemaError):
            EncoderFrame(ticks=np.zeros(15, dtype=np.int64))

    def test_resolution_positive(self):
        with pytest.raises(InvalidRangeError):
            EncoderFrame(ticks=np.zeros(16, dtype=np.int64), resolution_rad=0.0)

    def test_default_resolution_is_0p08_degrees(self):
        frame = dual_arm_frame([0] * 8, [0] * 8)
        assert frame.resolution_rad == pytest.approx(0.08 * math.pi / 180.0, abs=0)

    def test_arm_slices(self):
        frame = dual_arm_frame(range(8), range(100, 108))
        assert list(frame.arm_ticks(0)) == list(range(8))
        assert list(frame.arm_ticks(1)) == list(range(100, 108))


class TestArmDescriptor:
    def test_limit_count_must_match_dof(self):
        with pytest.raises(SchemaError):
            ArmDescriptor(
                name="x", dof=8,
                joint_limits=tuple((-1.0, 1.0) for _ in range(7)),
                gripper_width_range=(0.0, 0.085),
            )

    def test_inverted_limits_rejected(self):
        with pytest.raises(InvalidRangeError):
            ArmDescriptor(
                name="x", dof=1, joint_limits=((1.0, -1.0),),
                gripper_width_range=(0.0, 0.085),
            )
