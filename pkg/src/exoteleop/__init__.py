"""Dual-arm exoskeleton teleoperation middleware.

Encoder streams map through a captured calibration into joint-space robot
commands; sessions record multi-modal demonstrations in teleoperated and
in-the-wild domains; a weighted k-NN policy with action chunking and
temporal ensembling replays the skills inside a kinematic simulator with
capsule collision checking and task scoring.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ARM_DOF,
    ARM_JOINTS,
    DEFAULT_ENCODER_RESOLUTION_RAD,
    DUAL_ARM_TICKS,
    ArmDescriptor,
    EncoderFrame,
    JointVector,
    Timestamped,
    clamp,
    quantize_to_resolution,
)
