"""Packaged default configuration.

The shipped robot geometry (link lengths, joint limits, base placement) is
illustrative: it is a plausible desk-scale stand-in, not measured hardware.
Everything here can be overridden by pointing the CLI at alternative config
files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Tuple

from .calibration import JointConstraint, TaskConstraint
from .core import ArmDescriptor
from .errors import ConfigurationError, SchemaError
from .kinematics import KinematicChain

_DATA_PACKAGE = "exoteleop.data"

ROBOT_FILE = "robot.json"
WORLD_GATHER_FILE = "world_gather.json"
WORLD_SHELF_FILE = "world_shelf.json"
CALIBRATION_FILE = "calibration_default.json"


def load_json(path_or_name) -> dict:
    """Load a JSON document from an explicit path or from packaged data."""
    p = Path(path_or_name)
    if p.exists():
        return json.loads(p.read_text())
    try:
        ref = resources.files(_DATA_PACKAGE).joinpath(str(path_or_name))
        return json.loads(ref.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path_or_name}")


def default_path(name: str) -> Path:
    """Filesystem path of a packaged default config (for CLI display)."""
    return Path(str(resources.files(_DATA_PACKAGE).joinpath(name)))


@dataclass(frozen=True)
class RobotModel:
    """Dual-arm robot description: descriptors, chains and collision hulls."""

    descriptors: Tuple[ArmDescriptor, ArmDescriptor]
    chains: Tuple[KinematicChain, KinematicChain]
    capsule_radii: Tuple[float, ...]
    velocity_cap_rad_s: float
    gripper_velocity_cap_m_s: float
    k_signs: Tuple[Tuple[float, ...], Tuple[float, ...]]
    encoder_tick_range: Tuple[Tuple[int, int], ...]

    @property
    def arm_joints(self) -> int:
        return self.chains[0].joint_count


def load_robot(path_or_name=ROBOT_FILE) -> RobotModel:
    cfg = load_json(path_or_name)
    descriptors = []
    chains = []
    k_signs = []
    for arm_id in ("left", "right"):
        arm = cfg["arms"][arm_id]
        descriptors.append(
            ArmDescriptor(
                name=arm_id,
                dof=int(arm["dof"]),
                joint_limits=tuple(tuple(pair) for pair in arm["joint_limits"]),
                gripper_width_range=tuple(arm["gripper_width_range"]),
            )
        )
        chain_cfg = dict(arm["chain"])
        chain_cfg.setdefault("name", arm_id)
        chains.append(KinematicChain.from_config(chain_cfg))
        k_signs.append(tuple(float(s) for s in arm["k_signs"]))
    tick_range = tuple(tuple(pair) for pair in cfg["encoder_tick_range"])
    if len(tick_range) != descriptors[0].dof:
        raise SchemaError("encoder_tick_range must list one (lo, hi) pair per DoF")
    return RobotModel(
        descriptors=(descriptors[0], descriptors[1]),
        chains=(chains[0], chains[1]),
        capsule_radii=tuple(float(r) for r in cfg["capsule_radii"]),
        velocity_cap_rad_s=float(cfg.get("velocity_cap_rad_s", 1.0)),
        gripper_velocity_cap_m_s=float(cfg.get("gripper_velocity_cap_m_s", 0.25)),
        k_signs=(k_signs[0], k_signs[1]),
        encoder_tick_range=tick_range,
    )


def load_task_constraint(cfg: dict, task_id: str) -> Optional[TaskConstraint]:
    """Build a TaskConstraint from the optional ``task_constraints`` block."""
    table = cfg.get("task_constraints", {})
    if task_id not in table:
        return None
    entry = table[task_id]

    def side(entries):
        out = []
        for e in entries:
            if e is None:
                out.append(None)
            else:
                out.append(
                    JointConstraint(
                        q_t_min=float(e["q_t_min"]),
                        q_t_max=float(e["q_t_max"]),
                        k=float(e["k"]) if e.get("k") is not None else None,
                    )
                )
        return tuple(out)

    return TaskConstraint(task_id=task_id, left=side(entry["left"]), right=side(entry["right"]))
