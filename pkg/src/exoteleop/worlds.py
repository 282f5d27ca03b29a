"""The two desk-scale task worlds.

Gather-balls: two seeded clusters of 40 balls each on a table plane, to be
swept into a central triangular goal region with the arm surfaces.  Ball
motion is quasi-static: after each step, any ball whose center lies inside a
link's table-plane footprint is displaced the minimal distance needed to
exit it.

Curtained-shelf: a shelf behind a curtain plane, a graspable object inside
and a drop bin.  The curtain is a 1-D displacement scalar driven by the
right arm's penetration depth, latched while contact persists.  Five stage
flags (reach_in, push_aside, approach, grasp, throw) latch monotonically and
in order; a raw condition firing out of order is suppressed and logged as a
protocol violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .collision import Capsule, point_segment_distance, points_segment_distance_2d
from .errors import InvalidStateError, SchemaError

STAGE_NAMES = ("reach_in", "push_aside", "approach", "grasp", "throw")

_EXIT_MARGIN = 1e-6
_MAX_PUSH_PASSES = 6


@dataclass
class StepContext:
    """Per-step geometry handed from the simulator to the active world."""

    t: int
    capsules: Tuple[Tuple[Capsule, ...], Tuple[Capsule, ...]]  # (left, right)
    tcps: Tuple[np.ndarray, np.ndarray]  # world TCP positions
    widths: np.ndarray  # (2,) gripper widths


class GatherBallsWorld:
    """Ball-gathering table world with a triangular goal region."""

    world_type = "gather_balls"

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.task_id = cfg.get("task_id", "gather_balls")
        self.n_grippers = int(cfg.get("n_grippers", 0))
        self.table_x = tuple(cfg["table"]["x"])
        self.table_y = tuple(cfg["table"]["y"])
        self.triangle = np.asarray(cfg["triangle"], dtype=np.float64)
        if self.triangle.shape != (3, 2):
            raise SchemaError("triangle must have three (x, y) vertices")
        self.ball_radius = float(cfg.get("ball_radius", 0.0125))
        self.push_height = float(cfg.get("push_height", 0.03))
        self.clusters = cfg["clusters"]
        self.balls = np.zeros((0, 2))
        self.cluster_of = np.zeros(0, dtype=np.int8)
        self.seed = None

    def reset(self, seed: int) -> None:
        rng = np.random.default_rng(int(seed))
        balls = []
        cluster_of = []
        for idx, name in enumerate(("left", "right")):
            spec = self.clusters[name]
            count = int(spec["count"])
            xs = rng.uniform(spec["x"][0], spec["x"][1], size=count)
            ys = rng.uniform(spec["y"][0], spec["y"][1], size=count)
            balls.append(np.stack([xs, ys], axis=1))
            cluster_of.append(np.full(count, idx, dtype=np.int8))
        self.balls = np.concatenate(balls)
        self.cluster_of = np.concatenate(cluster_of)
        self.seed = int(seed)
        if self.balls.shape[0] != 80:
            raise SchemaError(f"gather-balls reset expects 80 balls, got {self.balls.shape[0]}")
        self._clamp_to_table()

    def _clamp_to_table(self) -> None:
        r = self.ball_radius
        self.balls[:, 0] = np.clip(self.balls[:, 0], self.table_x[0] + r, self.table_x[1] - r)
        self.balls[:, 1] = np.clip(self.balls[:, 1], self.table_y[0] + r, self.table_y[1] - r)

    def footprints(self, ctx: StepContext) -> List[Tuple[np.ndarray, np.ndarray, float]]:
        """Table-plane footprints of all capsules low enough to touch balls."""
        out = []
        for arm_caps in ctx.capsules:
            for cap in arm_caps:
                if cap.z_min <= self.push_height:
                    out.append((cap.a[:2], cap.b[:2], cap.radius + self.ball_radius))
        return out

    def update(self, ctx: StepContext) -> List[Tuple[int, str]]:
        """Quasi-static ball pushing; returns no world events."""
        feet = self.footprints(ctx)
        if not feet:
            return []
        balls = self.balls
        for _ in range(_MAX_PUSH_PASSES):
            moved = False
            for a, b, big_r in feet:
                d = points_segment_distance_2d(balls, a, b)
                inside = d < big_r
                if not np.any(inside):
                    continue
                moved = True
                seg = b - a
                seg_len2 = float(seg @ seg)
                pts = balls[inside]
                if seg_len2 <= 1e-12:
                    closest = np.broadcast_to(a, pts.shape).copy()
                else:
                    tpar = np.clip((pts - a) @ seg / seg_len2, 0.0, 1.0)
                    closest = a + tpar[:, None] * seg
                delta = pts - closest
                dist = np.linalg.norm(delta, axis=1)
                # Balls exactly on the axis exit along a fixed perpendicular.
                if seg_len2 > 1e-12:
                    perp = np.array([-seg[1], seg[0]]) / np.sqrt(seg_len2)
                else:
                    perp = np.array([0.0, 1.0])
                unit = np.where(dist[:, None] > 1e-12, delta / np.maximum(dist, 1e-12)[:, None], perp)
                balls[inside] = closest + unit * (big_r + _EXIT_MARGIN)
            if not moved:
                break
        self._clamp_to_table()
        return []

    def snapshot(self) -> dict:
        return {
            "type": self.world_type,
            "balls": self.balls.copy(),
            "cluster_of": self.cluster_of.copy(),
            "triangle": self.triangle.copy(),
            "seed": self.seed,
        }

    def pack_state(self) -> bytes:
        return self.balls.tobytes() + self.cluster_of.tobytes()


class CurtainedShelfWorld:
    """Shelf task world: curtain scalar, graspable object, drop bin."""

    world_type = "curtained_shelf"

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.task_id = cfg.get("task_id", "curtained_shelf")
        self.n_grippers = int(cfg.get("n_grippers", 1))
        cur = cfg["curtain"]
        self.plane_y = float(cur["plane_y"])
        self.aperture_x = tuple(cur["aperture_x"])
        self.aperture_z = tuple(cur["aperture_z"])
        self.max_displacement = float(cur["max_displacement"])
        self.push_threshold = float(cur["push_aside_threshold"])
        obj = cfg["object"]
        self.object_center = np.asarray(obj["center"], dtype=np.float64)
        self.object_jitter = float(obj.get("jitter", 0.0))
        self.object_width = float(obj["width"])
        self.object_half_height = float(obj.get("half_height", 0.05))
        self.bin_box = np.array(
            [cfg["bin"]["x"], cfg["bin"]["y"], cfg["bin"]["z"]], dtype=np.float64
        )
        stages = cfg.get("stages", {})
        self.approach_radius = float(stages.get("approach_radius", 0.1))
        self.grasp_radius = float(stages.get("grasp_radius", 0.05))
        self.shelf_capsules = tuple(
            Capsule(
                a=np.asarray(c["a"], dtype=np.float64),
                b=np.asarray(c["b"], dtype=np.float64),
                radius=float(c["radius"]),
            )
            for c in cfg.get("shelf_capsules", [])
        )
        self.curtain_displacement = 0.0
        self.object_pos = self.object_center.copy()
        self.stage_flags = dict.fromkeys(STAGE_NAMES, False)
        self.grasped = False
        self.grab_offset = np.zeros(3)
        self.seed = None

    def reset(self, seed: int) -> None:
        rng = np.random.default_rng(int(seed))
        jitter = rng.uniform(-self.object_jitter, self.object_jitter, size=2)
        self.object_pos = self.object_center.copy()
        self.object_pos[:2] += jitter
        self.curtain_displacement = 0.0
        self.stage_flags = dict.fromkeys(STAGE_NAMES, False)
        self.grasped = False
        self.grab_offset = np.zeros(3)
        self.seed = int(seed)

    def _curtain_penetration(self, right_caps: Sequence[Capsule]) -> float:
        pen = 0.0
        for cap in right_caps:
            for p in (cap.a, cap.b):
                if not (self.aperture_x[0] - cap.radius <= p[0] <= self.aperture_x[1] + cap.radius):
                    continue
                if not (self.aperture_z[0] - cap.radius <= p[2] <= self.aperture_z[1] + cap.radius):
                    continue
                pen = max(pen, float(p[1]) + cap.radius - self.plane_y)
        return max(pen, 0.0)

    def _in_bin(self, p: np.ndarray) -> bool:
        return bool(
            self.bin_box[0, 0] <= p[0] <= self.bin_box[0, 1]
            and self.bin_box[1, 0] <= p[1] <= self.bin_box[1, 1]
            and self.bin_box[2, 0] <= p[2] <= self.bin_box[2, 1]
        )

    def update(self, ctx: StepContext) -> List[Tuple[int, str]]:
        events: List[Tuple[int, str]] = []
        left_tcp = ctx.tcps[0]
        right_tcp = ctx.tcps[1]
        left_width = float(ctx.widths[0])

        pen = self._curtain_penetration(ctx.capsules[1])
        if pen > 0.0:
            self.curtain_displacement = max(
                self.curtain_displacement, min(pen, self.max_displacement)
            )
        else:
            self.curtain_displacement = 0.0

        # Object attachment: rigid follow while held, drop on release.
        near_object = float(np.linalg.norm(left_tcp - self.object_pos)) <= self.grasp_radius
        if self.grasped:
            if left_width < self.object_width:
                self.object_pos = left_tcp + self.grab_offset
            else:
                self.grasped = False
                self.object_pos = self.object_pos.copy()
                self.object_pos[2] = self.object_half_height
        elif self.stage_flags["grasp"] and near_object and left_width < self.object_width:
            self.grasped = True
            self.grab_offset = self.object_pos - left_tcp

        in_aperture = (
            self.aperture_x[0] <= float(right_tcp[0]) <= self.aperture_x[1]
            and self.aperture_z[0] <= float(right_tcp[2]) <= self.aperture_z[1]
        )
        raw = {
            "reach_in": float(right_tcp[1]) > self.plane_y and in_aperture,
            "push_aside": self.curtain_displacement > self.push_threshold,
            "approach": float(np.linalg.norm(left_tcp - self.object_pos)) <= self.approach_radius,
            "grasp": near_object and left_width < self.object_width,
            "throw": self._in_bin(self.object_pos),
        }
        previous_ok = True
        for name in STAGE_NAMES:
            if self.stage_flags[name]:
                previous_ok = True
                continue
            if raw[name]:
                if previous_ok:
                    self.stage_flags[name] = True
                    events.append((ctx.t, f"stage:{name}"))
                    if name == "grasp":
                        self.grasped = True
                        self.grab_offset = self.object_pos - left_tcp
                else:
                    events.append((ctx.t, f"protocol_violation:{name}"))
            previous_ok = self.stage_flags[name]
        return events

    def snapshot(self) -> dict:
        return {
            "type": self.world_type,
            "curtain_displacement": self.curtain_displacement,
            "object_pos": self.object_pos.copy(),
            "stage_flags": dict(self.stage_flags),
            "grasped": self.grasped,
            "seed": self.seed,
        }

    def pack_state(self) -> bytes:
        flags = np.array([self.stage_flags[n] for n in STAGE_NAMES], dtype=np.uint8)
        return (
            np.float64(self.curtain_displacement).tobytes()
            + self.object_pos.tobytes()
            + flags.tobytes()
            + np.uint8(self.grasped).tobytes()
        )


def load_world(cfg: dict):
    """Instantiate a world object from its config dict (unseeded)."""
    world_type = cfg.get("type")
    if world_type == "gather_balls":
        return GatherBallsWorld(cfg)
    if world_type == "curtained_shelf":
        return CurtainedShelfWorld(cfg)
    raise SchemaError(f"unknown world type: {world_type!r}")


def require_world(world, world_type: str):
    """Raise InvalidStateError unless the world is of the expected type."""
    if getattr(world, "world_type", None) != world_type:
        raise InvalidStateError(
            f"expected {world_type!r} world, got {getattr(world, 'world_type', None)!r}"
        )
    return world


def point_in_triangle_credit(point: np.ndarray, triangle: np.ndarray, tol: float = 1e-9) -> float:
    """Goal credit for one ball center: 1 inside, 0.5 on an edge, 0 outside.

    "On an edge" means within ``tol`` of any triangle edge segment, applied
    symmetrically to points just inside and just outside.
    """
    p = np.asarray(point, dtype=np.float64)
    tri = np.asarray(triangle, dtype=np.float64)
    for i in range(3):
        if point_segment_distance(p, tri[i], tri[(i + 1) % 3]) <= tol:
            return 0.5
    signs = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        signs.append(cross)
    if all(s > 0 for s in signs) or all(s < 0 for s in signs):
        return 1.0
    return 0.0
