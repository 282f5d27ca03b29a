"""Demonstration recording, storage, replay and resampling.

A demonstration is one JSON header line followed by fixed-stride
little-endian binary frame records (schema ``airexo-demo/1``).  Constant
stride gives constant-time frame seeks and append-friendly recording; the
header is human-diffable.  Images are not stored inline: frames carry
opaque blob references only.

Frame semantics: ``joint_pos`` holds the robot-domain joint *targets* (the
action commanded at that tick; for in-the-wild captures this is the
calibration-mapped exoskeleton pose).  TCP fields are forward kinematics of
``joint_pos``; replay re-commands the stored sequence, which makes a
virtual-time replay reproduce the original simulation bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .calibration import CalibrationRecord, map_frame
from .clock import VirtualClock
from .config import RobotModel
from .control_loop import (
    LoopConfig,
    LoopStats,
    TickEvent,
    new_session_id,
    run_teleop_session,
    tick_times,
)
from .core import DUAL_ARM_TICKS, NS_PER_S
from .errors import ConfigurationError, InvalidInputError, InvalidStateError, SchemaError
from .kinematics import fk_points, tcp_twist
from .simulator import Command

DEMO_SCHEMA = "airexo-demo/1"

DOMAIN_TELEOP = "teleoperated"
DOMAIN_WILD = "in_the_wild"

_BLOB_REF_BYTES = 40

_QUAT_TOL = 1e-6


def _frame_dtype(n_grippers: int, n_cameras: int) -> np.dtype:
    fields = [
        ("t", "<i8"),
        ("joint_pos", "<f8", (14,)),
        ("joint_vel", "<f8", (14,)),
        ("tcp_pos", "<f8", (14,)),
        ("tcp_vel", "<f8", (12,)),
        ("base_ft", "<f8", (12,)),
        ("tcp_ft", "<f8", (12,)),
    ]
    if n_grippers:
        fields.append(("gripper", "<f8", (6 * n_grippers,)))
    fields.append(("encoder", "<i4", (DUAL_ARM_TICKS,)))
    if n_cameras:
        fields.append(("image_refs", f"S{_BLOB_REF_BYTES}", (n_cameras,)))
    return np.dtype(fields)


@dataclass
class Demonstration:
    """An ordered multi-modal recording of one session."""

    id: str
    domain: str
    task_id: str
    calibration_ref: str
    n_grippers: int
    n_cameras: int
    world: dict
    metadata: dict
    created_at: int
    records: np.ndarray  # structured array, one element per frame

    def __post_init__(self):
        if self.domain not in (DOMAIN_TELEOP, DOMAIN_WILD):
            raise SchemaError(f"unknown domain {self.domain!r}")
        n = len(self.records)
        if n < 2:
            raise SchemaError(f"demonstration needs >= 2 frames, got {n}")
        t = self.records["t"]
        if not np.all(np.diff(t) > 0):
            raise SchemaError("frame timestamps must be strictly increasing")
        if self.domain == DOMAIN_WILD and not self.calibration_ref:
            raise ConfigurationError("in-the-wild demonstration requires a calibration_ref")
        for sl in (slice(3, 7), slice(10, 14)):
            norms = np.linalg.norm(self.records["tcp_pos"][:, sl], axis=1)
            if np.any(np.abs(norms - 1.0) > _QUAT_TOL):
                raise SchemaError("tcp quaternion blocks must be unit norm")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def t(self) -> np.ndarray:
        return self.records["t"]

    @property
    def joint_pos(self) -> np.ndarray:
        return self.records["joint_pos"]

    @property
    def mean_hz(self) -> float:
        span_s = (int(self.t[-1]) - int(self.t[0])) / NS_PER_S
        return (len(self) - 1) / span_s

    def gripper_widths(self) -> np.ndarray:
        """(n, n_grippers) observed widths; empty when no grippers recorded."""
        if self.n_grippers == 0:
            return np.zeros((len(self), 0))
        g = self.records["gripper"].reshape(len(self), self.n_grippers, 6)
        return g[:, :, 0]

    def gripper_cmd_widths(self) -> np.ndarray:
        if self.n_grippers == 0:
            return np.zeros((len(self), 0))
        g = self.records["gripper"].reshape(len(self), self.n_grippers, 6)
        return g[:, :, 3]

    def actions(self) -> np.ndarray:
        """(n, 14 + n_grippers) per-frame actions: joints plus commanded widths."""
        return np.concatenate([self.joint_pos, self.gripper_cmd_widths()], axis=1)

    def header(self) -> dict:
        return {
            "schema": DEMO_SCHEMA,
            "id": self.id,
            "domain": self.domain,
            "task_id": self.task_id,
            "calibration_ref": self.calibration_ref,
            "n_grippers": self.n_grippers,
            "n_cameras": self.n_cameras,
            "world": self.world,
            "metadata": self.metadata,
            "created_at": self.created_at,
        }


def write_demo(demo: Demonstration, path) -> None:
    header = json.dumps(demo.header(), sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as f:
        f.write(header.encode("utf-8"))
        f.write(b"\n")
        f.write(demo.records.tobytes())


def read_demo(path) -> Demonstration:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("schema") != DEMO_SCHEMA:
        raise SchemaError(f"unsupported demo schema {header.get('schema')!r}")
    dtype = _frame_dtype(int(header["n_grippers"]), int(header["n_cameras"]))
    body = raw[nl + 1 :]
    if len(body) % dtype.itemsize:
        raise SchemaError(
            f"demo body length {len(body)} is not a multiple of stride {dtype.itemsize}"
        )
    records = np.frombuffer(body, dtype=dtype).copy()
    return Demonstration(
        id=str(header["id"]),
        domain=str(header["domain"]),
        task_id=str(header["task_id"]),
        calibration_ref=str(header["calibration_ref"]),
        n_grippers=int(header["n_grippers"]),
        n_cameras=int(header["n_cameras"]),
        world=header["world"],
        metadata=header["metadata"],
        created_at=int(header["created_at"]),
        records=records,
    )


def demo_info(demo: Demonstration) -> dict:
    """Summary dict used by the CLI ``demo info`` command."""
    return {
        "id": demo.id,
        "domain": demo.domain,
        "task_id": demo.task_id,
        "frames": len(demo),
        "mean_hz": round(demo.mean_hz, 4),
        "duration_s": (int(demo.t[-1]) - int(demo.t[0])) / NS_PER_S,
        "n_grippers": demo.n_grippers,
        "n_cameras": demo.n_cameras,
        "calibration_ref": demo.calibration_ref,
        "stride_bytes": demo.records.dtype.itemsize,
        "metadata": demo.metadata,
    }


class DemoRecorder:
    """Tick sink that accumulates frames during a session.

    For simulator-backed sessions the observed velocities and gripper state
    come from the backend snapshots; force/torque channels are recorded
    pass-through as zeros (the simulator has no force sensing).
    """

    def __init__(
        self,
        model: RobotModel,
        domain: str,
        task_id: str,
        calibration_ref: str,
        world: dict,
        n_grippers: int,
        n_cameras: int = 0,
        metadata: Optional[dict] = None,
        demo_id: Optional[str] = None,
        created_at: int = 0,
    ):
        self.model = model
        self.domain = domain
        self.task_id = task_id
        self.calibration_ref = calibration_ref
        self.world = world
        self.n_grippers = n_grippers
        self.n_cameras = n_cameras
        self.metadata = dict(metadata or {})
        self.demo_id = demo_id or new_session_id("demo")
        self.created_at = created_at
        self._rows: List[tuple] = []
        self._dtype = _frame_dtype(n_grippers, n_cameras)

    def tcp_vectors(self, joint_pos_14: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        q = np.asarray(joint_pos_14).reshape(2, 7)
        return tuple(fk_points(self.model.chains[i], q[i])[1] for i in range(2))

    def tcp_twists(self, joint_pos_14: np.ndarray, joint_vel_14: np.ndarray) -> np.ndarray:
        q = np.asarray(joint_pos_14).reshape(2, 7)
        dq = np.asarray(joint_vel_14).reshape(2, 7)
        return np.concatenate(
            [tcp_twist(self.model.chains[i], q[i], dq[i]) for i in range(2)]
        )

    def on_tick(self, ev: TickEvent) -> None:
        state = ev.state
        cmd = ev.command
        joint_pos = cmd.joints.reshape(14)
        joint_vel = state.dq.reshape(14)
        tcp_pos = np.concatenate(self.tcp_vectors(joint_pos))
        tcp_vel = self.tcp_twists(joint_pos, joint_vel)
        row = [ev.session_t_ns, joint_pos, joint_vel, tcp_pos, tcp_vel, np.zeros(12), np.zeros(12)]
        if self.n_grippers:
            row.append(
                _gripper_block(
                    observed=state.widths,
                    commanded=cmd.widths,
                    t_ns=ev.session_t_ns,
                    n_grippers=self.n_grippers,
                )
            )
        ticks = ev.frame.ticks if ev.frame is not None else np.zeros(DUAL_ARM_TICKS, dtype=np.int64)
        row.append(np.asarray(ticks, dtype=np.int32))
        if self.n_cameras:
            row.append(np.array([b""] * self.n_cameras, dtype=f"S{_BLOB_REF_BYTES}"))
        self._rows.append(tuple(row))

    def finish(self) -> Demonstration:
        if len(self._rows) < 2:
            raise SchemaError(f"session produced {len(self._rows)} frames; need >= 2")
        records = np.array(self._rows, dtype=self._dtype)
        return Demonstration(
            id=self.demo_id,
            domain=self.domain,
            task_id=self.task_id,
            calibration_ref=self.calibration_ref,
            n_grippers=self.n_grippers,
            n_cameras=self.n_cameras,
            world=self.world,
            metadata=self.metadata,
            created_at=self.created_at,
            records=records,
        )


def _gripper_block(observed, commanded, t_ns, n_grippers) -> np.ndarray:
    """6 floats per present gripper: width, force, status, cmd width/force/time."""
    out = np.zeros(6 * n_grippers)
    for g in range(n_grippers):
        width = float(observed[g])
        cmd_w = float(commanded[g])
        settled = 1.0 if abs(width - cmd_w) < 1e-9 else 0.0
        out[6 * g : 6 * g + 6] = [width, 0.0, settled, cmd_w, 0.0, float(t_ns)]
    return out


def record_teleop_session(
    source,
    cal: CalibrationRecord,
    backend,
    cfg: LoopConfig,
    duration_s: float,
    model: RobotModel,
    task_id: str,
    world: dict,
    calibration_ref: str,
    n_grippers: int,
    clock=None,
    constraint=None,
    metadata: Optional[dict] = None,
) -> Tuple[Demonstration, LoopStats]:
    """Run a teleop session and record one frame per control tick."""
    rec = DemoRecorder(
        model=model,
        domain=DOMAIN_TELEOP,
        task_id=task_id,
        calibration_ref=calibration_ref,
        world=world,
        n_grippers=n_grippers,
        metadata=metadata,
    )
    stats, session_id = run_teleop_session(
        source, cal, backend, cfg, duration_s, clock=clock, constraint=constraint, sink=rec.on_tick
    )
    rec.metadata.setdefault("session_id", session_id)
    return rec.finish(), stats


def record_wild_session(
    source,
    cal: CalibrationRecord,
    cfg: LoopConfig,
    duration_s: float,
    model: RobotModel,
    task_id: str,
    calibration_ref: str,
    n_grippers: int,
    clock=None,
    metadata: Optional[dict] = None,
) -> Tuple[Demonstration, LoopStats]:
    """Record an exoskeleton-only session: no robot, encoder stream only.

    Joint fields are the calibration-mapped robot-domain pose; velocities are
    finite differences between consecutive mapped poses; TCP fields come from
    forward kinematics on the mapped joints.
    """
    if cal is None:
        raise ConfigurationError("in-the-wild recording requires a calibration")
    clock = clock if clock is not None else VirtualClock()
    rec = DemoRecorder(
        model=model,
        domain=DOMAIN_WILD,
        task_id=task_id,
        calibration_ref=calibration_ref,
        world={},
        n_grippers=n_grippers,
        metadata=metadata,
    )
    stats = LoopStats()
    start_ns = clock.now_ns()
    period_s = 1.0 / cfg.control_rate_hz
    timeout_ns = int(cfg.command_timeout_ms * 1e6)
    prev: Optional[np.ndarray] = None
    last_mapped = None

    for k, session_t in tick_times(cfg.control_rate_hz, duration_s):
        clock.sleep_until(start_ns + session_t)
        now_session = clock.now_ns() - start_ns
        entry = source.latest(now_session)
        fresh = entry is not None and entry.t >= now_session - timeout_ns
        if fresh:
            mapped = map_frame(cal, entry.value)
            last_mapped = (entry.value, mapped)
            stats.commanded_ticks += 1
            stats.last_latency_ms = (now_session - entry.t) / 1e6
        else:
            stats.dropped_frames += 1
            if last_mapped is None:
                continue  # nothing captured yet
            mapped = last_mapped[1]
        frame = last_mapped[0]
        joint_pos = mapped.joints.reshape(14)
        widths = mapped.widths
        if prev is None:
            joint_vel = np.zeros(14)
        else:
            joint_vel = (joint_pos - prev) / period_s
        tcp_pos = np.concatenate(rec.tcp_vectors(joint_pos))
        twists = [
            tcp_twist(model.chains[i], joint_pos.reshape(2, 7)[i], joint_vel.reshape(2, 7)[i])
            for i in range(2)
        ]
        row = [
            session_t,
            joint_pos,
            joint_vel,
            tcp_pos,
            np.concatenate(twists),
            np.zeros(12),
            np.zeros(12),
        ]
        if n_grippers:
            row.append(
                _gripper_block(
                    observed=widths, commanded=widths, t_ns=session_t, n_grippers=n_grippers
                )
            )
        row.append(np.asarray(frame.ticks, dtype=np.int32))
        rec._rows.append(tuple(row))
        prev = joint_pos
        stats.ticks_executed += 1

    return rec.finish(), stats


def replay(
    demo: Demonstration,
    backend,
    rate_scale: float = 1.0,
    clock=None,
    expected_world_type: Optional[str] = None,
) -> LoopStats:
    """Re-command a demonstration's action sequence against a backend.

    ``rate_scale`` scales wall pacing only; the simulation dt sequence is
    taken from the recorded timestamps, so the resulting trajectory is
    independent of the replay speed and bit-identical across virtual-time
    runs.  Joint values outside the backend limits are clamped (the backend
    emits no warning beyond its own clamping; recorded data is in-limit by
    construction).
    """
    if not (rate_scale > 0.0):
        raise InvalidInputError(f"rate_scale must be > 0, got {rate_scale}")
    world_type = demo.world.get("type")
    backend_world = getattr(backend, "world", None)
    if backend_world is not None and world_type is not None:
        if backend_world.world_type != world_type:
            raise InvalidStateError(
                f"demo world {world_type!r} does not match backend world "
                f"{backend_world.world_type!r}"
            )
    if expected_world_type is not None and world_type != expected_world_type:
        raise InvalidStateError(f"expected {expected_world_type!r} demo, got {world_type!r}")

    clock = clock if clock is not None else VirtualClock()
    stats = LoopStats()
    start_ns = clock.now_ns()
    t = demo.t
    joints = demo.joint_pos
    cmd_widths = demo.gripper_cmd_widths()
    state = backend.snapshot()
    widths_hold = state.widths.copy()
    prev_t = 0
    for k in range(len(demo)):
        clock.sleep_until(start_ns + int(int(t[k]) / rate_scale))
        dt = (int(t[k]) - prev_t) / NS_PER_S
        prev_t = int(t[k])
        if demo.n_grippers == 0:
            widths = widths_hold
        elif demo.n_grippers == 1:
            widths = np.array([cmd_widths[k, 0], widths_hold[1]])
        else:
            widths = cmd_widths[k]
        command = Command(joints=joints[k].reshape(2, 7), widths=widths)
        backend.step(command, dt)
        stats.ticks_executed += 1
        stats.commanded_ticks += 1
    return stats


def resample(demo: Demonstration, target_hz: float) -> Demonstration:
    """Resample a demonstration onto a uniform grid spanning its time range.

    Continuous joint/TCP/FT fields interpolate linearly; quaternion blocks
    are normalized after componentwise interpolation (frames are dense, so
    the chord error is negligible); gripper status/command echoes, encoder
    ticks and image refs snap to the nearest source frame.
    """
    if not (target_hz > 0.0):
        raise InvalidInputError(f"target_hz must be > 0, got {target_hz}")
    t = demo.t.astype(np.int64)
    t0 = int(t[0])
    t_last = int(t[-1])
    span_s = (t_last - t0) / NS_PER_S
    n_out = int(math.floor(span_s * target_hz + 1e-9)) + 1
    step_ns = NS_PER_S / target_hz
    out_t = np.array([t0 + int(round(i * step_ns)) for i in range(n_out)], dtype=np.int64)
    out_t = np.minimum(out_t, t_last)

    src_t = t.astype(np.float64)
    grid = out_t.astype(np.float64)
    idx_right = np.searchsorted(src_t, grid, side="left")
    idx_right = np.clip(idx_right, 1, len(src_t) - 1)
    idx_left = idx_right - 1
    t_left = src_t[idx_left]
    t_right = src_t[idx_right]
    w = np.where(t_right > t_left, (grid - t_left) / (t_right - t_left), 0.0)
    nearest = np.where(w < 0.5, idx_left, idx_right)

    def lerp(field_name: str) -> np.ndarray:
        arr = demo.records[field_name]
        return arr[idx_left] * (1.0 - w[:, None]) + arr[idx_right] * w[:, None]

    records = np.zeros(n_out, dtype=demo.records.dtype)
    records["t"] = out_t
    for name in ("joint_pos", "joint_vel", "tcp_pos", "tcp_vel", "base_ft", "tcp_ft"):
        records[name] = lerp(name)
    for sl in (slice(3, 7), slice(10, 14)):
        block = records["tcp_pos"][:, sl]
        norms = np.linalg.norm(block, axis=1, keepdims=True)
        records["tcp_pos"][:, sl] = block / norms
    if demo.n_grippers:
        g_src = demo.records["gripper"].reshape(len(demo), demo.n_grippers, 6)
        g_out = np.zeros((n_out, demo.n_grippers, 6))
        for col in (0, 1):  # width, force: continuous
            g_out[:, :, col] = (
                g_src[idx_left, :, col] * (1.0 - w[:, None]) + g_src[idx_right, :, col] * w[:, None]
            )
        for col in (2, 3, 4, 5):  # status + command echoes: nearest
            g_out[:, :, col] = g_src[nearest, :, col]
        records["gripper"] = g_out.reshape(n_out, demo.n_grippers * 6)
    records["encoder"] = demo.records["encoder"][nearest]
    if demo.n_cameras:
        records["image_refs"] = demo.records["image_refs"][nearest]

    # A uniform grid may round onto a duplicate trailing timestamp; keep the
    # grid strictly increasing by dropping exact duplicates at the tail.
    keep = np.concatenate([[True], np.diff(records["t"]) > 0])
    records = records[keep]

    meta = dict(demo.metadata)
    meta["resampled_from"] = demo.id
    meta["resampled_hz"] = repr(target_hz)
    return replace(demo, id=f"{demo.id}-r{target_hz:g}", metadata=meta, records=records)
