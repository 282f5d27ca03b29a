"""WebSocket teleoperation service.

Streams simulator state to every connected client and accepts virtual
encoder input from the single designated operator.  In virtual-time mode
(tests, the operator console acceptance loop) the session is request-driven:
each accepted encoder_input advances the session by exactly one control tick
and triggers one state broadcast, so state cadence in virtual time equals
the control rate by construction.  In wall-clock mode a background task
ticks at the control rate from a latest-wins mailbox.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import metrics
from .calibration import CalibrationRecord, load_calibration, map_frame
from .config import RobotModel, load_json, load_robot
from .control_loop import LoopConfig, TickEvent
from .core import EncoderFrame
from .errors import SchemaError, TeleopError
from .recorder import DOMAIN_TELEOP, DemoRecorder, read_demo, replay, write_demo
from .simulator import Command, DualArmSim
from .wire import WIRE_SCHEMA, MessageCounter, SequenceGate, WireMessage, parse_message


@dataclass
class ServiceConfig:
    world_file: str = "world_gather.json"
    calibration_file: str = "calibration_default.json"
    robot_file: str = "robot.json"
    control_rate_hz: float = 5.0
    virtual_time: bool = True
    seed: int = 0
    data_dir: str = "."
    console_dir: str = ""  # built operator console to serve at /, optional


class _Client:
    def __init__(self, ws: WebSocket, client_id: int):
        self.ws = ws
        self.id = client_id
        self.out_seq = MessageCounter()
        self.in_gate = SequenceGate()
        self.queue: asyncio.Queue = asyncio.Queue()


class TeleopSession:
    """Single-session state machine shared by all connections.

    All mutation funnels through ``handle_message`` / ``tick`` so the
    control loop's single-commander contract holds; broadcasts carry
    immutable snapshots.
    """

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.model: RobotModel = load_robot(cfg.robot_file)
        self.robot_cfg = load_json(cfg.robot_file)
        self.world_cfg = load_json(cfg.world_file)
        self.cal: CalibrationRecord = load_calibration(_resolve(cfg.calibration_file))
        self.cal_doc = json.loads(Path(_resolve(cfg.calibration_file)).read_text())
        self.sim = DualArmSim(self.model, self.world_cfg, seed=cfg.seed)
        self.loop_cfg = LoopConfig(control_rate_hz=cfg.control_rate_hz)
        self.mode = "idle"
        self.tick_index = 0
        self.operator_id: Optional[int] = None
        self.clients: Dict[int, _Client] = {}
        self._next_client_id = 0
        self.recorder: Optional[DemoRecorder] = None
        self.last_command: Optional[Command] = None
        self._last_frame: Optional[EncoderFrame] = None
        self._sent_events = 0

    # -- connection management -------------------------------------------

    def register(self, ws: WebSocket) -> _Client:
        client = _Client(ws, self._next_client_id)
        self._next_client_id += 1
        self.clients[client.id] = client
        return client

    def unregister(self, client: _Client) -> None:
        self.clients.pop(client.id, None)
        if self.operator_id == client.id:
            self.operator_id = None
            if self.mode == "teleop":
                self.mode = "idle"

    def hello_payload(self) -> dict:
        return {
            "schema": WIRE_SCHEMA,
            "world": self.world_cfg,
            "chains": {
                "left": self.robot_cfg["arms"]["left"]["chain"],
                "right": self.robot_cfg["arms"]["right"]["chain"],
            },
            "joint_limits": {
                "left": self.robot_cfg["arms"]["left"]["joint_limits"],
                "right": self.robot_cfg["arms"]["right"]["joint_limits"],
            },
            "calibration": self.cal_doc,
            "control_rate_hz": self.cfg.control_rate_hz,
            "virtual_time": self.cfg.virtual_time,
            "mode": self.mode,
            "clients": len(self.clients),
        }

    # -- messages ----------------------------------------------------------

    def _msg(self, client: _Client, mtype: str, payload: dict) -> str:
        return WireMessage(
            type=mtype,
            seq=client.out_seq.take(),
            t=self.sim.snapshot().sim_time,
            payload=payload,
        ).to_json()

    def queue_to(self, client: _Client, mtype: str, payload: dict) -> None:
        client.queue.put_nowait(self._msg(client, mtype, payload))

    def broadcast(self, mtype: str, payload: dict) -> None:
        for client in list(self.clients.values()):
            self.queue_to(client, mtype, payload)

    def state_payload(self) -> dict:
        state = self.sim.snapshot()
        world = dict(state.world_snapshot)
        if world.get("type") == "gather_balls":
            trial = metrics.score_gather_balls(world, state.collision_events, 0.0)
            world_summary = {
                "type": world["type"],
                "balls": np.asarray(world["balls"]).round(4).tolist(),
                "completion": {
                    "overall": trial.completion_overall,
                    "left": trial.completion_left,
                    "right": trial.completion_right,
                },
                "triangle": np.asarray(world["triangle"]).tolist(),
            }
        else:
            world_summary = {
                "type": world["type"],
                "stage_flags": world["stage_flags"],
                "curtain_displacement": world["curtain_displacement"],
                "object_pos": np.asarray(world["object_pos"]).round(4).tolist(),
                "grasped": world["grasped"],
            }
        return {
            "tick": self.tick_index,
            "sim_time_ns": state.sim_time,
            "joint_pos": state.q.reshape(14).tolist(),
            "joint_vel": state.dq.reshape(14).tolist(),
            "tcp_pos": np.concatenate(state.tcp_poses).tolist(),
            "gripper_widths": state.widths.tolist(),
            "world": world_summary,
            "collisions_total": len(state.collision_events),
            "recording": self.recorder is not None,
            "mode": self.mode,
        }

    def _drain_new_events(self) -> List[dict]:
        state = self.sim.snapshot()
        events = list(state.world_events)[self._sent_events :]
        self._sent_events = len(state.world_events)
        return [{"kind": kind, "t": t} for t, kind in events]

    # -- stepping ----------------------------------------------------------

    def tick(self, frame: Optional[EncoderFrame]) -> None:
        """Advance the session one control period."""
        if frame is not None:
            mapped = map_frame(self.cal, frame)
            command = self.sim.clamp_command(
                Command(joints=mapped.joints, widths=mapped.widths)
            )
            self.last_command = command
            self._last_frame = frame
        elif self.last_command is not None:
            command = self.last_command
        else:
            snap = self.sim.snapshot()
            command = Command(joints=snap.q, widths=snap.widths)
        state = self.sim.step(command, 1.0 / self.cfg.control_rate_hz)
        self.tick_index += 1
        if self.recorder is not None:
            self.recorder.on_tick(
                TickEvent(
                    index=self.tick_index,
                    session_t_ns=self.tick_index * self.loop_cfg.period_ns,
                    frame=self._last_frame,
                    fresh=frame is not None,
                    mapped=None,
                    command=command,
                    state=state,
                )
            )
        self.broadcast("state", self.state_payload())
        for ev in self._drain_new_events():
            self.broadcast("event", ev)

    # -- handlers ----------------------------------------------------------

    def handle_message(self, client: _Client, raw: str) -> None:
        try:
            msg = parse_message(raw)
        except SchemaError as exc:
            self.queue_to(client, "error", {"message": str(exc)})
            return
        if not client.in_gate.admit(msg.seq):
            self.queue_to(client, "event", {"kind": "stale_seq", "detail": msg.seq})
            return
        handler = getattr(self, f"_on_{msg.type}", None)
        if handler is None:
            self.queue_to(client, "error", {"message": f"unhandled type {msg.type}"})
            return
        try:
            handler(client, msg)
        except TeleopError as exc:
            self.queue_to(client, "error", {"message": str(exc)})

    def _on_hello(self, client: _Client, msg: WireMessage) -> None:
        if msg.payload.get("role") == "operator":
            if self.operator_id is not None and self.operator_id != client.id:
                self.queue_to(client, "error", {"message": "operator role already claimed"})
                return
            self.operator_id = client.id
            self.mode = "teleop"
            self.queue_to(client, "event", {"kind": "operator_granted"})
        else:
            self.queue_to(client, "event", {"kind": "observer"})

    def _on_encoder_input(self, client: _Client, msg: WireMessage) -> None:
        if client.id != self.operator_id:
            self.queue_to(client, "error", {"message": "encoder_input from non-operator"})
            return
        ticks = np.asarray(msg.payload["ticks"], dtype=np.int64)
        frame = EncoderFrame(ticks=ticks, t=msg.t)
        if self.cfg.virtual_time:
            self.tick(frame)
            self.queue_to(
                client,
                "command_echo",
                {
                    "joint_cmd": self.last_command.joints.reshape(14).tolist(),
                    "widths": self.last_command.widths.tolist(),
                },
            )
        else:
            self._mailbox_frame = frame

    def _on_record_ctl(self, client: _Client, msg: WireMessage) -> None:
        action = msg.payload["action"]
        if action == "start":
            if self.recorder is not None:
                self.queue_to(client, "error", {"message": "already recording"})
                return
            world_meta = dict(self.world_cfg)
            world_meta["seed"] = self.cfg.seed
            self.recorder = DemoRecorder(
                model=self.model,
                domain=DOMAIN_TELEOP,
                task_id=self.world_cfg.get("task_id", ""),
                calibration_ref=str(self.cfg.calibration_file),
                world=world_meta,
                n_grippers=int(self.world_cfg.get("n_grippers", 0)),
            )
            self.broadcast("event", {"kind": "recording_started"})
        elif action == "stop":
            if self.recorder is None:
                self.queue_to(client, "error", {"message": "not recording"})
                return
            rec, self.recorder = self.recorder, None
            try:
                demo = rec.finish()
            except SchemaError as exc:
                self.broadcast("event", {"kind": "recording_discarded", "detail": str(exc)})
                return
            out = Path(self.cfg.data_dir) / f"{demo.id}.demo"
            write_demo(demo, out)
            self.broadcast(
                "event",
                {"kind": "recording_saved", "path": str(out), "frames": len(demo)},
            )
        else:
            self.queue_to(client, "error", {"message": f"unknown record action {action!r}"})

    def _on_replay_ctl(self, client: _Client, msg: WireMessage) -> None:
        if msg.payload["action"] != "start":
            self.queue_to(client, "error", {"message": "replay_ctl supports action=start"})
            return
        if not self.cfg.virtual_time:
            self.queue_to(client, "error", {"message": "replay requires virtual-time mode"})
            return
        demo = read_demo(msg.payload["path"])
        self.mode = "replay"
        self.sim.reset(int(demo.world.get("seed", self.cfg.seed)))
        stats = replay(demo, self.sim, rate_scale=float(msg.payload.get("rate_scale", 1.0)))
        self.mode = "teleop" if self.operator_id is not None else "idle"
        self.broadcast("event", {"kind": "replay_done", "ticks": stats.ticks_executed})
        self.broadcast("state", self.state_payload())

    def _on_eval_ctl(self, client: _Client, msg: WireMessage) -> None:
        if msg.payload["action"] != "score":
            self.queue_to(client, "error", {"message": "eval_ctl supports action=score"})
            return
        state = self.sim.snapshot()
        world = state.world_snapshot
        if world.get("type") == "gather_balls":
            trial = metrics.score_gather_balls(world, state.collision_events, 0.0)
        else:
            trial = metrics.score_curtained_shelf(world, state.collision_events, 0.0)
        self.queue_to(client, "event", {"kind": "trial_score", "result": trial.to_json()})


def _resolve(name: str) -> str:
    p = Path(name)
    if p.exists():
        return str(p)
    from .config import default_path

    return str(default_path(name))


def create_app(cfg: Optional[ServiceConfig] = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="exoteleop service")
    session = TeleopSession(cfg)
    app.state.session = session

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "mode": session.mode, "clients": len(session.clients)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        client = session.register(ws)
        session.queue_to(client, "hello", session.hello_payload())

        async def sender():
            while True:
                msg = await client.queue.get()
                await ws.send_text(msg)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                session.handle_message(client, raw)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.unregister(client)

    if not cfg.virtual_time:

        @app.on_event("startup")
        async def start_live_loop():
            async def live_loop():
                period = 1.0 / cfg.control_rate_hz
                while True:
                    await asyncio.sleep(period)
                    frame = getattr(session, "_mailbox_frame", None)
                    session._mailbox_frame = None
                    session.tick(frame)

            app.state.live_task = asyncio.create_task(live_loop())

    if cfg.console_dir and Path(cfg.console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=cfg.console_dir, html=True), name="console")

    return app


def serve(cfg: ServiceConfig, host: str = "127.0.0.1", port: int = 8765) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(cfg), host=host, port=port, log_level="warning")
