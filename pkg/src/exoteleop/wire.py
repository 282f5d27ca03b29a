"""Wire protocol for the teleoperation service ("airexo-wire/1").

One JSON document per WebSocket message:

    {"type": <str>, "seq": <int>, "t": <ns>, "payload": {...}}

``seq`` is strictly increasing per direction per connection.  Message types:

    hello          server -> client on connect: schema version, world
                   descriptor, chain configs, calibration, control rate.
                   client -> server to claim the operator role
                   (payload.role == "operator").
    state          server broadcast at the control rate: joint/tcp state,
                   gripper widths, world summary, collision counters.
    encoder_input  operator -> server: 16 integer ticks.
    command_echo   server -> operator: the robot-domain command applied.
    record_ctl     start/stop demonstration recording.
    replay_ctl     start a demonstration replay.
    eval_ctl       score the current world state.
    event          server notifications (stage latches, protocol errors...).
    error          rejected input with a reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import DUAL_ARM_TICKS
from .errors import SchemaError

WIRE_SCHEMA = "airexo-wire/1"

MESSAGE_TYPES = (
    "hello",
    "state",
    "encoder_input",
    "command_echo",
    "record_ctl",
    "replay_ctl",
    "eval_ctl",
    "event",
    "error",
)

_STATE_DIMS = {"joint_pos": 14, "joint_vel": 14, "tcp_pos": 14, "gripper_widths": 2}


@dataclass(frozen=True)
class WireMessage:
    type: str
    seq: int
    t: int
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"type": self.type, "seq": self.seq, "t": self.t, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


def validate_message(doc: Any) -> WireMessage:
    """Validate one decoded message document; raises SchemaError on problems."""
    if not isinstance(doc, dict):
        raise SchemaError("message must be a JSON object")
    mtype = doc.get("type")
    if mtype not in MESSAGE_TYPES:
        raise SchemaError(f"unknown message type {mtype!r}")
    seq = doc.get("seq")
    if not isinstance(seq, int) or seq < 0:
        raise SchemaError(f"seq must be a non-negative integer, got {seq!r}")
    t = doc.get("t", 0)
    if not isinstance(t, int):
        raise SchemaError(f"t must be integer nanoseconds, got {t!r}")
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise SchemaError("payload must be an object")

    if mtype == "encoder_input":
        ticks = payload.get("ticks")
        if not isinstance(ticks, list):
            raise SchemaError("encoder_input payload needs a 'ticks' list")
        if len(ticks) != DUAL_ARM_TICKS:
            raise SchemaError(f"dim mismatch {len(ticks)} != {DUAL_ARM_TICKS}")
        if not all(isinstance(v, int) or float(v).is_integer() for v in ticks):
            raise SchemaError("encoder ticks must be integers")
    elif mtype == "state":
        for name, dim in _STATE_DIMS.items():
            arr = payload.get(name)
            if not isinstance(arr, list) or len(arr) != dim:
                raise SchemaError(f"state payload {name} must have {dim} entries")
    elif mtype in ("record_ctl", "replay_ctl", "eval_ctl"):
        if not isinstance(payload.get("action"), str):
            raise SchemaError(f"{mtype} payload needs an 'action' string")
    return WireMessage(type=mtype, seq=seq, t=t, payload=payload)


def parse_message(text: str) -> WireMessage:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"message is not valid JSON: {exc}")
    return validate_message(doc)


class SequenceGate:
    """Per-direction strictly-increasing sequence enforcement."""

    def __init__(self):
        self._last: Optional[int] = None

    def admit(self, seq: int) -> bool:
        if self._last is not None and seq <= self._last:
            return False
        self._last = seq
        return True


class MessageCounter:
    """Outbound sequence counter."""

    def __init__(self):
        self._next = 0

    def take(self) -> int:
        seq = self._next
        self._next += 1
        return seq
