"""Fixed-rate teleoperation loop.

Each tick the loop takes the latest encoder frame (latest-wins, stale frames
are dropped and the previous command repeats), maps it through the
calibration into robot-domain joint targets, and commands the backend.  Two
clock modes: virtual time for deterministic tests and replays, wall clock
for live operation.  In virtual time a session of ``duration`` seconds at
``rate`` Hz executes exactly ``floor(rate * duration)`` ticks.
"""

from __future__ import annotations

import itertools
import math
import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .calibration import CalibrationRecord, MappedFrame, TaskConstraint, map_frame
from .clock import VirtualClock
from .core import (
    DEFAULT_ENCODER_RESOLUTION_RAD,
    DUAL_ARM_TICKS,
    NS_PER_S,
    EncoderFrame,
    Timestamped,
    require_monotonic,
)
from .errors import InvalidInputError
from .simulator import Command

_session_counter = itertools.count()


@dataclass(frozen=True)
class LoopConfig:
    """Control loop parameters."""

    control_rate_hz: float = 5.0
    command_timeout_ms: float = 500.0
    velocity_cap_rad_s: float = 1.0
    task_constraint_id: Optional[str] = None

    def __post_init__(self):
        if not (self.control_rate_hz > 0.0):
            raise InvalidInputError(f"control rate must be > 0, got {self.control_rate_hz}")

    @property
    def period_ns(self) -> int:
        return int(round(NS_PER_S / self.control_rate_hz))


@dataclass
class LoopStats:
    """Observed loop behavior over one session."""

    ticks_executed: int = 0
    mean_period_error_ms: float = 0.0
    max_period_error_ms: float = 0.0
    dropped_frames: int = 0
    last_latency_ms: float = 0.0
    commanded_ticks: int = 0
    aborted: bool = False
    abort_reason: str = ""


class ScriptedEncoderSource:
    """Deterministic encoder stream from a timestamped script.

    Stands in for the hardware encoder bus.  Frames are emitted at their
    scripted session times; optional +-1 tick uniform jitter is applied once
    at construction from a seeded RNG, so two sources built with the same
    arguments emit identical frames.
    """

    def __init__(
        self,
        script: Sequence[Timestamped[EncoderFrame]],
        noise_ticks: int = 0,
        seed: int = 0,
    ):
        times = [entry.t for entry in script]
        require_monotonic(times, "encoder script timestamps")
        frames: List[Timestamped[EncoderFrame]] = []
        rng = np.random.default_rng(seed)
        for entry in script:
            frame = entry.value
            if noise_ticks:
                jitter = rng.integers(-noise_ticks, noise_ticks + 1, size=DUAL_ARM_TICKS)
                frame = EncoderFrame(
                    ticks=frame.ticks + jitter,
                    resolution_rad=frame.resolution_rad,
                    t=entry.t,
                )
            else:
                frame = EncoderFrame(
                    ticks=frame.ticks, resolution_rad=frame.resolution_rad, t=entry.t
                )
            frames.append(Timestamped(t=entry.t, value=frame))
        self._frames = frames
        self._times = [f.t for f in frames]
        self.closed = False

    def latest(self, session_t_ns: int) -> Optional[Timestamped[EncoderFrame]]:
        idx = bisect_right(self._times, session_t_ns) - 1
        if idx < 0:
            return None
        return self._frames[idx]


# Name used by callers that think of this as the stream factory.
simulated_encoder_source = ScriptedEncoderSource


class MailboxSource:
    """Single-slot latest-value mailbox fed by a live producer (service)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._latest: Optional[Timestamped[EncoderFrame]] = None
        self.closed = False

    def push(self, frame: EncoderFrame, session_t_ns: int) -> None:
        with self._lock:
            self._latest = Timestamped(t=session_t_ns, value=frame)

    def latest(self, session_t_ns: int) -> Optional[Timestamped[EncoderFrame]]:
        with self._lock:
            return self._latest

    def close(self) -> None:
        self.closed = True


@dataclass
class TickEvent:
    """Everything a sink needs to observe one executed control tick."""

    index: int
    session_t_ns: int
    frame: Optional[EncoderFrame]
    fresh: bool
    mapped: Optional[MappedFrame]
    command: Command
    state: object  # SimState


def tick_times(rate_hz: float, duration_s: float) -> Iterator[Tuple[int, int]]:
    """Yield (tick index, session time ns) for a fixed-rate session."""
    period = int(round(NS_PER_S / rate_hz))
    n = math.floor(rate_hz * duration_s + 1e-9)
    for k in range(n):
        yield k, (k + 1) * period


def new_session_id(prefix: str) -> str:
    return f"{prefix}-{next(_session_counter):06d}"


def run_teleop_session(
    source,
    cal: CalibrationRecord,
    backend,
    cfg: LoopConfig,
    duration_s: float,
    clock=None,
    constraint: Optional[TaskConstraint] = None,
    sink: Optional[Callable[[TickEvent], None]] = None,
    stop: Optional[threading.Event] = None,
) -> Tuple[LoopStats, str]:
    """Drive the backend from an encoder source at a fixed rate.

    Returns the loop stats and a session id.  The loop is the sole
    commander of the backend for the duration of the session; on stop a
    final hold command is implied by simply ceasing to command.
    """
    if duration_s <= 0.0:
        raise InvalidInputError(f"duration must be > 0, got {duration_s}")
    clock = clock if clock is not None else VirtualClock()
    session_id = new_session_id("teleop")
    stats = LoopStats()
    timeout_ns = int(cfg.command_timeout_ms * 1e6)
    start_ns = clock.now_ns()
    period_errors: List[float] = []
    last_command: Optional[Command] = None

    for k, session_t in tick_times(cfg.control_rate_hz, duration_s):
        if stop is not None and stop.is_set():
            break
        clock.sleep_until(start_ns + session_t)
        now_session = clock.now_ns() - start_ns
        period_errors.append((now_session - session_t) / 1e6)

        if getattr(source, "closed", False):
            stats.aborted = True
            stats.abort_reason = "source disconnected"
            break

        entry = source.latest(now_session)
        frame = entry.value if entry is not None else None
        fresh = entry is not None and entry.t >= now_session - timeout_ns
        mapped = None
        if fresh:
            stats.last_latency_ms = (now_session - entry.t) / 1e6
            mapped = map_frame(cal, frame, constraint)
            command = backend.clamp_command(Command(joints=mapped.joints, widths=mapped.widths))
            last_command = command
            stats.commanded_ticks += 1
        else:
            stats.dropped_frames += 1
            if last_command is not None:
                command = last_command
            else:
                state = backend.snapshot()
                command = Command(joints=state.q, widths=state.widths)

        try:
            state = backend.step(command, 1.0 / cfg.control_rate_hz)
        except Exception as exc:  # backend rejection aborts the session
            stats.aborted = True
            stats.abort_reason = f"backend: {exc}"
            break
        stats.ticks_executed += 1
        if sink is not None:
            sink(
                TickEvent(
                    index=k,
                    session_t_ns=session_t,
                    frame=frame,
                    fresh=fresh,
                    mapped=mapped,
                    command=command,
                    state=state,
                )
            )

    if period_errors:
        stats.mean_period_error_ms = float(np.mean(period_errors))
        stats.max_period_error_ms = float(np.max(period_errors))
    return stats, session_id


def constant_script(
    ticks: Sequence[int],
    duration_s: float,
    rate_hz: float = 30.0,
    resolution_rad: Optional[float] = None,
) -> List[Timestamped[EncoderFrame]]:
    """Constant encoder script emitted at the given source rate."""
    res = resolution_rad if resolution_rad is not None else DEFAULT_ENCODER_RESOLUTION_RAD
    period = int(round(NS_PER_S / rate_hz))
    n = max(1, math.floor(rate_hz * duration_s))
    out = []
    arr = np.asarray(ticks)
    for k in range(n):
        t = k * period
        out.append(Timestamped(t=t, value=EncoderFrame(ticks=arr, resolution_rad=res, t=t)))
    return out
