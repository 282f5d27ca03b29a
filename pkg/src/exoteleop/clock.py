"""Session clocks: deterministic virtual time and wall-clock time.

Every loop in the package schedules against this small interface so that
tests and replays run in exact virtual time while live sessions track the
monotonic OS clock.
"""

from __future__ import annotations

import time


class VirtualClock:
    """Deterministic clock: time advances only via sleep_until."""

    is_virtual = True

    def __init__(self, start_ns: int = 0):
        self._now = int(start_ns)

    def now_ns(self) -> int:
        return self._now

    def sleep_until(self, t_ns: int) -> None:
        if t_ns > self._now:
            self._now = int(t_ns)


class WallClock:
    """Monotonic OS clock."""

    is_virtual = False

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def sleep_until(self, t_ns: int) -> None:
        while True:
            remaining = t_ns - time.monotonic_ns()
            if remaining <= 0:
                return
            time.sleep(min(remaining / 1e9, 0.05))
