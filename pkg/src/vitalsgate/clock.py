"""Injectable time sources.

Everything that stamps or schedules goes through a Clock so tests and
replays run on virtual time; wall-clock never gates correctness.
"""

from __future__ import annotations

import time


class Clock:
    def now_ms(self) -> int:
        raise NotImplementedError


class SystemClock(Clock):
    """Wall clock, milliseconds UTC."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000


class ManualClock(Clock):
    """Test/replay clock advanced explicitly; never moves on its own."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot run backwards")
        self._now += delta_ms
        return self._now

    def set(self, now_ms: int) -> None:
        if now_ms < self._now:
            raise ValueError("clock cannot run backwards")
        self._now = now_ms


class FramePacedClock(Clock):
    """Advances a fixed period per tick; one tick per decoded frame.

    Gives cross-process replays deterministic arrival stamps: the n-th
    frame of a session is stamped start + n * period regardless of
    socket jitter or replay speed.
    """

    def __init__(self, period_ms: int, start_ms: int = 0):
        if period_ms <= 0:
            raise ValueError("period_ms must be positive")
        self.period_ms = period_ms
        self._now = start_ms
        self._ticked = False

    def now_ms(self) -> int:
        return self._now

    def tick(self) -> int:
        if self._ticked:
            self._now += self.period_ms
        else:
            self._ticked = True  # first frame lands on start
        return self._now
