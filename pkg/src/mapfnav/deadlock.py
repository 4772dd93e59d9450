"""Windowed-average-speed deadlock detection with neighbor speed exchange.

An agent suspects a deadlock when its own average speed over the last k steps
falls below v_low and at least one neighbor reports the same.  Agents that
are executing or approaching a coordinated plan report v_max instead of their
true average, and a window that is not full yet also reads as v_max, so
agents fresh out of a coordination episode cannot re-trigger immediately.
"""

from __future__ import annotations

from collections import deque

# Modes that report v_max regardless of the measured window.
PLAN_MODES = ("move_to_start", "mapf")


class SpeedWindow:
    """Ring buffer of recent speeds with an O(1) running average."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._buf = deque(maxlen=capacity)
        self._sum = 0.0

    def __len__(self):
        return len(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.capacity

    def average(self) -> float:
        if not self._buf:
            raise ValueError("no samples recorded yet")
        return self._sum / len(self._buf)

    def clear(self):
        self._buf.clear()
        self._sum = 0.0


def record_speed(window: SpeedWindow, speed: float) -> SpeedWindow:
    """Append a speed sample, evicting the oldest when the window is full."""
    if speed < 0.0:
        raise ValueError("speed must be non-negative")
    if len(window._buf) == window.capacity:
        window._sum -= window._buf[0]
    window._buf.append(speed)
    window._sum += speed
    return window


def reported_speed(window: SpeedWindow, mode: str, v_max: float) -> float:
    """Speed this agent reports to its neighbors.

    v_max while following or approaching a coordinated plan, and v_max while
    the window is still warming up; the true window average otherwise.
    """
    if mode in PLAN_MODES:
        return v_max
    if not window.full:
        return v_max
    return window.average()


def detect_deadlock(self_avg: float, neighbor_reports, v_low: float) -> bool:
    """True iff the agent is slow and at least one neighbor reports slow too."""
    if v_low <= 0.0:
        raise ValueError("v_low must be positive")
    if self_avg >= v_low:
        return False
    return any(r < v_low for r in neighbor_reports)
