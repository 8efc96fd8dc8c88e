"""Throughput counters, the 100-episode return window, and JSON-lines metrics."""

from __future__ import annotations

import json
import math
import threading
from collections import deque
from typing import IO, Iterable, Optional

from pushrl.types import now_ns

COUNTER_NAMES = ("sample", "receive", "train")


class ReturnWindow:
    def __init__(self, size: int = 100):
        self.size = size
        self.window: deque[float] = deque(maxlen=size)
        self.mean = 0.0

    def __len__(self) -> int:
        return len(self.window)

    @property
    def full(self) -> bool:
        return len(self.window) == self.size


def record_episode(w: ReturnWindow, ret: float) -> float:
    """Add one episode return and return the exact mean of the window."""
    ret = float(ret)
    if not math.isfinite(ret):
        raise ValueError(f"non-finite episode return {ret}")
    w.window.append(ret)
    w.mean = math.fsum(w.window) / len(w.window)
    return w.mean


class ThroughputCounter:
    """Monotone event count with a sliding-window rate.

    Only the owning worker calls :meth:`add`; readers call :meth:`rate`.
    """

    def __init__(self, name: str, window_s: float = 1.0):
        self.name = name
        self.window_ns = int(window_s * 1e9)
        self.count = 0
        self._events: deque[tuple[int, int]] = deque()  # (t_ns, cumulative count)
        self._lock = threading.Lock()

    def add(self, n: int = 1, t_ns: Optional[int] = None) -> None:
        if n < 0:
            raise ValueError("counters never decrease")
        t = now_ns() if t_ns is None else t_ns
        with self._lock:
            self.count += n
            self._events.append((t, self.count))
            self._trim(t)

    def _trim(self, t: int) -> None:
        cutoff = t - self.window_ns
        # keep one event at or before the cutoff as the window's left edge
        while len(self._events) > 1 and self._events[1][0] <= cutoff:
            self._events.popleft()

    def rate(self, t_ns: Optional[int] = None) -> float:
        """Events per second over the trailing window ending at ``t_ns``."""
        t = now_ns() if t_ns is None else t_ns
        with self._lock:
            self._trim(t)
            if not self._events:
                return 0.0
            cutoff = t - self.window_ns
            base = 0
            for ts, c in self._events:
                if ts <= cutoff:
                    base = c
                else:
                    break
            return max(0.0, (self.count - base) / (self.window_ns / 1e9))


class Snapshotter:
    """Produces timestamped metric records with strictly increasing timestamps."""

    def __init__(self, counters: Iterable[ThroughputCounter], sink: Optional[IO[str]] = None):
        self.counters = list(counters)
        self.sink = sink
        self._last_t = 0

    def snapshot(self, extra: Optional[dict] = None) -> dict:
        t = now_ns()
        if t <= self._last_t:
            t = self._last_t + 1
        self._last_t = t
        rec = {"t_ns": t}
        for c in self.counters:
            rec[f"{c.name}_count"] = c.count
            rec[f"{c.name}_rate"] = c.rate(t)
        if extra:
            rec.update(extra)
        if self.sink is not None:
            self.sink.write(json.dumps(rec) + "\n")
            self.sink.flush()
        return rec


def snapshot(counters: Iterable[ThroughputCounter]) -> dict:
    """One-off point-in-time record of the given counters."""
    return Snapshotter(counters).snapshot()
