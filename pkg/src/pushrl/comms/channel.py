"""In-process push channels.

Senders call :meth:`push_send` and return as soon as the envelope is enqueued;
the consumer polls with :meth:`probe_recv`, which never blocks. Two delivery
modes exist:

* ``queue``: bounded FIFO; a full queue blocks only the sender that hit it.
* ``slot``: newest-wins single slot; an unread envelope that gets overwritten is
  counted as a stale drop. Used for parameter distribution.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import asdict, dataclass
from typing import Optional

from pushrl.comms.codec import Envelope, decode_params
from pushrl.types import ParamSet

DEFAULT_DEPTH = 1024


class ChannelClosed(Exception):
    """Send attempted on a closed channel."""


class EndOfStream(Exception):
    """The channel is closed and fully drained."""


@dataclass
class ChannelStats:
    sent_count: int = 0
    received_count: int = 0
    dropped_stale_count: int = 0
    bytes_sent: int = 0
    send_busy_ns: int = 0
    recv_busy_ns: int = 0

    @property
    def in_flight(self) -> int:
        return self.sent_count - self.received_count - self.dropped_stale_count

    def as_dict(self) -> dict:
        d = asdict(self)
        d["in_flight"] = self.in_flight
        return d


class _Slot:
    """Single-entry mailbox with queue-like put/get_nowait."""

    def __init__(self):
        self._lock = threading.Lock()
        self._item: Optional[Envelope] = None

    def put(self, item: Envelope) -> bool:
        """Store ``item``; returns True when an unread item was overwritten."""
        with self._lock:
            replaced = self._item is not None
            if self._item is not None and item.version < self._item.version:
                # an older version never displaces a newer unread one
                return True
            self._item = item
            return replaced

    def get_nowait(self) -> Envelope:
        with self._lock:
            item, self._item = self._item, None
        if item is None:
            raise queue.Empty
        return item

    def qsize(self) -> int:
        return 0 if self._item is None else 1


class Channel:
    """Multi-producer, single-consumer in-process channel."""

    def __init__(self, depth: int = DEFAULT_DEPTH, mode: str = "queue"):
        if mode not in ("queue", "slot"):
            raise ValueError(f"unknown channel mode {mode!r}")
        if depth <= 0:
            raise ValueError("depth must be positive")
        self.mode = mode
        self.depth = depth
        self._q = queue.Queue(maxsize=depth) if mode == "queue" else _Slot()
        self._closed = threading.Event()
        self._stats_lock = threading.Lock()
        self.stats = ChannelStats()

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def close(self) -> None:
        self._closed.set()

    def _enqueue(self, e: Envelope) -> None:
        if self.mode == "slot":
            if self._q.put(e):
                with self._stats_lock:
                    self.stats.dropped_stale_count += 1
            return
        while True:
            try:
                self._q.put(e, timeout=0.05)
                return
            except queue.Full:
                if self.closed:
                    raise ChannelClosed("channel closed while sender was blocked") from None

    def push_send(self, e: Envelope) -> None:
        if self.closed:
            raise ChannelClosed("send on closed channel")
        t0 = time.perf_counter_ns()
        # count before enqueueing so received_count can never overtake sent_count
        with self._stats_lock:
            self.stats.sent_count += 1
            self.stats.bytes_sent += len(e.payload)
        try:
            self._enqueue(e)
        except ChannelClosed:
            with self._stats_lock:
                self.stats.sent_count -= 1
                self.stats.bytes_sent -= len(e.payload)
            raise
        with self._stats_lock:
            self.stats.send_busy_ns += time.perf_counter_ns() - t0

    def probe_recv(self) -> Optional[Envelope]:
        t0 = time.perf_counter_ns()
        try:
            e = self._q.get_nowait()
        except queue.Empty:
            if self.closed:
                raise EndOfStream from None
            return None
        with self._stats_lock:
            self.stats.received_count += 1
            self.stats.recv_busy_ns += time.perf_counter_ns() - t0
        return e

    def reclassify_dropped(self, n: int) -> None:
        """Move ``n`` already-received envelopes into the stale-drop counter."""
        with self._stats_lock:
            self.stats.received_count -= n
            self.stats.dropped_stale_count += n

    def pending(self) -> int:
        return self._q.qsize()


class ParamSubscription:
    """Newest-wins view of a parameter channel for one subscriber.

    Only versions strictly newer than the last delivered one are returned; any
    older or superseded envelopes drained along the way count as stale drops.
    """

    def __init__(self, channel):
        self.channel = channel
        self.last_version = -1

    def params_latest(self) -> Optional[ParamSet]:
        newest: Optional[Envelope] = None
        dropped = 0
        while True:
            try:
                e = self.channel.probe_recv()
            except EndOfStream:
                break
            if e is None:
                break
            if newest is not None:
                dropped += 1
            if newest is None or e.version > newest.version:
                newest = e
        if newest is not None and newest.version <= self.last_version:
            dropped += 1
            newest = None
        if dropped:
            self.channel.reclassify_dropped(dropped)
        if newest is None:
            return None
        self.last_version = newest.version
        return decode_params(newest)
