"""Loopback TCP transport with the same push/probe surface as :class:`Channel`.

The receiving side listens on 127.0.0.1 and runs one reader thread per inbound
connection; readers decode frames into a local in-process :class:`Channel`, so
bounded-queue backpressure propagates to senders through TCP flow control.
Each sending thread gets its own connection, which preserves per-sender order.
"""

from __future__ import annotations

import socket
import threading
import time
from typing import Optional

from pushrl.comms.channel import DEFAULT_DEPTH, Channel, ChannelClosed, ChannelStats, EndOfStream
from pushrl.comms.codec import HEADER_SIZE, Envelope, decode_header, encode


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        k = sock.recv_into(view[got:], n - got)
        if k == 0:
            return None
        got += k
    return bytes(buf)


class TcpChannel:
    """Multi-producer, single-consumer channel over loopback TCP."""

    def __init__(self, depth: int = DEFAULT_DEPTH, mode: str = "queue", port: int = 0,
                 host: str = "127.0.0.1"):
        self._local = Channel(depth, mode)
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind((host, port))
        self._server.listen(64)
        self.address = self._server.getsockname()
        self._closed = threading.Event()
        self._tls = threading.local()
        self._senders: list[socket.socket] = []
        self._readers: list[threading.Thread] = []
        self._lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self._send_stats = ChannelStats()
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True,
                                          name=f"tcp-accept-{self.address[1]}")
        self._acceptor.start()

    @property
    def mode(self) -> str:
        return self._local.mode

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    @property
    def stats(self) -> ChannelStats:
        """Sender-side counters merged with receiver-side counters."""
        r = self._local.stats
        s = self._send_stats
        return ChannelStats(s.sent_count, r.received_count, r.dropped_stale_count,
                            s.bytes_sent, s.send_busy_ns, r.recv_busy_ns)

    def _accept_loop(self) -> None:
        while not self.closed:
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            with self._lock:
                self._readers.append(t)
            t.start()

    def _read_loop(self, conn: socket.socket) -> None:
        with conn:
            while True:
                header = _recv_exact(conn, HEADER_SIZE)
                if header is None:
                    return
                length, kind, sender, version = decode_header(header)
                payload = _recv_exact(conn, length) if length else b""
                if payload is None:
                    return
                e = Envelope(kind, sender, version, payload)
                try:
                    self._local._enqueue(e)
                except ChannelClosed:
                    return

    def _sender_socket(self) -> socket.socket:
        sock = getattr(self._tls, "sock", None)
        if sock is None:
            sock = socket.create_connection(self.address)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._tls.sock = sock
            with self._lock:
                self._senders.append(sock)
        return sock

    def push_send(self, e: Envelope) -> None:
        if self.closed:
            raise ChannelClosed("send on closed channel")
        t0 = time.perf_counter_ns()
        frame = encode(e)
        with self._stats_lock:
            self._send_stats.sent_count += 1
            self._send_stats.bytes_sent += len(e.payload)
        try:
            self._sender_socket().sendall(frame)
        except OSError as exc:
            with self._stats_lock:
                self._send_stats.sent_count -= 1
                self._send_stats.bytes_sent -= len(e.payload)
            raise ChannelClosed(str(exc)) from exc
        with self._stats_lock:
            self._send_stats.send_busy_ns += time.perf_counter_ns() - t0

    def probe_recv(self) -> Optional[Envelope]:
        e = self._local.probe_recv()
        if e is None and self.closed and not self._readers_alive():
            # readers may have enqueued between the probe and the liveness check
            e = self._local.probe_recv()
            if e is None:
                raise EndOfStream
        return e

    def _readers_alive(self) -> bool:
        with self._lock:
            return any(t.is_alive() for t in self._readers)

    def reclassify_dropped(self, n: int) -> None:
        self._local.reclassify_dropped(n)

    def pending(self) -> int:
        return self._local.pending()

    def close(self) -> None:
        """Stop accepting, half-close every sender connection, and let readers drain."""
        if self.closed:
            return
        self._closed.set()
        try:
            self._server.close()
        except OSError:
            pass
        with self._lock:
            senders = list(self._senders)
        for sock in senders:
            try:
                sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def join(self, timeout: float = 5.0) -> None:
        """Wait for reader threads to finish after :meth:`close`."""
        deadline = time.monotonic() + timeout
        with self._lock:
            readers = list(self._readers)
        for t in readers:
            t.join(max(0.0, deadline - time.monotonic()))
        with self._lock:
            for sock in self._senders:
                sock.close()
