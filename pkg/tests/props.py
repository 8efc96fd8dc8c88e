"""Property checks shared by the module tests and the acceptance suite.

Each function raises AssertionError on the first counterexample and returns a
short summary string otherwise.
"""

from __future__ import annotations

import threading
import time

import numpy as np

from pushrl import comms
from pushrl.comms import (
    Envelope, Kind, ParamSubscription, decode, decode_params, decode_trajectory, encode,
    encode_params, encode_trajectory,
)
from pushrl.replay import ReplayBuffer
from pushrl.types import ParamSet, Trajectory


def random_envelope(rng: np.random.Generator) -> Envelope:
    kind = Kind(int(rng.integers(1, 4)))
    size = int(rng.choice([0, 1, int(rng.integers(0, 64)), int(rng.integers(0, 4096))]))
    return Envelope(kind, int(rng.integers(0, 2 ** 32)), int(rng.integers(0, 2 ** 63)) * 2
                    + int(rng.integers(0, 2)), rng.bytes(size))


def random_trajectory(rng: np.random.Generator) -> Trajectory:
    n, d = int(rng.integers(1, 40)), int(rng.integers(1, 20))
    f32 = lambda *shape: rng.standard_normal(shape).astype(np.float32)
    return Trajectory(f32(n, d), rng.integers(0, 2 ** 20, n), f32(n), f32(n, d), rng.random(n) < 0.5,
                      policy_version=int(rng.integers(0, 2 ** 40)), actor_id=int(rng.integers(0, 2 ** 32)),
                      produced_at=int(rng.integers(0, 2 ** 63)))


def codec_round_trip(n: int = 10_000, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(n):
        e = random_envelope(rng)
        frame = encode(e)
        assert len(frame) == 17 + len(e.payload)
        assert decode(frame) == e
    for _ in range(max(1, n // 10)):
        t = random_trajectory(rng)
        back = decode_trajectory(decode(encode(encode_trajectory(t))))
        for col in ("states", "actions", "rewards", "next_states", "dones"):
            assert np.array_equal(getattr(t, col), getattr(back, col)), col
        assert (back.policy_version, back.actor_id, back.produced_at) == (
            t.policy_version, t.actor_id, t.produced_at)
        p = ParamSet(rng.standard_normal(7 * 3 + 3).astype(np.float32).astype(np.float64),
                     int(rng.integers(0, 2 ** 40)), (7, 3))
        q = decode_params(decode(encode(encode_params(p))))
        assert np.array_equal(p.theta, q.theta) and (p.version, p.layout) == (q.version, q.layout)
    return f"{n} envelopes and {max(1, n // 10)} trajectory/params payloads round-tripped"


def _senders(ch, n_senders: int, per_sender: int, bursty: bool, seed: int) -> list[threading.Thread]:
    def send(sid):
        rng = np.random.default_rng([seed, sid])
        for k in range(per_sender):
            ch.push_send(Envelope(Kind.CONTROL, sid, k))
            if bursty and rng.random() < 0.001:
                time.sleep(float(rng.random()) * 1e-3)
    return [threading.Thread(target=send, args=(i,), daemon=True) for i in range(n_senders)]


def ordered_delivery(transport: str = "inproc", n_senders: int = 4, per_sender: int = 2000,
                     depth: int = 64, seed: int = 0, timeout: float = 60.0) -> list:
    """Several senders push numbered envelopes through one channel; returns the
    received (sender, seq) list after checking conservation and per-sender order."""
    ch = comms.make_channel(transport, depth)
    threads = _senders(ch, n_senders, per_sender, True, seed)
    for t in threads:
        t.start()
    got = []
    deadline = time.monotonic() + timeout
    total = n_senders * per_sender
    while len(got) < total:
        e = ch.probe_recv()
        if e is None:
            assert time.monotonic() < deadline, f"stalled after {len(got)} of {total}"
            time.sleep(0)
            continue
        got.append((e.sender_id, e.version))
    for t in threads:
        t.join()
    assert ch.probe_recv() is None
    st = ch.stats
    assert st.sent_count == st.received_count + st.dropped_stale_count + st.in_flight
    assert st.in_flight == 0 and st.sent_count == total
    last = {}
    for sid, seq in got:
        assert seq == last.get(sid, -1) + 1, f"sender {sid} out of order"
        last[sid] = seq
    ch.close()
    if hasattr(ch, "join"):
        ch.join()
    return got


def monotone_versions(n_updates: int = 5000, n_subscribers: int = 3, seed: int = 0) -> str:
    """Publishers push versions out of order into newest-wins slots; every
    subscriber must observe a strictly increasing sequence."""
    rng = np.random.default_rng(seed)
    chans = [comms.make_channel("inproc", mode="slot") for _ in range(n_subscribers)]
    subs = [ParamSubscription(c) for c in chans]
    seen = [[] for _ in subs]
    versions = np.arange(n_updates)
    # local shuffles model reordering between two publishers
    for i in range(0, n_updates, 8):
        rng.shuffle(versions[i:i + 8])
    for v in versions:
        e = encode_params(ParamSet(np.zeros(3), int(v), (2, 1)))
        for c in chans:
            c.push_send(e)
        for k, s in enumerate(subs):
            if rng.random() < 0.3:
                p = s.params_latest()
                if p is not None:
                    seen[k].append(p.version)
    for k, s in enumerate(subs):
        p = s.params_latest()
        if p is not None:
            seen[k].append(p.version)
        assert all(a < b for a, b in zip(seen[k], seen[k][1:]))
        st = chans[k].stats
        assert st.sent_count == st.received_count + st.dropped_stale_count + st.in_flight
        assert st.in_flight == 0
    return f"{n_subscribers} subscribers saw strictly increasing versions"


def fifo_eviction(trials: int = 300, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        cap = int(rng.integers(1, 50))
        buf = ReplayBuffer(cap, 1)
        total = 0
        for _ in range(int(rng.integers(1, 20))):
            n = int(rng.integers(1, 40))
            idx = np.arange(total, total + n, dtype=float)
            buf.push(Trajectory(idx[:, None], np.zeros(n, int), idx, idx[:, None], np.zeros(n, bool), 0, 0))
            total += n
            assert np.array_equal(buf.retained_indices(), np.arange(max(0, total - cap), total))
            b = buf.sample(8, rng)
            assert b.insertion_indices.min() >= total - cap
    return f"{trials} random push sequences kept the maximal suffix"


def sampling_uniformity(draws: int = 100_000, entries: int = 10, seed: int = 0) -> str:
    buf = ReplayBuffer(entries, 1)
    idx = np.arange(entries, dtype=float)
    buf.push(Trajectory(idx[:, None], np.zeros(entries, int), idx, idx[:, None], np.zeros(entries, bool), 0, 0))
    counts = np.bincount(buf.sample(draws, np.random.default_rng(seed)).insertion_indices, minlength=entries)
    f = counts / draws
    assert f.min() >= 0.09 and f.max() <= 0.11, f
    return f"frequencies in [{f.min():.4f}, {f.max():.4f}]"


def soak(total: int = 1_000_000, n_senders: int = 4, depth: int = 256, timeout: float = 240.0) -> str:
    """Probe/push loops over ``total`` messages; fails on a stall (deadlock)."""
    ch = comms.make_channel("inproc", depth)
    per = total // n_senders
    threads = _senders(ch, n_senders, per, True, 1)
    t0 = time.monotonic()
    for t in threads:
        t.start()
    got, idle_since = 0, None
    while got < per * n_senders:
        e = ch.probe_recv()
        if e is None:
            now = time.monotonic()
            idle_since = idle_since or now
            assert now - idle_since < 10.0, f"no progress for 10 s after {got} messages"
            assert now - t0 < timeout, "soak exceeded its time limit"
            time.sleep(0)
            continue
        idle_since = None
        got += 1
    for t in threads:
        t.join(5.0)
        assert not t.is_alive()
    st = ch.stats
    assert st.sent_count == st.received_count == got and st.in_flight == 0
    return f"{got} messages in {time.monotonic() - t0:.1f} s, no stalls"
