"""Measurement harnesses: the communication benchmark, single-unit profiling,
and the actor scaling sweep.

commbench
    N sender threads each sleep ``sample_time`` (the simulated sample) and push a
    pre-built trajectory envelope of ``message_size`` bytes. One receiver decodes
    each envelope and stores it in a replay buffer, which is the work a real
    buffer worker does. The run ends at ``n_samples`` received envelopes.

A short calibration pass measures ``t_sp``, ``t_sd`` and ``t_rv`` in isolation
first, so the collect-time prediction is independent of the sweep it is
compared against.
"""

from __future__ import annotations

import csv
import hashlib
import io
import statistics
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from pushrl import comms
from pushrl.algo import QNetwork, dqn_update, epsilon_greedy, forward, sync_target
from pushrl.comms import ChannelClosed, Envelope, Kind, decode_trajectory, encode_trajectory
from pushrl.envs import EnvSpec, env_reset, env_step
from pushrl.replay import ReplayBuffer
from pushrl.strategy import ThroughputProfile, branch_switch, collect_time
from pushrl.types import Trajectory

MIN_SAMPLES = 20
POLL_SLEEP = 5e-5
BENCH_OBS_DIM = 4
SAMPLE_TIME_PRESETS = (0.001, 0.01)


class ProfileError(RuntimeError):
    pass


class BenchError(RuntimeError):
    pass


def _row_bytes(obs_dim: int) -> int:
    # states + next_states + action + reward + done, all f32 on the wire
    return 4 * (2 * obs_dim + 3)


def make_message(size: int, sender_id: int = 0, obs_dim: int = BENCH_OBS_DIM,
                 seed: int = 0) -> Envelope:
    """Trajectory envelope whose payload is as close to ``size`` bytes as rows allow.

    Sizes too small for one row give a header-only CONTROL envelope of ``size``
    zero bytes, which the receiver only copies.
    """
    overhead = 12 + 5 * 4
    rows = (size - overhead) // _row_bytes(obs_dim)
    if rows < 1:
        return Envelope(Kind.CONTROL, sender_id, 0, bytes(size))
    rng = np.random.default_rng(seed)
    traj = Trajectory(rng.standard_normal((rows, obs_dim)), rng.integers(0, 2, rows),
                      rng.standard_normal(rows), rng.standard_normal((rows, obs_dim)),
                      np.zeros(rows, dtype=bool), policy_version=0, actor_id=sender_id)
    return encode_trajectory(traj)


class _Sink:
    """Receiver-side storage: decode trajectories into a replay buffer."""

    def __init__(self, msg: Envelope):
        rows = 1
        if msg.kind is Kind.TRAJECTORY:
            rows = len(decode_trajectory(msg))
        self.buf = ReplayBuffer(max(4 * rows, 1 << 14), BENCH_OBS_DIM)
        self.raw = bytearray(len(msg.payload))

    def store(self, e: Envelope) -> None:
        if e.kind is Kind.TRAJECTORY:
            self.buf.push(decode_trajectory(e))
        else:
            self.raw[:] = e.payload


def _take(ch) -> Envelope:
    while True:
        e = ch.probe_recv()
        if e is not None:
            return e
        time.sleep(POLL_SLEEP)


@dataclass(frozen=True)
class Calibration:
    t_sp: float
    t_sd: float
    t_rv: float
    samples: int


def _calibration_samples(message_size: int, sample_time: float, transport: str,
                         samples: int, depth: int) -> tuple[list, list, list]:
    """Raw (t_sp, t_sd, t_rv) samples for one sender/receiver pair.

    Sender side: ``samples`` sleep-then-push cycles with nobody receiving.
    Receiver side: one sender thread pushes back to back while the receiver
    drains, so every receive is measured in the saturated state the receiver
    is in whenever it sits on the critical path, including the cost of waking
    the sender it unblocks.
    """
    if samples < MIN_SAMPLES:
        raise ProfileError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    msg = make_message(message_size)
    sink = _Sink(msg)
    sp, sd, rv = [], [], []
    ch = comms.make_channel(transport, depth)
    try:
        for _ in range(samples):
            t0 = time.perf_counter()
            time.sleep(sample_time)
            t1 = time.perf_counter()
            ch.push_send(msg)
            sp.append(t1 - t0)
            sd.append(time.perf_counter() - t1)
        for _ in range(samples):
            sink.store(_take(ch))
    finally:
        ch.close()

    # unmeasured warm-up of the same length, then the measured drain
    ch = comms.make_channel(transport, depth)
    total = 2 * samples + 1  # warm-up, the measured blocks, and one spare
    def feed():
        # same loop as a sender with zero sample time: yield, then push
        for _ in range(total):
            time.sleep(0)
            ch.push_send(msg)

    feeder = threading.Thread(target=feed, daemon=True)
    try:
        feeder.start()
        for _ in range(samples + 1):
            sink.store(_take(ch))
        for _ in range(samples):
            t0 = time.perf_counter()
            sink.store(_take(ch))
            rv.append(time.perf_counter() - t0)
    finally:
        ch.close()
        feeder.join(5.0)
    return sp, sd, rv


def calibrate(message_size: int, sample_time: float, transport: str = "inproc",
              samples: int = 50, depth: int = comms.DEFAULT_DEPTH, passes: int = 1) -> Calibration:
    """Sample, send and receive times for one sender/receiver pair, pooled over
    ``passes`` repetitions (see :func:`_calibration_samples`)."""
    pooled = ([], [], [])
    for _ in range(passes):
        for acc, xs in zip(pooled, _calibration_samples(message_size, sample_time, transport,
                                                        samples, depth)):
            acc.extend(xs)
    sp, sd, rv = pooled
    return _summarize(sp, sd, rv)


def _summarize(sp, sd, rv) -> Calibration:
    # Receive cost is right-skewed (preemption) and a collection time is a sum of
    # receive costs, so the receiver uses the mean; sender phases use medians.
    return Calibration(statistics.median(sp), statistics.median(sd), statistics.fmean(rv), len(sp))


def _pool(cals: Sequence[tuple[list, list, list]]) -> Calibration:
    return _summarize(*([x for c in cals for x in c[i]] for i in range(3)))


@dataclass
class CommbenchRow:
    n_actors: int
    message_size: int
    n_samples: int
    collection_time: float       # seconds until the last sample was stored
    receive_rate: float          # samples/s
    bytes_per_s: float
    predicted_time: float
    predicted_branch: str        # actor | receiver
    runs: list = field(default_factory=list)  # every repeat's collection time


@dataclass
class CommbenchReport:
    transport: str
    queue_depth: int
    sample_time: float
    calibration: Calibration
    rows: list = field(default_factory=list)
    size_rows: list = field(default_factory=list)

    @property
    def predicted_switch(self) -> float:
        c = self.calibration
        return branch_switch(c.t_sp, c.t_sd, c.t_rv)

    def measured_onset(self, tol: float = 0.10) -> Optional[int]:
        """Smallest swept actor count beyond which adding actors no longer cuts
        collection time by more than ``tol``."""
        rows = self.rows
        for i, r in enumerate(rows):
            if all(later.collection_time >= (1 - tol) * r.collection_time for later in rows[i + 1:]):
                return r.n_actors if i + 1 < len(rows) else None
        return None

    def knee_estimate(self) -> Optional[float]:
        """Actor count where the measured curve's two asymptotes meet.

        The fewest-actor point gives the sender-bound line and the lowest
        collection time gives the plateau. On a shared core the plateau carries
        the senders' wake-up overhead, so this reads lower than the onset.
        """
        if len(self.rows) < 2:
            return None
        lo = self.rows[0]
        return lo.collection_time * lo.n_actors / min(r.collection_time for r in self.rows)

    def actor_branch_errors(self) -> list[tuple[int, float]]:
        """(n_actors, relative error) for every row predicted to be sender-bound."""
        return [(r.n_actors, abs(r.collection_time - r.predicted_time) / r.predicted_time)
                for r in self.rows if r.predicted_branch == "actor"]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["predicted_switch"] = self.predicted_switch
        d["measured_onset"] = self.measured_onset()
        d["knee_estimate"] = self.knee_estimate()
        return d

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        names = [n for n in CommbenchRow.__dataclass_fields__ if n != "runs"]
        w.writerow(["sweep", *names])
        for tag, rows in (("actors", self.rows), ("size", self.size_rows)):
            for r in rows:
                w.writerow([tag, *(getattr(r, n) for n in names)])
        return out.getvalue()


def _sender(ch, msg: Envelope, sample_time: float, go: threading.Event,
            stop: threading.Event) -> None:
    go.wait()
    try:
        while not stop.is_set():
            time.sleep(sample_time)
            ch.push_send(msg)
    except ChannelClosed:
        pass


def run_collection(n_actors: int, message_size: int, sample_time: float, n_samples: int,
                   transport: str = "inproc", depth: int = comms.DEFAULT_DEPTH) -> float:
    """Wall time for one receiver to store ``n_samples`` pushed by ``n_actors`` senders."""
    ch = comms.make_channel(transport, depth)
    msgs = [make_message(message_size, sender_id=i, seed=i) for i in range(n_actors)]
    sink = _Sink(msgs[0])
    go, stop = threading.Event(), threading.Event()
    senders = [threading.Thread(target=_sender, args=(ch, m, sample_time, go, stop), daemon=True)
               for m in msgs]
    for t in senders:
        t.start()
    try:
        t0 = time.perf_counter()
        go.set()
        for _ in range(n_samples):
            sink.store(_take(ch))
        elapsed = time.perf_counter() - t0
    finally:
        stop.set()
        ch.close()
        for t in senders:
            t.join(5.0)
    if any(t.is_alive() for t in senders):
        raise BenchError("sender threads did not stop")
    return elapsed


def commbench(message_size: int = 512 * 1024, n_actors: Sequence[int] = (1, 2, 4, 8, 16),
              sample_time: float = 0.001, n_samples: int = 10_000, transport: str = "inproc",
              queue_depth: int = comms.DEFAULT_DEPTH, message_sizes: Sequence[int] = (),
              repeats: int = 3, calibration_samples: int = 200,
              progress=None) -> CommbenchReport:
    """Actor-count sweep (and optional message-size sweep) against the collect-time model.

    Every sweep point is run ``repeats`` times, rounds outermost so slow drifts
    in machine load hit all points alike, and reported as the median. A
    calibration pass precedes every run; the predictions use the pooled
    calibration, which never looks at the collection times themselves.
    """
    from pushrl.runtime import short_switch_interval

    if repeats < 1:
        raise BenchError("repeats must be at least 1")

    def sweep(n_list, size):
        cal_runs, times = [], {n: [] for n in n_list}
        for _ in range(repeats):
            for n in n_list:
                cal_runs.append(_calibration_samples(size, sample_time, transport,
                                                     calibration_samples, queue_depth))
                t = run_collection(n, size, sample_time, n_samples, transport, queue_depth)
                times[n].append(t)
                if progress:
                    progress(n, size, t)
        cal = _pool(cal_runs)
        out = []
        for n in n_list:
            t = statistics.median(times[n])
            pred = collect_time(cal.t_sp, cal.t_sd, cal.t_rv, n, n_samples)
            out.append(CommbenchRow(n, size, n_samples, t, n_samples / t, n_samples * size / t,
                                    pred.seconds, pred.branch, times[n]))
        return cal, out

    with short_switch_interval():
        counts = sorted(n_actors)
        cal, rows = sweep(counts, message_size)
        rep = CommbenchReport(transport, queue_depth, sample_time, cal, rows)
        for size in message_sizes:
            rep.size_rows += sweep([counts[0]], size)[1]
    return rep


# --- profiling ---------------------------------------------------------------

def _timed_until(fn, budget: float) -> list[float]:
    times = []
    end = time.perf_counter() + budget
    while time.perf_counter() < end:
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return times


def profile(cfg, duration: float = 6.0) -> ThroughputProfile:
    """Isolated micro-runs of one actor, one learner and one send/receive pair.

    ``cfg`` is a :class:`pushrl.config.RunConfig`; each phase gets a third of
    ``duration`` and must produce at least 20 samples.
    """
    from pushrl.config import dumps

    s = cfg.settings()
    hp, env = s.hp, s.env
    budget = duration / 3.0
    rng = np.random.default_rng(s.seed)
    net = QNetwork(s.layout, seed=s.model_seed)
    state = [env_reset(env, s.seed)]

    def rollout():
        for _ in range(hp.rollout_length):
            st = state[0]
            a = epsilon_greedy(forward(net, st.observation), hp.epsilon_min, rng)
            nxt, _, done = env_step(env, st, a, rng)
            state[0] = env_reset(env, int(rng.integers(2 ** 31))) if done else nxt

    target = sync_target(net)
    B = hp.batch_size
    batch = (rng.standard_normal((B, env.obs_dim)), rng.integers(0, env.n_actions, B),
             rng.standard_normal(B), rng.standard_normal((B, env.obs_dim)), np.zeros(B, bool))

    def update():
        dqn_update(net, target, batch, hp.gamma, hp.alpha)
        if s.update_delay:
            time.sleep(s.update_delay)

    sp = _timed_until(rollout, budget)
    upd = _timed_until(update, budget)
    n = hp.rollout_length
    traj = Trajectory(rng.standard_normal((n, env.obs_dim)), np.zeros(n, dtype=np.int64),
                      np.ones(n), rng.standard_normal((n, env.obs_dim)), np.zeros(n, bool),
                      policy_version=0, actor_id=0)
    ch = comms.make_channel(s.transport, s.queue_depth)
    buf = ReplayBuffer(hp.buffer_capacity, env.obs_dim)
    sd, rv = [], []
    end = time.perf_counter() + budget
    try:
        while time.perf_counter() < end:
            t0 = time.perf_counter()
            ch.push_send(encode_trajectory(traj))
            t1 = time.perf_counter()
            buf.push(decode_trajectory(_take(ch)))
            t2 = time.perf_counter()
            sd.append(t1 - t0)
            rv.append(t2 - t1)
    finally:
        ch.close()
    for name, xs in (("actor", sp), ("learner", upd), ("communication", sd)):
        if len(xs) < MIN_SAMPLES:
            raise ProfileError(f"{name} phase collected {len(xs)} samples in {budget:.3g} s; "
                               f"need {MIN_SAMPLES}, increase the duration")
    t_sp = statistics.median(sp)
    fingerprint = hashlib.sha1(dumps(cfg).encode()).hexdigest()[:12]
    return ThroughputProfile(tr_a1=n / t_sp, tr_l1=B / statistics.median(upd), t_sp=t_sp,
                             t_sd=statistics.median(sd), t_rv=statistics.median(rv),
                             learner_saturation_cores=1.0,
                             measured_on=f"{fingerprint}/{s.transport}")


# --- actor scaling sweep -------------------------------------------------------

@dataclass(frozen=True)
class ScalingRow:
    n_actors: int
    sample: float     # steps/s produced
    receive: float    # steps/s stored by the buffer
    train: float      # transitions/s consumed by updates


def scaling_sweep(settings, actor_counts: Sequence[int] = (1, 2, 4, 8), duration: float = 8.0,
                  settle: float = 2.0, progress=None) -> list[ScalingRow]:
    """Free-running distributed runs (no pacing, no target) at each actor count.

    Rates are averaged over the snapshots taken after ``settle`` seconds.
    """
    from pushrl.runtime import run_training

    rows = []
    for n in actor_counts:
        s = replace(settings, mode="distributed", n_actors=n, staleness_control=False,
                    target_return=None, time_limit=duration, step_budget=10 ** 12)
        rep = run_training(s)
        if rep.errors:
            raise BenchError("; ".join(rep.errors))
        late = [r for r in rep.throughput if r[0] >= settle] or rep.throughput
        if not late:
            raise BenchError("run too short to take a throughput snapshot")
        a, rc, l = (float(np.mean([r[i] for r in late])) for i in (1, 2, 3))
        row = ScalingRow(n, a, rc, l)
        rows.append(row)
        if progress:
            progress(row)
    return rows


def slow_env(step_delay: float = 0.002, max_steps: int = 200) -> EnvSpec:
    """CartPole whose every step also sleeps ``step_delay`` seconds."""
    return EnvSpec("cartpole", max_steps, step_delay=step_delay)
