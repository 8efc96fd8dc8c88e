"""Actor, Buffer and Learner workers and the orchestrator that wires them.

Every worker is a thread that owns its state outright and talks to the others
only through comms channels:

    actors --trajectories--> buffer <--credits-- learners
                             buffer --batches--> learners
    learners --params (newest-wins)--> actors
    orchestrator --pacing directives--> actors, learners

No worker ever waits on another worker's result. A full trajectory queue can
pause its sender (bounded backpressure); everything else is polled.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from pushrl import comms
from pushrl.algo import QNetwork, dqn_update, epsilon_greedy, forward, sync_target
from pushrl.comms import (
    ChannelClosed, EndOfStream, Envelope, Kind, ParamSubscription, decode_control,
    decode_trajectory, encode_control, encode_params, encode_trajectory,
)
from pushrl.envs import EnvSpec, env_reset, env_step
from pushrl.replay import InsufficientWarmup, ReplayBuffer
from pushrl.strategy import BufferWindowStats, StalenessController
from pushrl.telemetry import ReturnWindow, Snapshotter, ThroughputCounter, record_episode
from pushrl.types import HyperParams, Trajectory, now_ns

log = logging.getLogger(__name__)

IDLE_SLEEP = 2e-4  # seconds a worker yields when it found nothing to do


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class WorkerConfig:
    role: str                      # actor | learner | buffer
    worker_id: int
    group_id: int = 0
    core_hint: Optional[int] = None
    rollout_length: int = 16
    publish_interval: int = 1
    prefetch: int = 2
    seed: int = 0
    max_drain: int = 64            # trajectories ingested per buffer iteration


def _sleep_scaled(busy_s: float, scale: float) -> None:
    """Stretch a period of ``busy_s`` so the worker runs at ``scale`` of full speed."""
    if scale < 1.0:
        time.sleep(busy_s * (1.0 / scale - 1.0))


class Worker(threading.Thread):
    def __init__(self, cfg: WorkerConfig, stop: threading.Event):
        super().__init__(name=f"{cfg.role}-{cfg.group_id}.{cfg.worker_id}", daemon=True)
        self.cfg = cfg
        self.stop_event = stop
        self.error: Optional[BaseException] = None
        self.scale = 1.0

    def run(self) -> None:
        try:
            self.loop()
        except (ChannelClosed, EndOfStream):
            pass
        except BaseException as exc:  # reported by the orchestrator
            self.error = exc
            log.exception("%s failed", self.name)

    def loop(self) -> None:
        raise NotImplementedError

    def apply_control(self, control) -> None:
        if control is None:
            return
        while True:
            e = control.probe_recv()
            if e is None:
                return
            msg = decode_control(e)
            if msg.get("type") == "pacing":
                key = "actor_scale" if self.cfg.role == "actor" else "learner_scale"
                self.scale = float(msg[key])


class Actor(Worker):
    """Steps the environment with an epsilon-greedy policy and pushes trajectories."""

    def __init__(self, cfg: WorkerConfig, stop: threading.Event, env: EnvSpec, hp: HyperParams,
                 layout, model_seed: int, traj_out, params_in: Optional[ParamSubscription] = None,
                 control_in=None, max_steps: Optional[int] = None):
        super().__init__(cfg, stop)
        self.env, self.hp = env, hp
        self.net = QNetwork(layout, seed=model_seed)
        self.traj_out = traj_out
        self.params_in = params_in
        self.control_in = control_in
        self.max_steps = max_steps
        self.counter = ThroughputCounter("sample")
        self.episodes: list[tuple[int, float, int]] = []  # (episode index, return, t_ns)
        self.steps = 0
        self.trajectories_sent = 0
        self.versions_seen: list[int] = [0]
        self.epsilon = hp.epsilon

    def loop(self) -> None:
        cfg, env, hp = self.cfg, self.env, self.hp
        rng = np.random.default_rng([cfg.seed, cfg.group_id, cfg.worker_id])
        n, d = cfg.rollout_length, env.obs_dim
        states = np.zeros((n, d))
        next_states = np.zeros((n, d))
        actions = np.zeros(n, dtype=np.int64)
        rewards = np.zeros(n)
        dones = np.zeros(n, dtype=bool)
        state = env_reset(env, int(rng.integers(2 ** 63)))
        ep_return, row = 0.0, 0
        t_rollout = time.perf_counter()
        while not self.stop_event.is_set():
            if self.max_steps is not None and self.steps >= self.max_steps:
                break
            obs = state.observation
            a = epsilon_greedy(forward(self.net, obs), self.epsilon, rng)  # policy inference
            nxt, r, done = env_step(env, state, a, rng)                      # simulation
            states[row], actions[row], rewards[row] = obs, a, r
            next_states[row], dones[row] = nxt.observation, nxt.terminated
            row += 1
            self.steps += 1
            ep_return += r
            if done:
                self.episodes.append((len(self.episodes), ep_return, now_ns()))
                self.epsilon = max(hp.epsilon_min, self.epsilon * hp.epsilon_decay)
                state = env_reset(env, int(rng.integers(2 ** 63)))
                ep_return = 0.0
            else:
                state = nxt
            if row == n:
                traj = Trajectory(states.copy(), actions.copy(), rewards.copy(),
                                  next_states.copy(), dones.copy(),
                                  policy_version=self.net.version, actor_id=cfg.worker_id)
                self.traj_out.push_send(encode_trajectory(traj))
                self.trajectories_sent += 1
                self.counter.add(n)
                row = 0
                self.apply_control(self.control_in)
                _sleep_scaled(time.perf_counter() - t_rollout, self.scale)
                t_rollout = time.perf_counter()
            if self.params_in is not None:
                p = self.params_in.params_latest()
                if p is not None:
                    self.net.load(p)
                    self.versions_seen.append(p.version)


class BufferWorker(Worker):
    """Owns the replay memory: ingests trajectories and answers batch credits."""

    def __init__(self, cfg: WorkerConfig, stop: threading.Event, buf: ReplayBuffer,
                 batch_size: int, traj_in, requests_in, batch_out: dict):
        super().__init__(cfg, stop)
        self.buf = buf
        self.batch_size = batch_size
        self.traj_in = traj_in
        self.requests_in = requests_in
        self.batch_out = batch_out
        self.counter = ThroughputCounter("receive")
        self.warmup_replies = 0
        self.batches_served = 0
        self.trajectories_received = 0

    def ingest(self, limit: int) -> int:
        got = 0
        while got < limit:
            try:
                e = self.traj_in.probe_recv()
            except EndOfStream:
                break
            if e is None:
                break
            n = self.buf.push(decode_trajectory(e))
            self.counter.add(n)
            self.trajectories_received += 1
            got += 1
        return got

    def serve(self, rng: np.random.Generator) -> int:
        served = 0
        while True:
            try:
                e = self.requests_in.probe_recv()
            except EndOfStream:
                break
            if e is None:
                break
            msg = decode_control(e)
            learner = int(msg["learner"])
            self.buf.learner_version = max(self.buf.learner_version, int(msg.get("version", 0)))
            out = self.batch_out[learner]
            try:
                b = self.buf.sample(self.batch_size, rng)
            except InsufficientWarmup:
                out.push_send(encode_control({"type": "warmup"}, self.cfg.worker_id))
                self.warmup_replies += 1
            else:
                traj = Trajectory(b.states, b.actions, b.rewards, b.next_states, b.dones,
                                  policy_version=int(b.policy_versions.max()),
                                  actor_id=self.cfg.worker_id)
                out.push_send(encode_trajectory(traj))
                self.batches_served += 1
            served += 1
        return served

    def loop(self) -> None:
        rng = np.random.default_rng([self.cfg.seed, self.cfg.group_id, 7919])
        while not self.stop_event.is_set():
            worked = self.ingest(self.cfg.max_drain)
            worked += self.serve(rng)
            if not worked:
                time.sleep(IDLE_SLEEP)


class Learner(Worker):
    """Requests batches by credit, runs DQN updates, publishes parameters."""

    def __init__(self, cfg: WorkerConfig, stop: threading.Event, hp: HyperParams, layout,
                 model_seed: int, requests_out, batch_in, params_out: list, control_in=None,
                 max_updates: Optional[int] = None, update_delay: float = 0.0):
        super().__init__(cfg, stop)
        self.hp = hp
        self.net = QNetwork(layout, seed=model_seed)
        self.target = sync_target(self.net)
        self.requests_out = requests_out
        self.batch_in = batch_in
        self.params_out = params_out
        self.control_in = control_in
        self.max_updates = max_updates
        self.update_delay = update_delay  # simulated extra compute per update (s)
        self.counter = ThroughputCounter("train")
        self.updates = 0
        self.target_syncs = 0
        self.versions_published = 0
        self.losses: list[float] = []
        self.max_consumed_policy_version = 0
        self.policy_version_violations = 0

    def publish(self) -> None:
        e = encode_params(self.net.params, self.cfg.worker_id)
        for ch in self.params_out:
            ch.push_send(e)
        self.versions_published += 1

    def loop(self) -> None:
        hp, cfg = self.hp, self.cfg
        outstanding = 0
        while not self.stop_event.is_set():
            if self.max_updates is not None and self.updates >= self.max_updates:
                break
            while outstanding < cfg.prefetch:
                self.requests_out.push_send(encode_control(
                    {"type": "credit", "learner": cfg.worker_id, "version": self.net.version},
                    cfg.worker_id))
                outstanding += 1
            self.apply_control(self.control_in)
            e = self.batch_in.probe_recv()
            if e is None:
                time.sleep(IDLE_SLEEP)
                continue
            outstanding -= 1
            if e.kind is Kind.CONTROL:  # warmup not met yet: skip and keep looping
                time.sleep(IDLE_SLEEP)
                continue
            t0 = time.perf_counter()
            batch = decode_trajectory(e)
            if batch.policy_version > self.net.version:
                self.policy_version_violations += 1
            self.max_consumed_policy_version = max(self.max_consumed_policy_version,
                                                   batch.policy_version)
            arrays = (batch.states, batch.actions, batch.rewards.astype(np.float64),
                      batch.next_states, batch.dones)
            _, loss = dqn_update(self.net, self.target, arrays, hp.gamma, hp.alpha)
            if self.update_delay:
                time.sleep(self.update_delay)
            self.losses.append(loss)
            self.updates += 1
            self.counter.add(len(batch))
            if self.updates % hp.target_update_interval == 0:
                self.target = sync_target(self.net)
                self.target_syncs += 1
            if self.updates % cfg.publish_interval == 0:
                self.publish()
            _sleep_scaled(time.perf_counter() - t0, self.scale)


# --- orchestration ----------------------------------------------------------

@dataclass
class RunReport:
    mode: str
    episodes: list = field(default_factory=list)      # (index, return, wall seconds)
    throughput: list = field(default_factory=list)    # (t, TR_A, TR_recv, TR_L)
    final_time: Optional[float] = None
    versions_published: int = 0
    total_steps: int = 0
    updates: int = 0
    wall_time: float = 0.0
    reason: str = ""
    target_return: Optional[float] = None
    final_window_mean: float = 0.0
    final_time_updates: Optional[int] = None
    final_time_steps: Optional[int] = None
    directives: list = field(default_factory=list)
    channels: dict = field(default_factory=dict)
    staleness: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    # final learner parameters, one ParamSet per group; kept out of the JSON output
    final_params: list = field(default_factory=list, repr=False, compare=False)

    @property
    def target_reached(self) -> bool:
        return self.final_time is not None

    def as_dict(self) -> dict:
        d = asdict(self)
        del d["final_params"]
        return d

    def write_jsonl(self, path) -> None:
        """One record per line: episodes, throughput samples, then a summary row."""
        with open(path, "w") as fh:
            for idx, ret, t in self.episodes:
                fh.write(json.dumps({"record": "episode", "index": idx, "return": ret, "t": t}) + "\n")
            for t, tr_a, tr_recv, tr_l in self.throughput:
                fh.write(json.dumps({"record": "throughput", "t": t, "tr_a": tr_a,
                                     "tr_recv": tr_recv, "tr_l": tr_l}) + "\n")
            summary = {k: v for k, v in self.as_dict().items() if k not in ("episodes", "throughput")}
            fh.write(json.dumps({"record": "summary", **summary}, default=str) + "\n")


@dataclass(frozen=True)
class TrainSettings:
    """Everything :func:`run_training` needs; built from a parsed config file."""
    env: EnvSpec = EnvSpec()
    hp: HyperParams = HyperParams()
    hidden: tuple = (256,)
    model_seed: int = 0
    seed: int = 0
    mode: str = "distributed"       # distributed | serial
    n_actors: int = 1
    n_learners: int = 1
    n_groups: int = 1
    transport: str = "inproc"
    queue_depth: int = comms.DEFAULT_DEPTH
    publish_interval: int = 1
    prefetch: int = 2
    step_budget: int = 300_000
    target_return: Optional[float] = 195.0
    time_limit: Optional[float] = None
    staleness_control: bool = True
    control_window: float = 1.0
    update_delay: float = 0.0       # simulated extra learner compute per update (s)
    target_P: Optional[float] = None  # staleness target; default batch_size / buffer_capacity
    snapshot_interval: float = 1.0
    window: int = 100

    @property
    def layout(self) -> tuple:
        return (self.env.obs_dim, *self.hidden, self.env.n_actions)


class _Progress:
    """Shared bookkeeping for the serial and distributed drivers."""

    def __init__(self, s: TrainSettings, report: RunReport, t0: int):
        self.s, self.report, self.t0 = s, report, t0
        self.window = ReturnWindow(s.window)

    def episode(self, ret: float, t_ns: int, steps: int, updates: int) -> bool:
        """Record one finished episode; True once the target is first reached."""
        mean = record_episode(self.window, ret)
        rep = self.report
        rep.episodes.append((len(rep.episodes), float(ret), (t_ns - self.t0) / 1e9))
        rep.final_window_mean = mean
        if (self.s.target_return is not None and rep.final_time is None
                and self.window.full and mean >= self.s.target_return):
            rep.final_time = (t_ns - self.t0) / 1e9
            rep.final_time_updates = updates
            rep.final_time_steps = steps
            return True
        return False


def run_serial(s: TrainSettings, metrics=None) -> RunReport:
    """Single-worker reference loop: act, store, learn, in strict program order."""
    hp, env = s.hp, s.env
    report = RunReport("serial", target_return=s.target_return)
    t0 = now_ns()
    prog = _Progress(s, report, t0)
    rng = np.random.default_rng([s.seed, 0, 0])
    net = QNetwork(s.layout, seed=s.model_seed)
    target = sync_target(net)
    buf = ReplayBuffer(hp.buffer_capacity, env.obs_dim, hp.batch_size, hp.warmup_size)
    sample_c, train_c = ThroughputCounter("sample"), ThroughputCounter("train")
    snap = Snapshotter([sample_c, train_c])
    next_snap = time.monotonic() + s.snapshot_interval
    epsilon = hp.epsilon
    state = env_reset(env, int(rng.integers(2 ** 63)))
    ep_return = 0.0
    deadline = None if s.time_limit is None else time.monotonic() + s.time_limit
    steps = updates = 0
    report.reason = "budget"
    while steps < s.step_budget:
        obs = state.observation
        a = epsilon_greedy(forward(net, obs), epsilon, rng)
        nxt, r, done = env_step(env, state, a, rng)
        buf.push(Trajectory(obs[None, :], np.array([a]), np.array([r]),
                            nxt.observation[None, :], np.array([nxt.terminated]),
                            policy_version=net.version, actor_id=0))
        steps += 1
        ep_return += r
        sample_c.add(1)
        if steps % hp.train_interval == 0 and len(buf) >= hp.warmup_size:
            batch = buf.sample(hp.batch_size, rng)
            dqn_update(net, target, batch, hp.gamma, hp.alpha)
            if s.update_delay:
                time.sleep(s.update_delay)
            updates += 1
            train_c.add(hp.batch_size)
            if updates % hp.target_update_interval == 0:
                target = sync_target(net)
        if done:
            if prog.episode(ep_return, now_ns(), steps, updates):
                report.reason = "target"
                break
            epsilon = max(hp.epsilon_min, epsilon * hp.epsilon_decay)
            state = env_reset(env, int(rng.integers(2 ** 63)))
            ep_return = 0.0
        else:
            state = nxt
        if time.monotonic() >= next_snap:
            rec = snap.snapshot()
            row = (rec["sample_rate"], rec["sample_rate"], rec["train_rate"])
            report.throughput.append(((rec["t_ns"] - t0) / 1e9, *row))
            _write_metrics(metrics, rec["t_ns"], row, steps, updates, prog.window.mean)
            next_snap += s.snapshot_interval
            if deadline is not None and time.monotonic() >= deadline:
                report.reason = "time_limit"
                break
    report.total_steps = steps
    report.updates = updates
    report.versions_published = net.version
    report.final_params = [net.params]
    report.wall_time = (now_ns() - t0) / 1e9
    report.staleness.append(asdict(buf.staleness_report(net.version)))
    return report


@dataclass
class Group:
    group_id: int
    actors: list
    learners: list
    buffer: BufferWorker
    channels: dict
    controller: Optional[StalenessController] = None
    last_inserted: int = 0
    last_updates: int = 0

    @property
    def workers(self) -> list:
        return [*self.actors, self.buffer, *self.learners]

    def updates(self) -> int:
        return sum(l.updates for l in self.learners)


def build_group(s: TrainSettings, gid: int, stop: threading.Event,
                max_actor_steps: Optional[int] = None) -> Group:
    hp, env = s.hp, s.env
    if s.n_actors < 1 or s.n_learners < 1:
        raise TopologyError("need at least one actor and one learner per group")
    mk = lambda mode="queue", depth=s.queue_depth: comms.make_channel(s.transport, depth, mode)
    traj = mk()
    requests = mk()
    batches = {i: mk(depth=max(s.prefetch, 1) + 1) for i in range(s.n_learners)}
    params = {i: mk("slot") for i in range(s.n_actors)}
    actor_ctl = {i: mk("slot") for i in range(s.n_actors)}
    learner_ctl = {i: mk("slot") for i in range(s.n_learners)}
    model_seed = s.model_seed + gid
    actors = []
    for i in range(s.n_actors):
        cfg = WorkerConfig("actor", i, gid, rollout_length=hp.rollout_length, seed=s.seed)
        actors.append(Actor(cfg, stop, env, hp, s.layout, model_seed, traj,
                            ParamSubscription(params[i]), actor_ctl[i], max_actor_steps))
    learners = []
    for j in range(s.n_learners):
        # actors follow learner (actor index mod n_learners)
        followers = [params[i] for i in range(s.n_actors) if i % s.n_learners == j]
        cfg = WorkerConfig("learner", j, gid, publish_interval=s.publish_interval,
                           prefetch=s.prefetch, seed=s.seed)
        learners.append(Learner(cfg, stop, hp, s.layout, model_seed, requests, batches[j],
                                followers, learner_ctl[j], update_delay=s.update_delay))
    buf = ReplayBuffer(hp.buffer_capacity, env.obs_dim, hp.batch_size, hp.warmup_size)
    bw = BufferWorker(WorkerConfig("buffer", 0, gid, seed=s.seed), stop, buf, hp.batch_size,
                      traj, requests, batches)
    controller = None
    if s.staleness_control:
        controller = StalenessController(s.target_P or hp.batch_size / hp.buffer_capacity)
    chans = {"trajectory": traj, "requests": requests, **{f"batch{k}": v for k, v in batches.items()},
             **{f"params{k}": v for k, v in params.items()},
             **{f"actor_ctl{k}": v for k, v in actor_ctl.items()},
             **{f"learner_ctl{k}": v for k, v in learner_ctl.items()}}
    return Group(gid, actors, learners, bw, chans, controller)


def _control_step(g: Group, s: TrainSettings, report: RunReport, t: float) -> None:
    inserted = g.buffer.buf.inserted_total
    updates = g.updates()
    w = BufferWindowStats(inserted - g.last_inserted, updates - g.last_updates,
                          s.hp.buffer_capacity, s.hp.batch_size, s.hp.train_interval)
    g.last_inserted, g.last_updates = inserted, updates
    if g.controller is None or len(g.buffer.buf) < s.hp.warmup_size:
        return
    d = g.controller.step(w)
    report.directives.append({"t": t, "group": g.group_id, **asdict(d)})
    if d.action == "noop":
        return
    msg = encode_control(d.as_message())
    for i in range(len(g.actors)):
        g.channels[f"actor_ctl{i}"].push_send(msg)
    for j in range(len(g.learners)):
        g.channels[f"learner_ctl{j}"].push_send(msg)


def run_distributed(s: TrainSettings, metrics=None) -> RunReport:
    report = RunReport("distributed", target_return=s.target_return)
    stop = threading.Event()
    groups = [build_group(s, gid, stop) for gid in range(s.n_groups)]
    counters = []
    for g in groups:
        counters += [a.counter for a in g.actors] + [g.buffer.counter] + [l.counter for l in g.learners]
    snap = Snapshotter(counters, None)
    t0 = now_ns()
    prog = _Progress(s, report, t0)
    seen = {id(a): 0 for g in groups for a in g.actors}
    for g in groups:
        for w in g.workers:
            w.start()
    deadline = None if s.time_limit is None else time.monotonic() + s.time_limit
    next_snap = time.monotonic() + s.snapshot_interval
    next_ctl = time.monotonic() + s.control_window
    report.reason = "budget"
    tick = 0.02
    try:
        while True:
            time.sleep(tick)
            new = []
            for g in groups:
                for a in g.actors:
                    eps = a.episodes
                    k = len(eps)
                    new.extend(eps[seen[id(a)]:k])
                    seen[id(a)] = k
            new.sort(key=lambda e: e[2])
            steps = sum(a.steps for g in groups for a in g.actors)
            updates = sum(g.updates() for g in groups)
            hit = False
            for _, ret, t_ns in new:
                if prog.episode(ret, t_ns, steps, updates):
                    hit = True
            if hit:
                report.reason = "target"
                break
            errors = [w for g in groups for w in g.workers if w.error is not None]
            if errors:
                report.reason = "worker_error"
                report.errors = [f"{w.name}: {w.error!r}" for w in errors]
                break
            if steps >= s.step_budget:
                break
            now = time.monotonic()
            if deadline is not None and now >= deadline:
                report.reason = "time_limit"
                break
            if now >= next_snap:
                rec = snap.snapshot()
                row = _rates(groups)
                report.throughput.append(((rec["t_ns"] - t0) / 1e9, *row))
                _write_metrics(metrics, rec["t_ns"], row, steps, updates, prog.window.mean)
                next_snap += s.snapshot_interval
            if now >= next_ctl:
                for g in groups:
                    _control_step(g, s, report, (now_ns() - t0) / 1e9)
                next_ctl += s.control_window
    finally:
        stop.set()
        shutdown(groups)
    report.total_steps = sum(a.steps for g in groups for a in g.actors)
    report.updates = sum(g.updates() for g in groups)
    report.versions_published = sum(l.versions_published for g in groups for l in g.learners)
    report.wall_time = (now_ns() - t0) / 1e9
    for g in groups:
        report.final_params.append(max((l.net for l in g.learners), key=lambda n: n.version).params)
        report.staleness.append(asdict(g.buffer.buf.staleness_report(
            max(l.net.version for l in g.learners))))
        report.channels[g.group_id] = {k: ch.stats.as_dict() for k, ch in g.channels.items()}
    return report


def _write_metrics(sink, t_ns: int, row, steps: int, updates: int, window_mean: float) -> None:
    """One metrics JSON line; the schema is documented in docs/metrics.md."""
    if sink is None:
        return
    sink.write(json.dumps({"t_ns": t_ns, "tr_a": row[0], "tr_recv": row[1], "tr_l": row[2],
                           "steps": steps, "updates": updates,
                           "window_mean": window_mean}) + "\n")
    sink.flush()


def _rates(groups) -> tuple[float, float, float]:
    t = now_ns()
    tr_a = sum(a.counter.rate(t) for g in groups for a in g.actors)
    tr_recv = sum(g.buffer.counter.rate(t) for g in groups)
    tr_l = sum(l.counter.rate(t) for g in groups for l in g.learners)
    return tr_a, tr_recv, tr_l


def shutdown(groups, timeout: float = 10.0) -> None:
    """Stop-broadcast, join every worker, then close and drain all channels."""
    for g in groups:
        for w in g.workers:
            w.stop_event.set()
    deadline = time.monotonic() + timeout
    for g in groups:
        for w in g.workers:
            w.join(max(0.0, deadline - time.monotonic()))
    for g in groups:
        for ch in g.channels.values():
            ch.close()
        for ch in g.channels.values():
            if hasattr(ch, "join"):
                ch.join(1.0)
        drain(g)


def drain(g: Group) -> None:
    """Consume whatever is still in flight so counters settle (conservation at quiescence)."""
    for name, ch in g.channels.items():
        while True:
            try:
                e = ch.probe_recv()
            except EndOfStream:
                break
            if e is None:
                break
            if name == "trajectory":
                g.buffer.buf.push(decode_trajectory(e))


class short_switch_interval:
    """Shorten the interpreter's thread switch interval for the duration of a run.

    Workers are GIL-sharing threads; a short interval keeps sleeping and polling
    workers responsive next to a compute-bound learner.
    """

    def __init__(self, interval: float = 5e-4):
        self.interval = interval

    def __enter__(self):
        self.prev = sys.getswitchinterval()
        sys.setswitchinterval(min(self.prev, self.interval))

    def __exit__(self, *exc):
        sys.setswitchinterval(self.prev)


def run_training(s: TrainSettings, metrics=None) -> RunReport:
    if s.mode == "serial":
        return run_serial(s, metrics)
    if s.mode == "distributed":
        if s.n_groups < 1:
            raise TopologyError("need at least one training group")
        with short_switch_interval():
            return run_distributed(s, metrics)
    raise TopologyError(f"unknown mode {s.mode!r}")

