"""Distribution strategy: critical-path collect-time model, resource planner,
and the staleness controller that paces producers against consumers.

Throughput units used throughout:

* production ``TR_A``: environment steps generated per second.
* consumption ``TR_L``: transitions drawn into gradient updates per second
  (updates/s times batch size).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from pushrl.types import HyperParams


class StrategyError(ValueError):
    pass


class InfeasiblePlan(StrategyError):
    pass


@dataclass(frozen=True)
class CollectTime:
    seconds: float
    branch: str  # "actor" (sender-bound) or "receiver"

    @property
    def bottleneck(self) -> str:
        return "actor" if self.branch == "actor" else "buffer"


def collect_time(t_sp: float, t_sd: float, t_rv: float, n_actors: int, n_collect: int,
                 variant: str = "amortized") -> CollectTime:
    """Predicted time to collect ``n_collect`` items from ``n_actors`` pushing senders.

    The sender-bound branch applies while the per-actor production period, spread
    over all actors, exceeds the receiver's per-item cost. ``variant="literal"``
    keeps the sender-bound branch un-amortized, i.e. ``(t_sp + t_sd) * n_collect``
    regardless of the actor count.
    """
    if min(t_sp, t_sd, t_rv) <= 0 or n_actors <= 0 or n_collect <= 0:
        raise StrategyError("collect_time needs positive inputs")
    per_actor = t_sp + t_sd
    if per_actor / n_actors > t_rv:
        if variant == "literal":
            return CollectTime(per_actor * n_collect, "actor")
        if variant != "amortized":
            raise StrategyError(f"unknown model variant {variant!r}")
        return CollectTime(per_actor / n_actors * n_collect, "actor")
    return CollectTime(t_rv * n_collect, "receiver")


def branch_switch(t_sp: float, t_sd: float, t_rv: float) -> float:
    """Actor count at which the receiver becomes the critical path."""
    return (t_sp + t_sd) / t_rv


@dataclass(frozen=True)
class ThroughputProfile:
    tr_a1: float          # steps/s from one actor
    tr_l1: float          # transitions/s consumed by one learner on one core
    t_sp: float           # seconds to produce one trajectory
    t_sd: float           # seconds to push one trajectory
    t_rv: float           # seconds to receive and store one trajectory
    learner_saturation_cores: float = 1.0
    measured_on: str = ""

    def __post_init__(self):
        for name in ("tr_a1", "tr_l1", "t_sp", "t_sd", "t_rv", "learner_saturation_cores"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise StrategyError(f"profile field {name} must be positive and finite, got {v}")

    def learner_rate(self, n_learners: int, cores: float) -> float:
        """Consumption of ``n_learners`` sharing ``cores`` evenly; linear up to saturation."""
        per = min(cores / n_learners, self.learner_saturation_cores)
        return n_learners * self.tr_l1 * per

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AllocationPlan:
    n_learners: int
    n_actors: int
    m_l: int
    m_a: int
    predicted_tr_a: float
    predicted_tr_l: float
    target_P: float
    adjusted_capacity: int
    total_cores: int = 0
    batch_size: int = 0
    train_interval: int = 1

    @property
    def predicted_min(self) -> float:
        return min(self.predicted_tr_a, self.predicted_tr_l)

    @property
    def bottleneck(self) -> str:
        return "learner" if self.predicted_tr_l < self.predicted_tr_a else "actor"

    def predicted_staleness(self) -> float:
        """Staleness the plan's capacity yields at the predicted rates."""
        updates_per_s = self.predicted_tr_l / self.batch_size
        inserted_per_update = self.predicted_tr_a / updates_per_s
        return self.batch_size * inserted_per_update / (self.train_interval * self.adjusted_capacity)

    def as_dict(self) -> dict:
        return asdict(self)


def candidates(profile: ThroughputProfile, M: int, n_learners: Optional[int] = None):
    """Every (n_learners, n_actors, m_l, m_a) point of the search grid with its rates.

    Each actor takes one core; learners share their cores evenly.
    """
    learner_counts = [n_learners] if n_learners else range(1, M)
    for nl in learner_counts:
        for m_l in range(1, M):
            m_a = M - m_l
            for na in range(1, m_a + 1):
                tr_a = na * profile.tr_a1
                tr_l = profile.learner_rate(nl, m_l)
                yield nl, na, m_l, m_a, tr_a, tr_l


def _sig(x: float, digits: int = 9) -> float:
    # compare rates at fixed relative precision so exact ties stay ties under rescaling
    return float(f"{x:.{digits}g}")


def _rank(c) -> tuple:
    nl, na, m_l, m_a, tr_a, tr_l = c
    # maximize min throughput, then balance, then fewer workers, then fewer cores
    lo = min(tr_a, tr_l)
    return (-_sig(lo), _sig(abs(tr_l - tr_a) / lo), nl + na, m_l + m_a)


def plan(profile: ThroughputProfile, M: int, hp: HyperParams,
         n_learners: Optional[int] = None) -> AllocationPlan:
    """Grid search for the allocation maximizing ``min(TR_L, TR_A)``.

    ``n_learners`` pins the learner count; otherwise it is searched too. The buffer
    capacity is rescaled so the staleness seen by the learner at the predicted rates
    matches the serial regime ``batch_size / buffer_capacity``.
    """
    if M < 2:
        raise InfeasiblePlan(f"need at least 2 cores, got {M}")
    if n_learners is not None and not 1 <= n_learners < M:
        raise InfeasiblePlan(f"{n_learners} learners cannot fit in {M} cores")
    best = min(candidates(profile, M, n_learners), key=_rank)
    nl, na, m_l, m_a, tr_a, tr_l = best
    target_P = hp.batch_size / hp.buffer_capacity
    updates_per_s = tr_l / hp.batch_size
    capacity = hp.buffer_capacity * (tr_a / updates_per_s) / hp.train_interval
    capacity = max(hp.batch_size, hp.warmup_size, int(round(capacity)))
    return AllocationPlan(nl, na, m_l, m_a, tr_a, tr_l, target_P, capacity,
                          total_cores=M, batch_size=hp.batch_size,
                          train_interval=hp.train_interval)


# --- staleness control ------------------------------------------------------

@dataclass(frozen=True)
class BufferWindowStats:
    """Counter deltas over one control window."""
    inserted: int
    updates: int
    capacity: int
    batch_size: int
    train_interval: int = 1


def realized_staleness(w: BufferWindowStats) -> float:
    """Fraction of fresh data per update relative to the serial regime's ``B/N``.

    In the serial loop ``train_interval`` transitions arrive per update and the
    value reduces to ``batch_size / capacity``. More production per update drives
    it up; more updates per produced transition drive it down.
    """
    if w.updates == 0:
        return math.inf if w.inserted else float("nan")
    return w.batch_size * w.inserted / (w.updates * w.train_interval * w.capacity)


@dataclass(frozen=True)
class PacingDirective:
    action: str                  # noop | throttle_actors | release_actors | throttle_learners | release_learners
    actor_scale: float           # fraction of unthrottled actor speed
    learner_scale: float         # fraction of unthrottled learner speed
    ratio: float                 # realized / target staleness

    def as_message(self) -> dict:
        return {"type": "pacing", **asdict(self)}


@dataclass
class StalenessController:
    """Closed-loop pacing that keeps realized staleness within ``band`` of target.

    Out-of-band windows trigger a correction by the full measured ratio, applied
    first by releasing whichever side is currently throttled.
    """
    target_P: float
    band: float = 2.0
    min_scale: float = 1e-3
    actor_scale: float = 1.0
    learner_scale: float = 1.0
    history: list = field(default_factory=list)

    def step(self, w: BufferWindowStats) -> PacingDirective:
        p = realized_staleness(w)
        if math.isnan(p):
            d = PacingDirective("noop", self.actor_scale, self.learner_scale, float("nan"))
            self.history.append(d)
            return d
        ratio = p / self.target_P
        if math.isinf(ratio):
            # nothing consumed at all: production must slow down
            ratio = self.band * 4
        action = "noop"
        if ratio > self.band:
            if self.learner_scale < 1.0:
                self.learner_scale = min(1.0, self.learner_scale * ratio)
                action = "release_learners"
            else:
                self.actor_scale = max(self.min_scale, self.actor_scale / ratio)
                action = "throttle_actors"
        elif ratio < 1.0 / self.band:
            if self.actor_scale < 1.0:
                self.actor_scale = min(1.0, self.actor_scale / max(ratio, 1e-9))
                action = "release_actors"
            else:
                self.learner_scale = max(self.min_scale, self.learner_scale * max(ratio, self.min_scale))
                action = "throttle_learners"
        d = PacingDirective(action, self.actor_scale, self.learner_scale, ratio)
        self.history.append(d)
        return d


def staleness_control(controller: StalenessController, w: BufferWindowStats) -> PacingDirective:
    return controller.step(w)


def sweep(profile: ThroughputProfile, M: int, n_learners: Optional[int] = None):
    """All candidate points, best first (used for exhaustive checks and reports)."""
    return sorted(candidates(profile, M, n_learners), key=_rank)


def reference_profile() -> ThroughputProfile:
    """Synthetic profile shaped like the two-learner balance experiment.

    Per-actor production 1627 steps/s; two learners on four cores each cap at
    11,500 steps/s of consumption.
    """
    return ThroughputProfile(tr_a1=1627.0, tr_l1=11500.0 / 8, t_sp=16 / 1627.0,
                             t_sd=1e-5, t_rv=1e-5, learner_saturation_cores=4.0,
                             measured_on="synthetic")


__all__ = [
    "AllocationPlan", "BufferWindowStats", "CollectTime", "InfeasiblePlan", "PacingDirective",
    "StalenessController", "StrategyError", "ThroughputProfile", "branch_switch", "collect_time",
    "plan", "realized_staleness", "staleness_control", "sweep", "reference_profile",
]
