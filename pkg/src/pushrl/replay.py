"""FIFO replay memory with uniform sampling and staleness accounting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from pushrl.types import Trajectory, Transition


class InsufficientWarmup(Exception):
    """The buffer holds fewer entries than the warmup size; skip this update."""


def staleness(batch_size: int, capacity: int) -> float:
    """Fraction of the buffer drawn per update once the buffer is full (B_s / N_s)."""
    if not 0 < batch_size <= capacity:
        raise ValueError(f"need 0 < batch_size <= capacity, got {batch_size}, {capacity}")
    return batch_size / capacity


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    policy_versions: np.ndarray
    insertion_indices: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    def arrays(self):
        return self.states, self.actions, self.rewards, self.next_states, self.dones

    def transitions(self) -> list[Transition]:
        return [Transition(self.states[i], int(self.actions[i]), float(self.rewards[i]),
                           self.next_states[i], bool(self.dones[i])) for i in range(len(self))]


@dataclass(frozen=True)
class StalenessReport:
    configured_P: float
    realized_mean_age: float
    version_lag_histogram: dict[int, int]

    @property
    def mean_version_lag(self) -> float:
        n = sum(self.version_lag_histogram.values())
        if n == 0:
            return 0.0
        return sum(k * v for k, v in self.version_lag_histogram.items()) / n


class ReplayBuffer:
    """Ring buffer of transitions; evicts oldest first.

    Each slot also records the insertion index, the producing policy version, and
    the learner version known to the buffer at insertion time (for age in updates).
    """

    def __init__(self, capacity: int, obs_dim: int, batch_size: int = 1, warmup_size: int = 1):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.batch_size = batch_size
        self.warmup_size = warmup_size
        self.states = np.zeros((capacity, obs_dim))
        self.next_states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.policy_versions = np.zeros(capacity, dtype=np.int64)
        self.insert_versions = np.zeros(capacity, dtype=np.int64)
        self.insertion_indices = np.zeros(capacity, dtype=np.int64)
        self.inserted_total = 0
        self.consumed_total = 0
        self.learner_version = 0  # latest learner version the buffer has heard of

    def __len__(self) -> int:
        return min(self.inserted_total, self.capacity)

    def push(self, traj: Trajectory) -> int:
        n = len(traj)
        start = self.inserted_total
        # only the last `capacity` rows can survive
        skip = max(0, n - self.capacity)
        pos, src = (start + skip) % self.capacity, skip
        while src < n:
            k = min(n - src, self.capacity - pos)
            dst, rows = slice(pos, pos + k), slice(src, src + k)
            self.states[dst] = traj.states[rows]
            self.next_states[dst] = traj.next_states[rows]
            self.actions[dst] = traj.actions[rows]
            self.rewards[dst] = traj.rewards[rows]
            self.dones[dst] = traj.dones[rows]
            self.policy_versions[dst] = traj.policy_version
            self.insert_versions[dst] = self.learner_version
            self.insertion_indices[dst] = np.arange(start + src, start + src + k)
            src += k
            pos = 0
        self.inserted_total += n
        return n

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if len(self) < max(self.warmup_size, 1):
            raise InsufficientWarmup(f"{len(self)} entries, warmup {self.warmup_size}")
        idx = rng.integers(0, len(self), size=batch_size)
        self.consumed_total += batch_size
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx],
                     self.policy_versions[idx], self.insertion_indices[idx])

    def retained_indices(self) -> np.ndarray:
        return np.sort(self.insertion_indices[:len(self)])

    def staleness_report(self, learner_version: int) -> StalenessReport:
        n = len(self)
        lags = learner_version - self.policy_versions[:n]
        ages = learner_version - self.insert_versions[:n]
        hist = dict(sorted(Counter(int(v) for v in lags).items()))
        mean_age = float(ages.mean()) if n else 0.0
        return StalenessReport(staleness(min(self.batch_size, self.capacity), self.capacity),
                               mean_age, hist)
