"""Shared vocabulary: transitions, trajectories, parameter snapshots, hyperparameters.

Vectors are contiguous numpy arrays. Every type here is treated as immutable once
built, so instances can be handed between workers without copying.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def now_ns() -> int:
    """Monotonic clock in nanoseconds; all throughput math uses this."""
    return time.monotonic_ns()


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass(frozen=True)
class Violation:
    kind: str  # "dimension" | "action" | "non_finite"
    message: str


def validate_transition(t: Transition, obs_dim: int, n_actions: int) -> Optional[Violation]:
    """Return ``None`` when ``t`` is well formed, otherwise a :class:`Violation`."""
    s = np.asarray(t.state)
    s2 = np.asarray(t.next_state)
    if s.shape != (obs_dim,) or s2.shape != (obs_dim,):
        return Violation("dimension", f"expected state dim {obs_dim}, got {s.shape} / {s2.shape}")
    if not (0 <= int(t.action) < n_actions):
        return Violation("action", f"action {t.action} out of range [0, {n_actions})")
    if not math.isfinite(float(t.reward)) or not np.all(np.isfinite(s)) or not np.all(np.isfinite(s2)):
        return Violation("non_finite", "non-finite value in transition")
    return None


@dataclass(frozen=True)
class Trajectory:
    """Consecutive transitions from one rollout segment, stored column-wise."""

    states: np.ndarray       # (n, obs_dim)
    actions: np.ndarray      # (n,) int
    rewards: np.ndarray      # (n,)
    next_states: np.ndarray  # (n, obs_dim)
    dones: np.ndarray        # (n,) bool
    policy_version: int
    actor_id: int
    produced_at: int = field(default_factory=now_ns)

    def __post_init__(self):
        n = len(self.actions)
        if n == 0:
            raise ValueError("trajectory must be non-empty")
        if self.states.shape != self.next_states.shape or self.states.shape[0] != n:
            raise ValueError("trajectory columns disagree in length or state dimension")
        if len(self.rewards) != n or len(self.dones) != n:
            raise ValueError("trajectory columns disagree in length")
        if self.policy_version < 0:
            raise ValueError("policy_version must be non-negative")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        return self.states.shape[1]

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition], policy_version: int,
                         actor_id: int, produced_at: Optional[int] = None) -> "Trajectory":
        if not transitions:
            raise ValueError("trajectory must be non-empty")
        return cls(
            states=np.stack([np.asarray(t.state, dtype=np.float32) for t in transitions]),
            actions=np.array([t.action for t in transitions], dtype=np.int64),
            rewards=np.array([t.reward for t in transitions], dtype=np.float32),
            next_states=np.stack([np.asarray(t.next_state, dtype=np.float32) for t in transitions]),
            dones=np.array([t.done for t in transitions], dtype=bool),
            policy_version=policy_version,
            actor_id=actor_id,
            produced_at=now_ns() if produced_at is None else produced_at,
        )

    def transitions(self) -> list[Transition]:
        return [
            Transition(self.states[i], int(self.actions[i]), float(self.rewards[i]),
                       self.next_states[i], bool(self.dones[i]))
            for i in range(len(self))
        ]


def layout_size(layout: Sequence[int]) -> int:
    """Number of scalars in a dense net with the given layer sizes (weights + biases)."""
    return sum(a * b + b for a, b in zip(layout[:-1], layout[1:]))


@dataclass(frozen=True)
class ParamSet:
    theta: np.ndarray
    version: int
    layout: tuple[int, ...]

    def __post_init__(self):
        if self.theta.ndim != 1 or self.theta.size != layout_size(self.layout):
            raise ValueError(f"theta length {self.theta.size} does not match layout {self.layout}")
        if self.version < 0:
            raise ValueError("version must be non-negative")


@dataclass(frozen=True)
class HyperParams:
    gamma: float = 0.99
    alpha: float = 5e-4
    epsilon: float = 1.0
    epsilon_decay: float = 0.98
    epsilon_min: float = 0.01
    target_update_interval: int = 100
    batch_size: int = 32
    buffer_capacity: int = 2048
    warmup_size: int = 32
    rollout_length: int = 16
    train_interval: int = 1

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.gamma < 1.0:
            out.append("gamma must be in [0, 1)")
        if not self.alpha > 0:
            out.append("alpha must be > 0")
        if not 0.0 <= self.epsilon <= 1.0:
            out.append("epsilon must be in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            out.append("epsilon_decay must be in (0, 1]")
        if not 0.0 <= self.epsilon_min <= 1.0:
            out.append("epsilon_min must be in [0, 1]")
        for name in ("target_update_interval", "batch_size", "buffer_capacity",
                     "warmup_size", "rollout_length", "train_interval"):
            if int(getattr(self, name)) <= 0:
                out.append(f"{name} must be a positive integer")
        if self.batch_size > self.buffer_capacity:
            out.append("batch_size must not exceed buffer_capacity")
        if self.warmup_size < self.batch_size:
            out.append("warmup_size must be at least batch_size")
        if self.warmup_size > self.buffer_capacity:
            out.append("warmup_size must not exceed buffer_capacity")
        return out
