"""Deterministic, seedable environments: CartPole and a 4x4 GridWorld.

Both are written in a functional style: ``env_reset`` builds an :class:`EnvState`
and ``env_step`` returns a new one. Neither keeps hidden mutable state, which keeps
rollouts reproducible from ``(spec, seed, actions)`` alone.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

# CartPole constants (the classic control benchmark values)
GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
INIT_BOUND = 0.05

# GridWorld actions
UP, RIGHT, DOWN, LEFT = range(4)
STEP_REWARD = -0.01
GOAL_REWARD = 1.0


class EnvError(Exception):
    pass


@dataclass(frozen=True)
class EnvSpec:
    name: str = "cartpole"
    max_steps: int = 200
    grid_size: int = 4
    step_delay: float = 0.0  # seconds slept per step, to emulate a slow simulator

    def __post_init__(self):
        if self.name not in ("cartpole", "gridworld"):
            raise EnvError(f"unknown environment {self.name!r}")
        if self.max_steps <= 0:
            raise EnvError("max_steps must be positive")
        if self.grid_size < 2:
            raise EnvError("grid_size must be at least 2")
        if self.step_delay < 0:
            raise EnvError("step_delay must be non-negative")

    @property
    def obs_dim(self) -> int:
        return 4 if self.name == "cartpole" else self.grid_size * self.grid_size

    @property
    def n_actions(self) -> int:
        return 2 if self.name == "cartpole" else 4

    # GridWorld geometry: start in the top-left corner, goal in the bottom-right.
    @property
    def start_cell(self) -> int:
        return 0

    @property
    def goal_cell(self) -> int:
        return self.grid_size * self.grid_size - 1


@dataclass(frozen=True)
class EnvState:
    observation: np.ndarray
    step_count: int = 0
    terminal: bool = False   # episode over; no further steps accepted
    truncated: bool = False  # ended by the step limit rather than the task

    @property
    def terminated(self) -> bool:
        """True only for a real task termination (used as the bootstrap cut)."""
        return self.terminal and not self.truncated


def one_hot(cell: int, n: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.float64)
    v[cell] = 1.0
    return v


def grid_move(spec: EnvSpec, cell: int, action: int) -> int:
    """Deterministic GridWorld move; bumping into the border leaves the agent in place."""
    n = spec.grid_size
    row, col = divmod(cell, n)
    if action == UP:
        row = max(row - 1, 0)
    elif action == RIGHT:
        col = min(col + 1, n - 1)
    elif action == DOWN:
        row = min(row + 1, n - 1)
    elif action == LEFT:
        col = max(col - 1, 0)
    else:
        raise EnvError(f"action {action} out of range")
    return row * n + col


def env_reset(spec: EnvSpec, seed: int) -> EnvState:
    if spec.name == "gridworld":
        return EnvState(one_hot(spec.start_cell, spec.obs_dim))
    if spec.name == "cartpole":
        rng = np.random.default_rng(seed)
        obs = rng.uniform(-INIT_BOUND, INIT_BOUND, size=4)
        return EnvState(obs)
    raise EnvError(f"unknown environment {spec.name!r}")


def cartpole_dynamics(x, x_dot, theta, theta_dot, action):
    """One explicit Euler step of the cart-pole equations of motion."""
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t * cos_t / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return (x + TAU * x_dot, x_dot + TAU * x_acc,
            theta + TAU * theta_dot, theta_dot + TAU * theta_acc)


def env_step(spec: EnvSpec, state: EnvState, action: int,
             rng: Optional[np.random.Generator] = None) -> tuple[EnvState, float, bool]:
    """Advance one step. Returns ``(next_state, reward, done)``.

    ``rng`` is accepted for interface symmetry with stochastic environments;
    both built-in environments are deterministic given the reset seed.
    """
    if state.terminal:
        raise EnvError("step called on a terminal state")
    if not 0 <= action < spec.n_actions:
        raise EnvError(f"action {action} out of range [0, {spec.n_actions})")
    if spec.step_delay:
        time.sleep(spec.step_delay)
    steps = state.step_count + 1

    if spec.name == "cartpole":
        x, x_dot, theta, theta_dot = (float(v) for v in state.observation)
        x, x_dot, theta, theta_dot = cartpole_dynamics(x, x_dot, theta, theta_dot, action)
        ended = x < -X_LIMIT or x > X_LIMIT or theta < -THETA_LIMIT or theta > THETA_LIMIT
        obs = np.array((x, x_dot, theta, theta_dot), dtype=np.float64)
        reward = 1.0
    else:
        cell = int(np.argmax(state.observation))
        nxt = grid_move(spec, cell, action)
        ended = nxt == spec.goal_cell
        obs = one_hot(nxt, spec.obs_dim)
        reward = GOAL_REWARD if ended else STEP_REWARD

    truncated = not ended and steps >= spec.max_steps
    done = ended or truncated
    return EnvState(obs, steps, done, truncated), reward, done
