"""Q-network, epsilon-greedy selection, TD(0) and batched DQN updates.

The network is a plain fully connected ReLU MLP whose parameters live in one flat
vector; per-layer weight and bias arrays are views into it. Gradients are computed
by hand-written backpropagation.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from pushrl.types import ParamSet, Transition, layout_size


class DivergenceError(RuntimeError):
    """Raised when an update produces a non-finite TD error or loss."""


def init_theta(layout: Sequence[int], seed: int = 0) -> np.ndarray:
    """Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in zip(layout[:-1], layout[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        parts.append(rng.uniform(-bound, bound, size=fan_out))
    return np.concatenate(parts).astype(np.float64)


class Adam:
    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        """In-place descent step on ``theta``."""
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        lr_t = self.lr * math.sqrt(1 - self.beta2 ** self.t) / (1 - self.beta1 ** self.t)
        theta -= lr_t * self.m / (np.sqrt(self.v) + self.eps)


class QNetwork:
    """Dense ReLU network mapping a state vector to one value per action.

    ``layout`` lists layer widths, input first and action count last. With no
    hidden layer the network is linear in the state.
    """

    def __init__(self, layout: Sequence[int], theta: Optional[np.ndarray] = None,
                 version: int = 0, seed: int = 0):
        self.layout = tuple(int(n) for n in layout)
        if len(self.layout) < 2 or min(self.layout) <= 0:
            raise ValueError(f"invalid layout {self.layout}")
        if theta is None:
            theta = init_theta(self.layout, seed)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (layout_size(self.layout),):
            raise ValueError(f"theta length {theta.size} does not match layout {self.layout}")
        self.theta = theta
        self.version = version
        self.optimizer: Optional[Adam] = None
        self._bind_views()

    def _bind_views(self) -> None:
        self.weights, self.biases = [], []
        off = 0
        for fan_in, fan_out in zip(self.layout[:-1], self.layout[1:]):
            self.weights.append(self.theta[off:off + fan_in * fan_out].reshape(fan_in, fan_out))
            off += fan_in * fan_out
            self.biases.append(self.theta[off:off + fan_out])
            off += fan_out

    @classmethod
    def from_params(cls, params: ParamSet) -> "QNetwork":
        return cls(params.layout, params.theta, params.version)

    @property
    def obs_dim(self) -> int:
        return self.layout[0]

    @property
    def n_actions(self) -> int:
        return self.layout[-1]

    @property
    def params(self) -> ParamSet:
        """Immutable snapshot of the current parameters."""
        theta = self.theta.copy()
        theta.flags.writeable = False
        return ParamSet(theta, self.version, self.layout)

    def load(self, params: ParamSet) -> None:
        if tuple(params.layout) != self.layout:
            raise ValueError(f"layout mismatch: {params.layout} vs {self.layout}")
        np.copyto(self.theta, params.theta)
        self.version = params.version

    def _forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def forward_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != self.obs_dim:
            raise ValueError(f"expected states of shape (n, {self.obs_dim}), got {states.shape}")
        return self._forward_cache(states)[0]

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(grad_out * output)`` with respect to the flat parameters."""
        grad = np.empty_like(self.theta)
        g = grad_out
        off = len(self.theta)
        for i in range(len(self.weights) - 1, -1, -1):
            w = self.weights[i]
            fan_in, fan_out = w.shape
            off -= fan_out
            grad[off:off + fan_out] = g.sum(axis=0)
            off -= fan_in * fan_out
            grad[off:off + fan_in * fan_out] = (acts[i].T @ g).ravel()
            if i > 0:
                g = (g @ w.T) * (acts[i] > 0)
        return grad

    def copy(self) -> "QNetwork":
        return copy.deepcopy(self)


def forward(net: QNetwork, state: np.ndarray) -> np.ndarray:
    """Action values for a single state."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (net.obs_dim,):
        raise ValueError(f"state dimension {state.shape} does not match network input {net.obs_dim}")
    return net._forward_cache(state[None, :])[0][0]


def epsilon_greedy(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random action with probability ``epsilon``, else argmax (lowest index on ties)."""
    if len(values) == 0:
        raise ValueError("empty action-value vector")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(len(values)))
    return int(np.argmax(values))


@dataclass(frozen=True)
class TDResult:
    delta: float
    grad_norm: float
    updated: ParamSet


def td0_update(net: QNetwork, t: Transition, gamma: float, alpha: float) -> TDResult:
    """One semi-gradient TD(0) step with plain SGD.

    The value of the current state is the output for the taken action and the
    bootstrap value of the next state is the greedy maximum; for a single-output
    network this is exactly state-value TD(0). Terminal transitions do not bootstrap.
    """
    s = np.asarray(t.state, dtype=np.float64)[None, :]
    s2 = np.asarray(t.next_state, dtype=np.float64)[None, :]
    q, acts = net._forward_cache(s)
    v = q[0, t.action]
    bootstrap = 0.0 if t.done else float(np.max(net._forward_cache(s2)[0][0]))
    delta = float(t.reward + gamma * bootstrap - v)
    if not math.isfinite(delta):
        raise DivergenceError(f"non-finite TD error at version {net.version}")
    grad_out = np.zeros_like(q)
    grad_out[0, t.action] = 1.0
    grad_v = net.backward(acts, grad_out)
    net.theta += alpha * delta * grad_v
    net.version += 1
    return TDResult(delta, float(np.linalg.norm(grad_v)), net.params)


def batch_arrays(batch) -> tuple[np.ndarray, ...]:
    """Column arrays ``(states, actions, rewards, next_states, dones)`` from a batch.

    Accepts a list of :class:`Transition`, a replay :class:`~pushrl.replay.Batch`,
    or a tuple of already-stacked columns.
    """
    if hasattr(batch, "arrays"):
        return batch.arrays()
    if isinstance(batch, tuple):
        return batch
    if len(batch) == 0:
        raise ValueError("empty batch")
    return (np.stack([t.state for t in batch]).astype(np.float64),
            np.array([t.action for t in batch], dtype=np.int64),
            np.array([t.reward for t in batch], dtype=np.float64),
            np.stack([t.next_state for t in batch]).astype(np.float64),
            np.array([t.done for t in batch], dtype=bool))


def dqn_targets(target: QNetwork, rewards, next_states, dones, gamma: float) -> np.ndarray:
    next_q = target.forward_batch(next_states)
    return rewards + gamma * np.max(next_q, axis=1) * (~dones)


def dqn_loss_and_grad(net: QNetwork, target: QNetwork, batch, gamma: float
                      ) -> tuple[float, np.ndarray]:
    """Mean squared TD error of the batch and its gradient in ``net``'s parameters."""
    states, actions, rewards, next_states, dones = batch_arrays(batch)
    y = dqn_targets(target, rewards, next_states, dones, gamma)
    q, acts = net._forward_cache(np.asarray(states, dtype=np.float64))
    rows = np.arange(len(actions))
    resid = q[rows, actions] - y
    loss = float(np.mean(resid * resid))
    grad_out = np.zeros_like(q)
    grad_out[rows, actions] = 2.0 * resid / len(actions)
    return loss, net.backward(acts, grad_out)


def dqn_update(net: QNetwork, target: QNetwork, batch, gamma: float, alpha: float
               ) -> tuple[QNetwork, float]:
    """One Adam step on the DQN loss; returns the (mutated) network and the pre-update loss."""
    if target.layout != net.layout:
        raise ValueError("target layout differs from online layout")
    loss, grad = dqn_loss_and_grad(net, target, batch, gamma)
    if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise DivergenceError(f"non-finite loss at version {net.version}")
    if net.optimizer is None:
        net.optimizer = Adam(net.theta.size, alpha)
    net.optimizer.lr = alpha
    net.optimizer.step(net.theta, grad)
    net.version += 1
    return net, loss


def sync_target(net: QNetwork) -> QNetwork:
    """Deep copy of ``net`` for use as the bootstrap target (optimizer state excluded)."""
    return QNetwork(net.layout, net.theta.copy(), net.version)
