"""Dueling double deep Q-network with hand-rolled forward/backward passes.

The network maps the (multi-hot revealed, accrued cost) encoding through two
ReLU layers into a scalar value head and a per-action advantage head,
combined as Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a').  Targets are double-DQN
(online argmax, target evaluation) with unavailable actions masked to -inf at
both argmax sites.  Plain seeded SGD keeps training bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from frugalnn.env import Environment, EnvState, StepResult
from frugalnn.errors import TrainingDiverged

PARAM_KEYS = ("W1", "b1", "W2", "b2", "Wv", "bv", "Wa", "ba")


@dataclass
class DqnHyper:
    episodes: int = 4000
    lr: float = 0.01
    gamma: float = 0.8
    eps0: float = 1.0
    eps_decay: float = 0.999
    hidden: tuple[int, int] = (128, 256)
    buffer_capacity: int = 50_000
    batch_size: int = 64
    sync_interval: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ValueError(f"eps_decay must be in (0, 1], got {self.eps_decay}")
        self.hidden = tuple(int(h) for h in self.hidden)


def epsilon_schedule(eps0: float, decay: float, episodes: int) -> float:
    """Exploration rate after the given number of completed episodes."""
    return eps0 * decay ** episodes


class QNetwork:
    """Two hidden ReLU layers feeding a value head and an advantage head."""

    def __init__(self, n_inputs: int, n_actions: int,
                 hidden: tuple[int, int] = (128, 256),
                 rng: np.random.Generator | None = None):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = tuple(hidden)
        rng = rng if rng is not None else np.random.default_rng(0)
        h1, h2 = self.hidden
        self.params: dict[str, np.ndarray] = {}
        for key, (fan_in, shape) in {
            "W1": (n_inputs, (n_inputs, h1)), "b1": (n_inputs, (h1,)),
            "W2": (h1, (h1, h2)), "b2": (h1, (h2,)),
            "Wv": (h2, (h2, 1)), "bv": (h2, (1,)),
            "Wa": (h2, (h2, n_actions)), "ba": (h2, (n_actions,)),
        }.items():
            bound = 1.0 / np.sqrt(fan_in)
            self.params[key] = rng.uniform(-bound, bound, size=shape)

    def forward_full(self, x: np.ndarray):
        """Batch forward pass returning (Q, V, A, cache-for-backward)."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        p = self.params
        Z1 = X @ p["W1"] + p["b1"]
        H1 = np.maximum(Z1, 0.0)
        Z2 = H1 @ p["W2"] + p["b2"]
        H2 = np.maximum(Z2, 0.0)
        V = H2 @ p["Wv"] + p["bv"]
        A = H2 @ p["Wa"] + p["ba"]
        Q = V + A - A.mean(axis=1, keepdims=True)
        return Q, V, A, (X, Z1, H1, Z2, H2)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values; a 1-D input yields a 1-D output."""
        Q = self.forward_full(x)[0]
        return Q[0] if np.ndim(x) == 1 else Q

    def backward(self, cache, dQ: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given dLoss/dQ for the cached batch."""
        X, Z1, H1, Z2, H2 = cache
        p = self.params
        dV = dQ.sum(axis=1, keepdims=True)
        dA = dQ - dQ.sum(axis=1, keepdims=True) / self.n_actions
        grads = {
            "Wv": H2.T @ dV, "bv": dV.sum(axis=0),
            "Wa": H2.T @ dA, "ba": dA.sum(axis=0),
        }
        dH2 = dV @ p["Wv"].T + dA @ p["Wa"].T
        dZ2 = dH2 * (Z2 > 0.0)
        grads["W2"] = H1.T @ dZ2
        grads["b2"] = dZ2.sum(axis=0)
        dZ1 = (dZ2 @ p["W2"].T) * (Z1 > 0.0)
        grads["W1"] = X.T @ dZ1
        grads["b1"] = dZ1.sum(axis=0)
        return grads

    def sgd_step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        for key in PARAM_KEYS:
            self.params[key] -= lr * grads[key]

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.n_inputs = self.n_inputs
        clone.n_actions = self.n_actions
        clone.hidden = self.hidden
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def load_from(self, other: "QNetwork") -> None:
        for key in PARAM_KEYS:
            np.copyto(self.params[key], other.params[key])


class Batch(NamedTuple):
    states: np.ndarray       # (B, n_inputs)
    actions: np.ndarray      # (B,) int
    rewards: np.ndarray      # (B,)
    next_states: np.ndarray  # (B, n_inputs)
    next_masks: np.ndarray   # (B, n_actions) bool
    dones: np.ndarray        # (B,) bool


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions, uniformly sampled."""

    def __init__(self, capacity: int, n_inputs: int, n_actions: int):
        self.capacity = capacity
        self.states = np.empty((capacity, n_inputs))
        self.actions = np.empty(capacity, dtype=int)
        self.rewards = np.empty(capacity)
        self.next_states = np.empty((capacity, n_inputs))
        self.next_masks = np.empty((capacity, n_actions), dtype=bool)
        self.dones = np.empty(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, next_mask, done) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.next_masks[i] = next_mask
        self.dones[i] = done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.next_masks[idx], self.dones[idx])


def double_target(batch: Batch, net: QNetwork, target: QNetwork,
                  gamma: float) -> np.ndarray:
    """R + gamma * Q_target(s', argmax_a Q_online(s', a)) over allowed actions;
    terminal transitions bootstrap nothing."""
    q_online = np.asarray(net.forward(batch.next_states))
    q_online = np.where(batch.next_masks, q_online, -np.inf)
    a_star = q_online.argmax(axis=1)
    q_target = np.asarray(target.forward(batch.next_states))
    bootstrap = q_target[np.arange(len(a_star)), a_star]
    return batch.rewards + np.where(batch.dones, 0.0, gamma * bootstrap)


def td_loss_and_grads(net: QNetwork, batch: Batch, targets: np.ndarray):
    """Bellman MSE over the batch and its parameter gradients.

    Raises TrainingDiverged on a non-finite loss; the overflow is detected by
    inspection before the backward pass rather than left to numpy warnings.
    """
    Q, _, _, cache = net.forward_full(batch.states)
    b = np.arange(batch.states.shape[0])
    diff = Q[b, batch.actions] - targets
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(diff @ diff) / diff.shape[0]
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite TD loss: {loss}")
    dQ = np.zeros_like(Q)
    dQ[b, batch.actions] = 2.0 * diff / diff.shape[0]
    return loss, net.backward(cache, dQ)


def train_step(net: QNetwork, target: QNetwork, batch: Batch,
               gamma: float, lr: float) -> float:
    """One SGD update of the online net toward the double-DQN targets.

    Returns the pre-update loss; a non-finite loss aborts training.
    """
    targets = double_target(batch, net, target, gamma)
    loss, grads = td_loss_and_grads(net, batch, targets)
    net.sgd_step(grads, lr)
    return loss


def act(net: QNetwork, state_enc: np.ndarray, mask: np.ndarray,
        eps: float, rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy action index over the masked-in actions.

    Greedy ties resolve to the lowest index; masked-out actions are never
    returned.
    """
    available = np.flatnonzero(mask)
    if eps > 0.0:
        if rng is None:
            raise ValueError("eps > 0 requires an rng")
        if rng.random() < eps:
            return int(available[rng.integers(available.size)])
    q = net.forward(state_enc)
    q = np.where(np.asarray(mask, dtype=bool), q, -np.inf)
    return int(q.argmax())


@dataclass
class TrainResult:
    network: QNetwork
    reward_trace: list[tuple[int, float]]  # (last episode of bucket, mean return)
    final_epsilon: float
    train_steps: int


def train(env: Environment, budget: float, hyper: DqnHyper,
          on_step: Callable[[EnvState, np.ndarray, int, StepResult], None] | None = None,
          trace_every: int = 100) -> TrainResult:
    """Epsilon-greedy episode rollout with per-step replay updates.

    Each episode starts from a uniformly drawn training point; epsilon decays
    multiplicatively per episode and the target net hard-syncs every
    `sync_interval` gradient steps.  `on_step` is a pure observer hook.
    """
    rng = np.random.default_rng(hyper.seed)
    net = QNetwork(env.n_features + 1, env.n_actions, hyper.hidden, rng)
    target = net.copy()
    buf = ReplayBuffer(hyper.buffer_capacity, env.n_features + 1, env.n_actions)

    eps = hyper.eps0
    steps = 0
    trace: list[tuple[int, float]] = []
    bucket: list[float] = []
    n_points = env.points.shape[0]

    for episode in range(hyper.episodes):
        state = env.reset(int(rng.integers(n_points)), budget)
        episode_return = 0.0
        while not state.done:
            enc = env.encode(state)
            mask = env.mask(state)
            a_idx = act(net, enc, mask, eps, rng)
            result = env.step(state, env.action_from_index(a_idx))
            if on_step is not None:
                on_step(state, mask, a_idx, result)
            buf.push(enc, a_idx, result.reward, env.encode(result.state),
                     env.mask(result.state), result.done)
            episode_return += result.reward
            state = result.state
            if len(buf) >= hyper.batch_size:
                train_step(net, target, buf.sample(rng, hyper.batch_size),
                           hyper.gamma, hyper.lr)
                steps += 1
                if steps % hyper.sync_interval == 0:
                    target.load_from(net)
        eps *= hyper.eps_decay
        bucket.append(episode_return)
        if (episode + 1) % trace_every == 0:
            trace.append((episode + 1, float(np.mean(bucket))))
            bucket = []
    if bucket:
        trace.append((hyper.episodes, float(np.mean(bucket))))
    return TrainResult(network=net, reward_trace=trace,
                       final_epsilon=eps, train_steps=steps)


MODEL_VERSION = 1


def save_model(path: str, net: QNetwork, hyper: DqnHyper,
               meta: dict | None = None) -> None:
    """Single-file dump of weights plus hyper and provenance metadata."""
    doc = {"version": MODEL_VERSION, "n_inputs": net.n_inputs,
           "n_actions": net.n_actions, "hidden": list(net.hidden),
           "hyper": asdict(hyper), "meta": meta or {}}
    np.savez(path, __meta__=np.frombuffer(json.dumps(doc).encode(), dtype=np.uint8),
             **net.params)


def load_model(path: str) -> tuple[QNetwork, DqnHyper, dict]:
    with np.load(path) as archive:
        doc = json.loads(bytes(archive["__meta__"]).decode())
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
        net = QNetwork.__new__(QNetwork)
        net.n_inputs = int(doc["n_inputs"])
        net.n_actions = int(doc["n_actions"])
        net.hidden = tuple(doc["hidden"])
        net.params = {k: archive[k].copy() for k in PARAM_KEYS}
    hyper_doc = dict(doc["hyper"])
    hyper_doc["hidden"] = tuple(hyper_doc["hidden"])
    return net, DqnHyper(**hyper_doc), doc["meta"]
