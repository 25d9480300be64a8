"""Deep Q-network written directly on numpy.

Three affine layers (obs -> h1 -> h2 -> actions) with hand-written
backpropagation, an Adam optimizer, a ring-buffer replay memory and
epsilon-greedy action selection.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointMismatch, DimensionMismatch, InsufficientMemory, ShapeMismatch

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass
class AgentHyperparams:
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    # Episode at which the schedule reaches epsilon_end.
    epsilon_decay_episodes: int = 3000
    epsilon_schedule: str = "exponential"
    learning_rate: float = 1e-4
    batch_size: int = 64
    memory_capacity: int = 100_000
    hidden: tuple = (64, 64)
    activation: str = "relu"
    # Steps between target-network syncs; 0 evaluates next states with the online net.
    target_update: int = 0
    # Standardize inputs with running per-feature statistics.
    normalize_obs: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.epsilon_schedule not in ("exponential", "linear"):
            raise ValueError(f"unknown epsilon schedule {self.epsilon_schedule!r}")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.hidden) != 2:
            raise ValueError("hidden must name exactly two widths")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentHyperparams":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def epsilon_at(hp: AgentHyperparams, episode: int) -> float:
    """Exploration rate for ``episode`` (0-based)."""
    if episode < 0:
        raise ValueError("episode must be non-negative")
    start, end, horizon = hp.epsilon_start, hp.epsilon_end, max(hp.epsilon_decay_episodes, 1)
    if episode >= horizon:
        return end
    if hp.epsilon_schedule == "linear":
        eps = start - (start - end) * episode / horizon
    elif end == 0:
        # Exponential decay cannot reach zero; fall back to linear.
        eps = start * (1 - episode / horizon)
    else:
        eps = start * (end / start) ** (episode / horizon)
    return max(end, eps)


class QNetwork:
    """Feed-forward Q-value approximator.

    Parameters live in ``self.params``; weights are stored input-major so a
    batch ``X`` of shape (B, in) maps through ``X @ W + b``.
    """

    def __init__(self, obs_dim, num_actions, hidden=(64, 64), activation="relu", seed=None):
        self.obs_dim = int(obs_dim)
        self.num_actions = int(num_actions)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        rng = np.random.default_rng(seed)
        dims = (self.obs_dim,) + self.hidden + (self.num_actions,)
        self.params = {}
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:]), 1):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)

    @property
    def dims(self) -> list:
        return [self.obs_dim, *self.hidden, self.num_actions]

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else z

    def _act_grad(self, z):
        return (z > 0).astype(z.dtype) if self.activation == "relu" else np.ones_like(z)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.obs_dim:
            raise DimensionMismatch(f"expected {self.obs_dim} inputs, got {X.shape[-1]}")
        return X

    def forward(self, obs) -> np.ndarray:
        X = self._check(obs)
        p = self.params
        h1 = self._act(X @ p["W1"] + p["b1"])
        h2 = self._act(h1 @ p["W2"] + p["b2"])
        return h2 @ p["W3"] + p["b3"]

    __call__ = forward

    def loss_and_grads(self, X, targets):
        """Mean squared error over every (sample, action) entry and its gradient.

        ``targets`` has the same shape as the network output.
        """
        X = self._check(X)
        p = self.params
        z1 = X @ p["W1"] + p["b1"]
        h1 = self._act(z1)
        z2 = h1 @ p["W2"] + p["b2"]
        h2 = self._act(z2)
        q = h2 @ p["W3"] + p["b3"]
        diff = q - targets
        loss = float(np.mean(diff ** 2))

        dq = 2.0 * diff / diff.size
        grads = {"W3": h2.T @ dq, "b3": dq.sum(axis=0)}
        dz2 = (dq @ p["W3"].T) * self._act_grad(z2)
        grads["W2"] = h1.T @ dz2
        grads["b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ p["W2"].T) * self._act_grad(z1)
        grads["W1"] = X.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.obs_dim, clone.num_actions = self.obs_dim, self.num_actions
        clone.hidden, clone.activation = self.hidden, self.activation
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params.values())


class Adam:
    def __init__(self, params: dict, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= lr_t * m / (np.sqrt(v) + self.eps)


class RunningNormalizer:
    """Per-feature running mean and variance (Welford) for input standardization."""

    def __init__(self, dim: int, min_std: float = 1e-6):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self.min_std = min_std

    def observe(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return np.maximum(np.sqrt(self.m2 / (self.count - 1)), self.min_std)

    def __call__(self, x):
        if self.count < 2:
            return np.asarray(x, dtype=float)
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean.tolist(), "m2": self.m2.tolist()}

    def load(self, d: dict) -> None:
        self.count = d["count"]
        self.mean = np.asarray(d["mean"], dtype=float)
        self.m2 = np.asarray(d["m2"], dtype=float)


class ReplayMemory:
    """Fixed-capacity ring buffer of transitions stored column-wise."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, transition) -> None:
        obs = np.asarray(transition.observation, dtype=float)
        nxt = np.asarray(transition.next_observation, dtype=float)
        if obs.shape != (self.obs_dim,) or nxt.shape != (self.obs_dim,):
            raise ShapeMismatch(f"expected observations of shape ({self.obs_dim},)")
        i = self.cursor
        self.obs[i] = obs
        self.next_obs[i] = nxt
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.dones[i] = transition.done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng) -> np.ndarray:
        if self.size == 0 or batch_size > self.size:
            raise InsufficientMemory(f"need {batch_size} transitions, have {self.size}")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng):
        idx = self.sample_indices(batch_size, rng)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])

    def ordered(self) -> list:
        """Stored slots from oldest to newest."""
        if self.size < self.capacity:
            return list(range(self.size))
        return [(self.cursor + k) % self.capacity for k in range(self.capacity)]


def select_action(net: QNetwork, obs, epsilon: float, rng) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest action index."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() > epsilon:
        return int(np.argmax(net.forward(obs)))
    return int(rng.integers(0, net.num_actions))


def td_targets(net, target_net, obs, actions, rewards, next_obs, dones, gamma):
    """Q-learning targets: current predictions with the taken action replaced."""
    q = net.forward(obs)
    q_next = target_net.forward(next_obs)
    y = rewards + gamma * q_next.max(axis=1) * (~dones)
    targets = q.copy()
    targets[np.arange(len(actions)), actions] = y
    return targets


class DQNAgent:
    def __init__(self, obs_dim: int, num_actions: int, hp: AgentHyperparams = None, seed=None):
        self.hp = hp or AgentHyperparams()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        init_seed = int(self.rng.integers(0, 2**32))
        self.net = QNetwork(obs_dim, num_actions, self.hp.hidden, self.hp.activation, seed=init_seed)
        self.optimizer = Adam(self.net.params, lr=self.hp.learning_rate)
        self.memory = ReplayMemory(self.hp.memory_capacity, obs_dim)
        self.target_net = self.net.copy() if self.hp.target_update else None
        self.normalizer = RunningNormalizer(obs_dim) if self.hp.normalize_obs else None
        self.learn_steps = 0

    def observe(self, obs) -> None:
        """Feed a fresh observation to the input statistics (training only)."""
        if self.normalizer is not None:
            self.normalizer.observe(obs)

    def prepare(self, obs):
        return self.normalizer(obs) if self.normalizer is not None else np.asarray(obs, dtype=float)

    def epsilon(self, episode: int) -> float:
        return epsilon_at(self.hp, episode)

    def q_values(self, obs) -> np.ndarray:
        return self.net.forward(self.prepare(obs))

    def act(self, obs, epsilon: float) -> int:
        return select_action(self.net, self.prepare(obs), epsilon, self.rng)

    def greedy(self, obs) -> int:
        return int(np.argmax(self.q_values(obs)))

    def store(self, transition) -> None:
        self.memory.push(transition)

    def learn(self) -> float:
        """One optimizer step on a uniform batch; returns the pre-step MSE."""
        hp = self.hp
        if len(self.memory) < hp.batch_size:
            raise InsufficientMemory(f"need {hp.batch_size} transitions, have {len(self.memory)}")
        obs, actions, rewards, next_obs, dones = self.memory.sample(hp.batch_size, self.rng)
        obs, next_obs = self.prepare(obs), self.prepare(next_obs)
        target_net = self.target_net if self.target_net is not None else self.net
        targets = td_targets(self.net, target_net, obs, actions, rewards, next_obs, dones, hp.gamma)
        loss, grads = self.net.loss_and_grads(obs, targets)
        self.optimizer.step(self.net.params, grads)
        self.learn_steps += 1
        if self.target_net is not None and self.learn_steps % hp.target_update == 0:
            self.target_net = self.net.copy()
        return loss

    # checkpoints ---------------------------------------------------------

    def to_checkpoint(self) -> dict:
        net, opt = self.net, self.optimizer
        return {
            "version": CHECKPOINT_VERSION,
            "dims": net.dims,
            "activation": net.activation,
            "hyperparams": self.hp.to_dict(),
            "seed": self.seed,
            "params": {k: net.params[k].tolist() for k in PARAM_NAMES},
            "optimizer": {
                "t": opt.t,
                "m": {k: opt.m[k].tolist() for k in PARAM_NAMES},
                "v": {k: opt.v[k].tolist() for k in PARAM_NAMES},
            },
            "learn_steps": self.learn_steps,
            "normalizer": self.normalizer.to_dict() if self.normalizer is not None else None,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_checkpoint()))

    @classmethod
    def from_checkpoint(cls, ckpt: dict) -> "DQNAgent":
        if ckpt.get("version") != CHECKPOINT_VERSION:
            raise CheckpointMismatch(f"unsupported checkpoint version {ckpt.get('version')}")
        hp = AgentHyperparams.from_dict(ckpt["hyperparams"])
        dims = ckpt["dims"]
        agent = cls(dims[0], dims[-1], hp, seed=ckpt.get("seed"))
        for k in PARAM_NAMES:
            agent.net.params[k] = np.asarray(ckpt["params"][k], dtype=float)
            agent.optimizer.m[k] = np.asarray(ckpt["optimizer"]["m"][k], dtype=float)
            agent.optimizer.v[k] = np.asarray(ckpt["optimizer"]["v"][k], dtype=float)
        agent.optimizer.t = ckpt["optimizer"]["t"]
        agent.learn_steps = ckpt.get("learn_steps", 0)
        if agent.normalizer is not None and ckpt.get("normalizer"):
            agent.normalizer.load(ckpt["normalizer"])
        if agent.target_net is not None:
            agent.target_net = agent.net.copy()
        return agent

    @classmethod
    def load(cls, path) -> "DQNAgent":
        with open(path) as fh:
            return cls.from_checkpoint(json.load(fh))
