"""Partially observed audit game.

At every reset one management agent, drawn uniformly, moves some of its
resources.  The learner sees only the resulting per-element values and must
name the agent.  A correct guess ends the episode with +1; a wrong guess
costs -1 and leaves the observation unchanged.  The cumulative return is
floored at ``lower_bound``, which also ends the episode.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    ActionOutOfRange,
    IllegalAllocation,
    ParseError,
    PerturbationError,
    SteppingFinishedEpisode,
)
from .network import NetworkGraph, apply_resource_change, element_values, values_distinct

MAX_PERTURB_TRIES = 100


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: int
    done: bool


@dataclass
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool

    def to_dict(self) -> dict:
        return {
            "type": "transition",
            "observation": [float(x) for x in self.observation],
            "action": int(self.action),
            "reward": float(self.reward),
            "next_observation": [float(x) for x in self.next_observation],
            "done": bool(self.done),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transition":
        return cls(
            observation=np.asarray(d["observation"], dtype=float),
            action=int(d["action"]),
            reward=float(d["reward"]),
            next_observation=np.asarray(d["next_observation"], dtype=float),
            done=bool(d["done"]),
        )


@dataclass(frozen=True)
class EnvOptions:
    lower_bound: int = -10
    include_prev_state: bool = False
    delta_min: float = 0.02
    delta_max: float = 0.10

    def to_dict(self) -> dict:
        return {
            "lower_bound": self.lower_bound,
            "include_prev_state": self.include_prev_state,
            "delta_min": self.delta_min,
            "delta_max": self.delta_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvOptions":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


class AuditEnv:
    """Gym-style environment over a fixed-topology :class:`NetworkGraph`.

    Each reset starts from ``base_graph`` and applies exactly one non-zero,
    legal perturbation by the hidden agent, so the change between
    ``base_graph`` and the current graph is always attributable.
    """

    def __init__(self, base_graph: NetworkGraph, options: EnvOptions = EnvOptions(), seed=None):
        if options.lower_bound > -1:
            raise ValueError("lower_bound must be <= -1")
        if not 0 < options.delta_min <= options.delta_max:
            raise ValueError("need 0 < delta_min <= delta_max")
        self.base_graph = base_graph
        self.options = options
        self.num_agents = base_graph.num_agents
        self.num_actions = base_graph.num_agents
        self.obs_dim = base_graph.num_elements + (1 if options.include_prev_state else 0)
        self.rng = np.random.default_rng(seed)
        self.graph = base_graph
        self._hidden = None
        self.prev_hidden = 0
        self.episode_return = 0
        self.step_count = 0
        self.done = True
        self.last_delta = 0.0

    @property
    def hidden_state(self) -> int:
        """Ground-truth modifying agent.  For tests and oracles, not learners."""
        if self._hidden is None:
            raise RuntimeError("environment has not been reset")
        return self._hidden

    def sample_modifier(self) -> int:
        return int(self.rng.integers(0, self.num_agents))

    def _perturb(self, agent: int) -> NetworkGraph:
        opts = self.options
        pool = self.base_graph.pool_total
        sign = 1.0 if self.rng.random() < 0.5 else -1.0
        held = self.base_graph.resources[agent]
        room = pool - sum(self.base_graph.resources)
        for _ in range(2):
            # Skip a direction in which even the smallest move is illegal.
            limit = room if sign > 0 else held
            if limit < opts.delta_min * pool:
                sign = -sign
                continue
            for _ in range(MAX_PERTURB_TRIES):
                magnitude = self.rng.uniform(opts.delta_min, opts.delta_max) * pool
                try:
                    graph = apply_resource_change(self.base_graph, agent, sign * magnitude)
                except IllegalAllocation:
                    continue
                if values_distinct(graph):
                    self.last_delta = sign * magnitude
                    return graph
            sign = -sign
        raise PerturbationError(f"no legal perturbation found for agent {agent}")

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        if self._hidden is not None:
            self.prev_hidden = self._hidden
        self._hidden = self.sample_modifier()
        self.graph = self._perturb(self._hidden)
        self.episode_return = 0
        self.step_count = 0
        self.done = False
        return self.observation_vector()

    def observation_vector(self, include_prev_state: Optional[bool] = None) -> np.ndarray:
        if include_prev_state is None:
            include_prev_state = self.options.include_prev_state
        obs = element_values(self.graph)
        if include_prev_state:
            obs = np.append(obs, self.prev_hidden / self.num_agents)
        return obs

    def step(self, action: int) -> StepResult:
        if self.done:
            raise SteppingFinishedEpisode("call reset() before stepping")
        if not 0 <= int(action) < self.num_actions:
            raise ActionOutOfRange(f"action {action} not in [0, {self.num_actions})")
        self.step_count += 1
        if int(action) == self._hidden:
            reward, done = 1, True
        else:
            reward = -1
            done = self.episode_return + reward <= self.options.lower_bound
        self.episode_return += reward
        self.done = done
        return StepResult(self.observation_vector(), reward, done)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class EpisodeLogWriter:
    """JSON Lines log: one network header, then per episode a header record
    followed by its transitions."""

    def __init__(self, path, graph: NetworkGraph, options: EnvOptions, cfg_hash: str):
        self.fh = open(path, "w")
        self.cfg_hash = cfg_hash
        self._write({
            "type": "network",
            "graph": graph.to_dict(),
            "env": options.to_dict(),
            "base_values": [float(x) for x in element_values(graph)],
            "config_hash": cfg_hash,
        })

    def _write(self, record: dict) -> None:
        self.fh.write(json.dumps(record) + "\n")

    def episode(self, index: int, seed, env: AuditEnv) -> None:
        self._write({
            "type": "episode",
            "episode": index,
            "seed": seed,
            "hidden_state": env.hidden_state,
            "config_hash": self.cfg_hash,
            "values": [float(x) for x in element_values(env.graph)],
        })

    def transition(self, t: Transition) -> None:
        self._write(t.to_dict())

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_episode_log(path):
    """Parse a log written by :class:`EpisodeLogWriter`.

    Returns ``(network_header, episodes)`` where each episode is its header
    dict with an added ``transitions`` list.  A file with no records yields
    ``(None, [])``.
    """
    header = None
    episodes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                kind = rec["type"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if kind == "network":
                header = rec
            elif kind == "episode":
                if header is None:
                    raise ParseError(f"{path}:{lineno}: episode before network header")
                rec["transitions"] = []
                episodes.append(rec)
            elif kind == "transition":
                if not episodes:
                    raise ParseError(f"{path}:{lineno}: transition before episode header")
                episodes[-1]["transitions"].append(Transition.from_dict(rec))
            else:
                raise ParseError(f"{path}:{lineno}: unknown record type {kind!r}")
    return header, episodes
