"""Experiment orchestration: training, evaluation, auditing and export.

A run directory holds::

    config.json         resolved RunConfig plus its content hash
    train.csv           episode, return, moving_avg, epsilon
    train_report.json   summary of the training run (includes wall-clock)
    checkpoint.json     DQN weights, optimizer state and hyperparameters
    episodes.jsonl      transition log of every training episode
    eval.json           greedy first-try evaluation
    eval_episodes.jsonl first step of every evaluation episode
    audit.jsonl         one attribution report per logged episode
    audit_summary.json  totals over the audited log
"""

from __future__ import annotations

import csv
import json
import logging
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .audit import audit_values
from .dqn import AgentHyperparams, DQNAgent
from .env import AuditEnv, EnvOptions, EpisodeLogWriter, Transition, config_hash, read_episode_log
from .errors import CheckpointMismatch, ContractViolation, InvalidConfig, MissingArtifacts
from .network import NetworkConfig, build_network
from .oracle import attribute

log = logging.getLogger(__name__)

MOVING_AVERAGE_WINDOW = 50
# Evaluation and baselines draw from a seed range disjoint from training.
EVAL_SEED_OFFSET = 1_000_003
TRAIN_CSV_COLUMNS = ("episode", "return", "moving_avg", "epsilon")


@dataclass
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    env: EnvOptions = field(default_factory=EnvOptions)
    agent: AgentHyperparams = field(default_factory=AgentHyperparams)
    episodes: int = 3000
    eval_episodes: int = 1000
    seed: int = 0
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.episodes < 1:
            raise InvalidConfig("episodes must be >= 1")
        if self.eval_episodes < 1:
            raise InvalidConfig("eval_episodes must be >= 1")

    def to_dict(self) -> dict:
        return {
            "network": self.network.to_dict(),
            "env": self.env.to_dict(),
            "agent": self.agent.to_dict(),
            "episodes": self.episodes,
            "eval_episodes": self.eval_episodes,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict, out_dir=None) -> "RunConfig":
        return cls(
            network=NetworkConfig.from_dict(d.get("network", {})),
            env=EnvOptions.from_dict(d.get("env", {})),
            agent=AgentHyperparams.from_dict(d.get("agent", {})),
            episodes=d.get("episodes", 3000),
            eval_episodes=d.get("eval_episodes", 1000),
            seed=d.get("seed", 0),
            out_dir=out_dir,
        )

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def save(self, path) -> None:
        payload = {"config": self.to_dict(), "config_hash": self.hash}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            payload = json.load(fh)
        return cls.from_dict(payload["config"], out_dir=str(Path(path).parent))


@dataclass
class TrainingReport:
    returns: list
    moving_avg: list
    window: int
    wall_clock: float
    checkpoint: Optional[str]
    config_hash: str
    agent: DQNAgent = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "episodes": len(self.returns),
            "window": self.window,
            "final_moving_avg": self.moving_avg[-1],
            "wall_clock": self.wall_clock,
            "checkpoint": self.checkpoint,
            "config_hash": self.config_hash,
        }


@dataclass
class EvalReport:
    episodes: int
    first_try_correct: int
    confusion: list
    policy: str = "greedy"

    @property
    def accuracy(self) -> float:
        return self.first_try_correct / self.episodes if self.episodes else 0.0

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "first_try_correct": self.first_try_correct,
            "accuracy": self.accuracy,
            "confusion": self.confusion,
        }


def moving_average(series, window=MOVING_AVERAGE_WINDOW) -> list:
    out = []
    acc = 0.0
    for i, x in enumerate(series):
        acc += x
        if i >= window:
            acc -= series[i - window]
        out.append(acc / min(i + 1, window))
    return out


def _out_dir(config: RunConfig) -> Optional[Path]:
    if config.out_dir is None:
        return None
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def make_env(config: RunConfig, seed, graph=None) -> AuditEnv:
    if graph is None:
        graph = build_network(config.network)
    return AuditEnv(graph, config.env, seed=seed)


def write_train_csv(path, returns, moving, epsilons) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_CSV_COLUMNS)
        for i, (r, m, e) in enumerate(zip(returns, moving, epsilons)):
            writer.writerow([i, r, repr(m), repr(e)])


def read_train_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "episode": [int(r["episode"]) for r in rows],
        "return": [int(r["return"]) for r in rows],
        "moving_avg": [float(r["moving_avg"]) for r in rows],
        "epsilon": [float(r["epsilon"]) for r in rows],
    }


def train(config: RunConfig, log_transitions: bool = True) -> TrainingReport:
    """Run the epsilon-greedy DQN loop and persist the run artifacts."""
    start = time.perf_counter()
    out = _out_dir(config)
    env = make_env(config, seed=config.seed)
    agent = DQNAgent(env.obs_dim, env.num_actions, config.agent, seed=config.seed + 1)
    cfg_hash = config.hash
    writer = None
    if out is not None:
        config.save(out / "config.json")
        if log_transitions:
            writer = EpisodeLogWriter(out / "episodes.jsonl", env.base_graph, config.env, cfg_hash)

    returns, epsilons = [], []
    batch = config.agent.batch_size
    try:
        for ep in range(config.episodes):
            obs = env.reset()
            agent.observe(obs)
            if writer is not None:
                writer.episode(ep, config.seed, env)
            eps = agent.epsilon(ep)
            done = False
            while not done:
                action = agent.act(obs, eps)
                nxt, reward, done = env.step(action)
                t = Transition(obs, action, reward, nxt, done)
                agent.store(t)
                if writer is not None:
                    writer.transition(t)
                if len(agent.memory) >= batch:
                    agent.learn()
                obs = nxt
            returns.append(env.episode_return)
            epsilons.append(eps)
            if (ep + 1) % 500 == 0:
                log.info("episode %d  avg return %.3f  eps %.3f", ep + 1,
                         float(np.mean(returns[-MOVING_AVERAGE_WINDOW:])), eps)
    finally:
        if writer is not None:
            writer.close()

    moving = moving_average(returns)
    ckpt_path = None
    if out is not None:
        ckpt_path = str(out / "checkpoint.json")
        agent.save(ckpt_path)
        write_train_csv(out / "train.csv", returns, moving, epsilons)
    report = TrainingReport(
        returns=returns,
        moving_avg=moving,
        window=MOVING_AVERAGE_WINDOW,
        wall_clock=time.perf_counter() - start,
        checkpoint=ckpt_path,
        config_hash=cfg_hash,
        agent=agent,
    )
    if out is not None:
        (out / "train_report.json").write_text(json.dumps(report.to_dict(), indent=2))
    return report


def evaluate_policy(policy: Callable, config: RunConfig, episodes: int, name="policy",
                    log_path=None, graph=None) -> EvalReport:
    """First-try identification rate of ``policy(obs, env) -> action``.

    Episodes use the evaluation seed range, so every policy is scored on the
    same sequence of hidden agents and perturbations.  ``graph`` overrides
    the network built from ``config``.
    """
    env = make_env(config, seed=config.seed + EVAL_SEED_OFFSET, graph=graph)
    n = env.num_agents
    confusion = [[0] * n for _ in range(n)]
    correct = 0
    writer = None
    if log_path is not None:
        writer = EpisodeLogWriter(log_path, env.base_graph, config.env, config.hash)
    try:
        for ep in range(episodes):
            obs = env.reset()
            hidden = env.hidden_state
            if writer is not None:
                writer.episode(ep, config.seed + EVAL_SEED_OFFSET, env)
            action = int(policy(obs, env))
            nxt, reward, done = env.step(action)
            if writer is not None:
                writer.transition(Transition(obs, action, reward, nxt, done))
            confusion[hidden][action] += 1
            correct += action == hidden
    finally:
        if writer is not None:
            writer.close()
    return EvalReport(episodes=episodes, first_try_correct=correct, confusion=confusion, policy=name)


def evaluate(checkpoint, config: RunConfig, eval_episodes: Optional[int] = None) -> EvalReport:
    """Greedy (epsilon = 0) evaluation of a trained checkpoint."""
    agent = checkpoint if isinstance(checkpoint, DQNAgent) else DQNAgent.load(checkpoint)
    expected_in = config.network.num_elements + (1 if config.env.include_prev_state else 0)
    if agent.net.obs_dim != expected_in or agent.net.num_actions != config.network.num_agents:
        raise CheckpointMismatch(
            f"checkpoint dims {agent.net.dims} do not fit {expected_in} inputs / "
            f"{config.network.num_agents} actions"
        )
    out = _out_dir(config)
    episodes = eval_episodes or config.eval_episodes
    report = evaluate_policy(
        lambda obs, env: agent.greedy(obs), config, episodes, name="greedy",
        log_path=None if out is None else out / "eval_episodes.jsonl",
    )
    if out is not None:
        (out / "eval.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return report


def baseline_random(config: RunConfig, episodes: Optional[int] = None, graph=None) -> EvalReport:
    """Uniform random guessing, scored exactly like :func:`evaluate`."""
    rng = np.random.default_rng(config.seed + 2 * EVAL_SEED_OFFSET)
    report = evaluate_policy(
        lambda obs, env: rng.integers(0, env.num_actions), config,
        episodes or config.eval_episodes, name="random", graph=graph,
    )
    out = _out_dir(config)
    if out is not None:
        (out / "baseline.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return report


@dataclass
class AuditResult:
    reports: list
    summary: dict


def audit(log_path, mode: str = "both", out_path=None) -> AuditResult:
    """Attribute every episode in a transition log.

    ``mode`` is ``oracle``, ``equations`` or ``both``; with ``both`` the two
    pipelines must name the same agent or ContractViolation is raised.
    """
    if mode not in ("oracle", "equations", "both"):
        raise ValueError(f"unknown audit mode {mode!r}")
    header, episodes = read_episode_log(log_path)
    reports = []
    summary = {"episodes": 0, "mode": mode, "disagreements": 0, "hidden_state_matches": 0}
    if header is None:
        summary.update(attributions=[], responsibility_totals=[])
        _write_audit(out_path, reports, summary)
        return AuditResult(reports, summary)

    graph = header["graph"]
    links, impact = graph["links"], graph["impact"]
    num_agents, pool = graph["num_agents"], graph.get("pool_total", 1.0)
    base = header["base_values"]
    attributions = [0] * num_agents
    totals = [0.0] * num_agents

    for ep in episodes:
        values = ep["values"]
        record = {"episode": ep["episode"], "hidden_state": ep["hidden_state"]}
        oracle_rep = eq_rep = None
        if mode in ("oracle", "both"):
            oracle_rep = attribute(base, values, links, impact, pool_total=pool)
        if mode in ("equations", "both"):
            eq_rep = audit_values(base, values, links, num_agents)
        if oracle_rep is not None and eq_rep is not None:
            if oracle_rep.modifying_agent != eq_rep.modifying_agent:
                summary["disagreements"] += 1
                raise ContractViolation(
                    f"episode {ep['episode']}: oracle names agent {oracle_rep.modifying_agent}, "
                    f"equations name agent {eq_rep.modifying_agent}"
                )
        main = oracle_rep or eq_rep
        record.update(main.to_dict())
        if eq_rep is not None and oracle_rep is not None:
            record["equations_agent"] = eq_rep.modifying_agent
            record["equations_change_index"] = eq_rep.change_index
        reports.append(record)
        agent = main.modifying_agent
        attributions[agent] += 1
        if oracle_rep is not None:
            for a, r in enumerate(oracle_rep.extra["responsibility"]):
                totals[a] += r
        else:
            totals[agent] += 100.0
        summary["hidden_state_matches"] += agent == ep["hidden_state"]

    summary["episodes"] = len(reports)
    summary["attributions"] = attributions
    summary["responsibility_totals"] = totals
    _write_audit(out_path, reports, summary)
    return AuditResult(reports, summary)


def _write_audit(out_path, reports, summary) -> None:
    if out_path is None:
        return
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r) + "\n")
    summary_path = out_path.with_name(out_path.stem + "_summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))


def export(run_dir, fmt: str = "csv") -> list:
    """Write reward-curve, eval and audit-summary files under ``run_dir/export``."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    run_dir = Path(run_dir)
    train_csv = run_dir / "train.csv"
    if not train_csv.exists():
        raise MissingArtifacts(f"{train_csv} not found; run train first")
    dest = run_dir / "export"
    dest.mkdir(exist_ok=True)
    series = read_train_csv(train_csv)
    written = []
    if fmt == "csv":
        path = dest / "reward_curve.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("episode", "return", "moving_avg"))
            for row in zip(series["episode"], series["return"], series["moving_avg"]):
                writer.writerow([row[0], row[1], repr(row[2])])
    else:
        path = dest / "reward_curve.json"
        payload = {k: series[k] for k in ("episode", "return", "moving_avg")}
        path.write_text(json.dumps(payload))
    written.append(path)
    for name in ("eval.json", "audit_summary.json"):
        src = run_dir / name
        if src.exists():
            shutil.copyfile(src, dest / name)
            written.append(dest / name)
    return written


def _train_and_eval(config: RunConfig) -> dict:
    report = train(config)
    ev = evaluate(report.agent, config)
    return {"seed": config.seed, "out_dir": config.out_dir,
            "final_moving_avg": report.moving_avg[-1], "accuracy": ev.accuracy}


def sweep(config: RunConfig, runs: int, parallel: int = 1) -> list:
    """Train and evaluate ``runs`` seeds, each in its own ``seed_<n>`` directory."""
    base = Path(config.out_dir or "runs")
    configs = [replace(config, seed=config.seed + i, out_dir=str(base / f"seed_{config.seed + i}"))
               for i in range(runs)]
    if parallel <= 1:
        return [_train_and_eval(c) for c in configs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_train_and_eval, configs))
