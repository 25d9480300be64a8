"""Exit criteria for the build, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Tolerances are fixed here and are not tuned per run.
"""

import time
from fractions import Fraction

import numpy as np

from netaudit import harness
from netaudit.audit import agent_responsibility, element_responsibility
from netaudit.cli import main
from netaudit.dqn import QNetwork
from netaudit.env import AuditEnv, EpisodeLogWriter
from netaudit.errors import IllegalAllocation
from netaudit.harness import RunConfig
from netaudit.network import NetworkConfig, apply_resource_change, build_network, element_values
from netaudit.oracle import attribute

from conftest import ACCEPTANCE_RESULTS
from gradcheck import max_relative_error, numeric_grads

ACCURACY_BAR = 0.95
REFERENCE_ACCURACY = 0.996
SUM_TOL = 1e-9
GRAD_TOL = 1e-4


def record(number, name, passed, detail):
    ACCEPTANCE_RESULTS.append((number, name, bool(passed), detail))
    assert passed, detail


def three_sigma(n, p):
    return 3 * np.sqrt(n * p * (1 - p))


def fuzz_config(r):
    agents = int(r.integers(2, 6))
    elements = int(r.integers(max(4, agents), 17))
    return NetworkConfig(num_agents=agents, num_elements=elements, seed=int(r.integers(0, 2**31)))


def test_1_identification_accuracy(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path))
    assert cfg.episodes <= 5000 and cfg.eval_episodes == 1000
    start = time.perf_counter()
    report = harness.train(cfg)
    ev = harness.evaluate(report.agent, cfg)
    elapsed = time.perf_counter() - start
    ok = ev.accuracy >= ACCURACY_BAR and elapsed < 600
    record(1, "identification accuracy", ok,
           f"{ev.first_try_correct}/{ev.episodes} = {ev.accuracy:.3f} first-try "
           f"(bar {ACCURACY_BAR}, reference {REFERENCE_ACCURACY}) after {cfg.episodes} "
           f"episodes in {elapsed:.1f}s")


def test_2_oracle_exactness():
    r = np.random.default_rng(2024)
    configs = [fuzz_config(r) for _ in range(25)]
    graphs = [build_network(c) for c in configs]
    shapes = {(g.num_agents, g.num_elements) for g in graphs}
    start = time.perf_counter()
    total = correct = 0
    for i in range(10_000):
        graph = graphs[i % len(graphs)]
        env = AuditEnv(graph, seed=i)
        obs = env.reset()
        rep = attribute(element_values(graph), obs, graph.links, graph.impact, graph.pool_total)
        total += 1
        correct += rep.modifying_agent == env.hidden_state
    elapsed = time.perf_counter() - start
    ok = correct == total and elapsed < 30 and len(shapes) >= 20
    record(2, "oracle exactness", ok,
           f"{correct}/{total} episodes over {len(configs)} configs "
           f"({len(shapes)} distinct shapes) in {elapsed:.1f}s")


def test_3_allocation_safety():
    r = np.random.default_rng(3)
    graphs = [build_network(fuzz_config(r)) for _ in range(50)]
    violations = accepted = 0
    for seq in range(10_000):
        g = graphs[seq % len(graphs)]
        for _ in range(10):
            agent = int(r.integers(0, g.num_agents))
            try:
                g = apply_resource_change(g, agent, float(r.uniform(-0.2, 0.2)))
            except IllegalAllocation:
                continue
            accepted += 1
            if sum(Fraction(x) for x in g.resources) > Fraction(g.pool_total) or min(g.resources) < 0:
                violations += 1
    record(3, "allocation legality", violations == 0,
           f"{violations} illegal states among {accepted} accepted changes in 10000 sequences")


def test_4_responsibility_normalization():
    r = np.random.default_rng(4)
    worst = {"mu": 0.0, "nu": 0.0, "dnu": 0.0}
    for i in range(1000):
        g = build_network(fuzz_config(r))
        env = AuditEnv(g, seed=i)
        env.reset()
        mu = element_responsibility(env.graph)
        nu, dnu = agent_responsibility(g, env.graph)
        worst["mu"] = max(worst["mu"], abs(mu.sum() - 100))
        worst["nu"] = max(worst["nu"], abs(nu.sum() - 100))
        worst["dnu"] = max(worst["dnu"], abs(dnu.sum()))
    ok = all(v <= SUM_TOL for v in worst.values())
    record(4, "responsibility normalization", ok,
           "max |sum mu - 100| = {mu:.1e}, |sum nu - 100| = {nu:.1e}, |sum dnu| = {dnu:.1e} "
           "over 1000 graphs".format(**worst))


def test_5_gradient_oracle():
    r = np.random.default_rng(5)
    errors = []
    for i in range(10):
        hidden = tuple(int(h) for h in r.integers(4, 17, size=2))
        activation = "relu" if i % 2 == 0 else "linear"
        net = QNetwork(8, 3, hidden=hidden, activation=activation, seed=int(r.integers(0, 2**31)))
        X = r.normal(size=(int(r.integers(4, 65)), 8))
        targets = net.forward(X) + r.normal(size=(X.shape[0], 3))
        _, analytic = net.loss_and_grads(X, targets)
        errors.append(max_relative_error(analytic, numeric_grads(net, X, targets)))
    worst = max(errors)
    record(5, "gradient oracle", worst < GRAD_TOL,
           f"max relative error {worst:.2e} over 10 nets (tolerance {GRAD_TOL})")


def test_6_reward_bound_and_random_policy():
    cfg = RunConfig()
    env = harness.make_env(cfg, seed=6)
    bound = cfg.env.lower_bound
    r = np.random.default_rng(6)
    n = 10_000
    lowest, first_hits = 0, 0
    for _ in range(n):
        env.reset()
        done, first = False, True
        while not done:
            a = int(r.integers(0, env.num_actions))
            if first:
                first_hits += a == env.hidden_state
                first = False
            _, _, done = env.step(a)
            lowest = min(lowest, env.episode_return)
    band = three_sigma(n, 1 / 3)
    ok = lowest >= bound and abs(first_hits - n / 3) <= band
    record(6, "reward bound / random policy", ok,
           f"lowest return {lowest} (bound {bound}); first-try {first_hits}/{n} = "
           f"{first_hits / n:.4f}, 1/3 +/- {band / n:.4f}")


def test_7_cross_oracle_agreement(tmp_path):
    cfg = RunConfig()
    env = harness.make_env(cfg, seed=7)
    path = tmp_path / "log.jsonl"
    with EpisodeLogWriter(path, env.base_graph, cfg.env, cfg.hash) as w:
        for ep in range(1000):
            env.reset()
            w.episode(ep, 7, env)
    oracle = harness.audit(path, "oracle").reports
    equations = harness.audit(path, "equations").reports
    disagreements = sum(a["modifying_agent"] != b["modifying_agent"]
                        for a, b in zip(oracle, equations))
    both = harness.audit(path, "both").summary
    ok = len(oracle) == 1000 and disagreements == 0 and both["disagreements"] == 0
    record(7, "cross-oracle agreement", ok,
           f"{disagreements} disagreements over {len(oracle)} episodes; "
           f"{both['hidden_state_matches']} match the logged hidden state")


def test_8_determinism(tmp_path, capsys):
    for name in ("a", "b"):
        run = tmp_path / name
        assert main(["train", "--out", str(run), "--seed", "8"]) == 0
        assert main(["eval", "--run-dir", str(run)]) == 0
    capsys.readouterr()
    same = {f: (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
            for f in ("train.csv", "eval.json")}
    record(8, "determinism", all(same.values()),
           ", ".join(f"{f} {'identical' if s else 'differs'}" for f, s in same.items()))
