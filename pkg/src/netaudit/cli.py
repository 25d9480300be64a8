"""``netaudit`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import harness
from .dqn import AgentHyperparams
from .env import EnvOptions
from .errors import NetAuditError
from .network import NetworkConfig


class _Parser(argparse.ArgumentParser):
    # Usage errors are reported as JSON on stderr like every other failure.
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        sys.exit(2)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="RunConfig JSON (e.g. a previous run's config.json)")
    p.add_argument("--network", help="network configuration JSON file")
    p.add_argument("--agents", type=int, help="number of management agents")
    p.add_argument("--elements", type=int, help="number of network elements")
    p.add_argument("--network-seed", type=int, help="seed for random links/impact/resources")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--out", help="run directory")
    p.add_argument("--lower-bound", type=int)
    p.add_argument("--include-prev-state", action="store_true", default=None)
    p.add_argument("--delta-min", type=float)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--memory", type=int, dest="memory_capacity")
    p.add_argument("--hidden", type=int, nargs=2, metavar=("H1", "H2"))
    p.add_argument("--activation", choices=["relu", "linear"])
    p.add_argument("--epsilon-start", type=float)
    p.add_argument("--epsilon-end", type=float)
    p.add_argument("--epsilon-decay-episodes", type=int)
    p.add_argument("--epsilon-schedule", choices=["exponential", "linear"])
    p.add_argument("--target-update", type=int)
    p.add_argument("--no-normalize", action="store_true", help="feed raw observations to the net")


def resolve_config(args) -> harness.RunConfig:
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
        cfg = harness.RunConfig.from_dict(payload.get("config", payload))
    else:
        cfg = harness.RunConfig()
    net = cfg.network
    if args.network:
        net = NetworkConfig.load(args.network)
    for attr, key in (("agents", "num_agents"), ("elements", "num_elements"), ("network_seed", "seed")):
        if getattr(args, attr) is not None:
            setattr(net, key, getattr(args, attr))

    env_kw = cfg.env.to_dict()
    for key in ("lower_bound", "include_prev_state", "delta_min", "delta_max"):
        if getattr(args, key) is not None:
            env_kw[key] = getattr(args, key)

    agent_kw = cfg.agent.to_dict()
    for key in ("gamma", "learning_rate", "batch_size", "memory_capacity", "hidden", "activation",
                "epsilon_start", "epsilon_end", "epsilon_decay_episodes", "epsilon_schedule",
                "target_update"):
        if getattr(args, key) is not None:
            agent_kw[key] = getattr(args, key)
    if args.no_normalize:
        agent_kw["normalize_obs"] = False

    seed = cfg.seed if args.seed is None else args.seed
    if os.environ.get("NETAUDIT_SEED"):
        seed = int(os.environ["NETAUDIT_SEED"])
    return harness.RunConfig(
        network=net,
        env=EnvOptions.from_dict(env_kw),
        agent=AgentHyperparams.from_dict(agent_kw),
        episodes=args.episodes or cfg.episodes,
        eval_episodes=args.eval_episodes or cfg.eval_episodes,
        seed=seed,
        out_dir=args.out,
    )


def cmd_train(args) -> dict:
    cfg = resolve_config(args)
    if cfg.out_dir is None:
        cfg.out_dir = "runs/latest"
    if args.parallel > 1:
        return {"runs": harness.sweep(cfg, runs=args.parallel, parallel=args.parallel)}
    report = harness.train(cfg)
    return {"run_dir": cfg.out_dir, **report.to_dict()}


def cmd_eval(args) -> dict:
    run_dir = Path(args.run_dir)
    cfg = harness.RunConfig.load(run_dir / "config.json")
    if os.environ.get("NETAUDIT_SEED"):
        cfg.seed = int(os.environ["NETAUDIT_SEED"])
    checkpoint = args.checkpoint or run_dir / "checkpoint.json"
    report = harness.evaluate(checkpoint, cfg, args.episodes)
    return report.to_dict()


def cmd_audit(args) -> dict:
    out = args.out
    if out is None and args.run_dir:
        out = Path(args.run_dir) / "audit.jsonl"
    log_path = args.log or Path(args.run_dir) / "eval_episodes.jsonl"
    result = harness.audit(log_path, args.mode, out_path=out)
    return result.summary


def cmd_baseline(args) -> dict:
    cfg = resolve_config(args)
    return harness.baseline_random(cfg, args.episodes or cfg.eval_episodes).to_dict()


def cmd_export(args) -> dict:
    paths = harness.export(args.run_dir, args.format)
    return {"written": [str(p) for p in paths]}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netaudit", description="Attribute network changes to management agents.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train the DQN auditor")
    _add_run_options(p)
    p.add_argument("--parallel", type=int, default=1, help="train N seeds concurrently")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy first-try evaluation of a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="attribute every episode of a transition log")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--log")
    src.add_argument("--run-dir")
    p.add_argument("--mode", choices=["oracle", "equations", "both"], default="both")
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("baseline", help="uniform random policy on the evaluation seeds")
    _add_run_options(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("export", help="export reward curve and reports")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except NetAuditError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
