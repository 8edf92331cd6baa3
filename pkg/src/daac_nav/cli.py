"""``daac-nav`` command line.

Subcommands: train-goal, train-avoid, eval, compare, oracle.
Exit codes: 0 ok, 1 usage/config error, 2 I/O error, 3 success threshold
(or oracle check) failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, parse_override
from .dueling_dqn import AVOIDANCE, GOAL
from .model_io import ModelFormatError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_THRESHOLD = 0, 1, 2, 3

log = logging.getLogger("daac_nav")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="daac-nav", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("train-goal", "train-avoid", "eval", "compare", "oracle"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="section.key = value config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--episodes", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--mode", choices=["goal", "avoid", "daac", "qd"])
        s.add_argument("--scenario", help="goal_training|avoidance_training|open_corner|multi_goal|FILE")
        s.add_argument("--noise", choices=["on", "off"])
        s.add_argument("--goal-model")
        s.add_argument("--avoid-model")
        s.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _flag_overrides(args) -> list[tuple[str, str]]:
    items = []
    if args.seed is not None:
        items.append(("run.seed", str(args.seed)))
    if args.out is not None:
        items.append(("run.out", args.out))
    if args.mode is not None:
        items.append(("run.mode", args.mode))
    if args.scenario is not None:
        items.append(("run.scenario", args.scenario))
    if args.goal_model is not None:
        items.append(("eval.goal_model", args.goal_model))
    if args.avoid_model is not None:
        items.append(("eval.avoid_model", args.avoid_model))
    if args.noise is not None:
        if args.command in ("train-goal", "train-avoid"):
            if args.noise == "off":
                items.append(("lidar.noise_std", "0.0"))
        else:
            items.append(("eval.noise", "true" if args.noise == "on" else "false"))
    if args.episodes is not None:
        section = {"train-goal": "goal_train", "train-avoid": "avoid_train"}.get(args.command, "eval")
        items.append((f"{section}.episodes", str(args.episodes)))
    return items


def run_oracles() -> bool:
    from .dueling_dqn import DuelingNet
    from .gradcheck import check_network_gradients
    from .tabular import gridworld, tabular_q_learning, value_iteration

    ok = True
    for kind in (GOAL, AVOIDANCE):
        rng = np.random.default_rng(0)
        rep = check_network_gradients(DuelingNet.build(kind, rng), rng, n_params=200)
        passed = rep.passed(1e-5)
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] gradient check {kind}: max rel err {rep.max_rel_error:.2e}")
    mdp = gridworld()
    q_star = value_iteration(mdp, 0.9)
    q = tabular_q_learning(mdp, 0.5, 0.9, 20000, np.random.default_rng(0), eps=0.5, alpha_decay=0.001)
    err = float(np.max(np.abs(q - q_star)))
    ok &= err < 1e-6
    print(f"[{'PASS' if err < 1e-6 else 'FAIL'}] tabular Q-learning vs value iteration: max-norm {err:.2e}")
    return ok


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = [parse_override(o) for o in args.override]
        cfg = load_config(args.config, _flag_overrides(args) + overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    from . import runner

    try:
        if args.command == "oracle":
            return EXIT_OK if run_oracles() else EXIT_THRESHOLD
        if args.command in ("train-goal", "train-avoid"):
            kind = GOAL if args.command == "train-goal" else AVOIDANCE

            def progress(ep, r):
                if args.verbose and (ep + 1) % 50 == 0:
                    log.info("episode %d reward %.3f", ep + 1, r)

            res = runner.run_train(cfg, kind, Path(cfg.run.out), progress)
            print(f"trained {kind} network: {len(res.episode_rewards)} episodes -> {cfg.run.out}")
            return EXIT_OK
        if args.command == "eval":
            rep = runner.run_eval(cfg, Path(cfg.run.out))
            print(f"{rep.mode}: success {rep.success_rate:.2%} over {len(rep.metrics)} episodes")
            return EXIT_THRESHOLD if rep.success_rate < cfg.eval.min_success_rate else EXIT_OK
        if args.command == "compare":
            reps = runner.run_compare(cfg, Path(cfg.run.out))
            for mode, rep in reps.items():
                print(f"{mode}: success {rep.success_rate:.2%}, mean steps {rep.mean_steps:.1f}")
            worst = min(r.success_rate for r in reps.values() if r.mode == "daac")
            return EXIT_THRESHOLD if worst < cfg.eval.min_success_rate else EXIT_OK
    except (ModelFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
