"""Train the desk-scale goal and avoidance networks (cached) and run the
trained-model evaluations: goal-only success, the open-corner DAAC versus QD
comparison and the multi-goal course.  Figures and CSVs land in the output
directory; the numbers printed here are the ones the acceptance suite checks.

    python scripts/run_acceptance_experiments.py [--cache DIR] [--out DIR]
"""

import argparse
import logging
from pathlib import Path

from daac_nav.composer import DAAC, GOAL_ONLY, QD
from daac_nav.dueling_dqn import AVOIDANCE, GOAL
from daac_nav.experiments import (
    DEFAULT_CACHE,
    eval_config,
    improved_threefold,
    model_path,
    plateau,
    read_rewards,
    thirds,
    trained_run,
)
from daac_nav.model_io import load_model
from daac_nav.runner import evaluate_mode, write_eval_outputs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cache", type=Path, default=DEFAULT_CACHE)
    ap.add_argument("--out", type=Path, default=Path("runs") / "acceptance")
    ap.add_argument("--train-only", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    goal_dir = trained_run(GOAL, args.cache)
    _, smoothed = read_rewards(goal_dir)
    print(f"goal training: plateau {plateau(smoothed):.2f} ({goal_dir})", flush=True)
    avoid_dir = trained_run(AVOIDANCE, args.cache)
    _, smoothed = read_rewards(avoid_dir)
    first, final = thirds(smoothed)
    print(f"avoidance training: first third {first:.2f}, final third {final:.2f}, "
          f"threefold {improved_threefold(first, final)}, plateau {plateau(smoothed):.2f} ({avoid_dir})", flush=True)
    if args.train_only:
        return

    g = load_model(model_path(goal_dir, GOAL), GOAL)
    a = load_model(model_path(avoid_dir, AVOIDANCE), AVOIDANCE)
    gm, am = model_path(goal_dir, GOAL), model_path(avoid_dir, AVOIDANCE)

    out = args.out / "goal_only"
    out.mkdir(parents=True, exist_ok=True)
    rep = evaluate_mode(eval_config("goal_training", gm, None, 100), GOAL_ONLY, g)
    write_eval_outputs(rep, out)
    print(f"goal-only eval: {rep.success_rate:.0%} over 100 episodes", flush=True)

    for scenario, modes in (("open_corner", (DAAC, QD)), ("multi_goal", (DAAC, QD))):
        cfg = eval_config(scenario, gm, am, 20)
        for mode in modes:
            out = args.out / scenario / mode
            out.mkdir(parents=True, exist_ok=True)
            rep = evaluate_mode(cfg, mode, g, a)
            write_eval_outputs(rep, out)
            reasons = {r: sum(m.reason == r for m in rep.metrics) for r in ("success", "collision", "timeout")}
            print(f"{scenario} {mode}: {rep.success_rate:.0%} success, mean steps {rep.mean_steps:.1f}, {reasons}",
                  flush=True)


if __name__ == "__main__":
    main()
