"""Experiment drivers behind the CLI: training, evaluation and the
DAAC-versus-QD comparison.  Each writes its resolved config next to its
outputs so a run can be repeated byte for byte."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .composer import AVOID_ONLY, DAAC, GOAL_ONLY, MODES, QD, make_policy
from .config import RunConfig, dump_config
from .dueling_dqn import AVOIDANCE, GOAL, TrainResult, train_agent
from .geom2d_sim import LidarSpec
from .model_io import load_model, save_model
from .plots import learning_curve_svg, moving_average, trajectory_svg
from .rewards import avoidance_reward, goal_reward
from .scenarios import EvalLimits, EvalMetrics, ScenarioSpec, evaluate_policy, jitter_start

log = logging.getLogger(__name__)

REWARD_COLUMNS = ["episode", "reward", "smoothed", "steps", "outcome"]
METRIC_COLUMNS = ["seed", "success", "steps", "path_length", "return", "reason", "goals_reached"]
TRAJECTORY_COLUMNS = ["t", "x", "y", "theta", "action", "lambda", "v_o", "reward"]
FIXED_LAYOUTS = ("open_corner", "multi_goal", "file")
MODEL_FILES = {GOAL: "goal.model", AVOIDANCE: "avoidance.model"}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _prepare(out: Path, cfg: RunConfig) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))
    return out


# -- training ---------------------------------------------------------------

def reward_fn_for(kind: str, cfg: RunConfig):
    if kind == GOAL:
        gcfg = cfg.goal_reward
        return lambda obs, action, obs_next, crashed: goal_reward(obs.goal.d_g, obs_next.goal.d_g, gcfg)
    acfg = cfg.avoid_reward
    return lambda obs, action, obs_next, crashed: avoidance_reward(action, crashed, acfg)


def run_train(cfg: RunConfig, kind: str, out: Optional[Path] = None,
              progress: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Train one sub-agent; write rewards.csv, learning_curve.svg and the model."""
    from .scenarios import build_avoidance_training_world, build_goal_training_world

    out = _prepare(Path(out or cfg.run.out), cfg)
    tcfg = cfg.goal_train if kind == GOAL else cfg.avoid_train
    tcfg = dataclasses.replace(tcfg, seed=cfg.run.seed)
    builder = build_goal_training_world if kind == GOAL else build_avoidance_training_world
    result = train_agent(builder, reward_fn_for(kind, cfg), tcfg, kind, cfg.lidar,
                         dt=cfg.avoid_reward.dt, progress=progress)
    rewards = result.episode_rewards
    smoothed = moving_average(rewards, 10)
    write_csv(out / "rewards.csv", REWARD_COLUMNS, (
        {"episode": i + 1, "reward": r, "smoothed": s, "steps": n, "outcome": o}
        for i, (r, s, n, o) in enumerate(zip(rewards, smoothed, result.episode_steps, result.episode_outcomes))
    ))
    learning_curve_svg(rewards, smoothed, out / "learning_curve.svg", title=f"{kind} network training")
    save_model(result.net, out / MODEL_FILES[kind])
    return result


# -- evaluation -------------------------------------------------------------

@dataclass
class EvalReport:
    mode: str
    seeds: list[int]
    metrics: list[EvalMetrics]
    goals: list = field(default_factory=list)
    worlds: list = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return sum(m.success for m in self.metrics) / max(len(self.metrics), 1)

    @property
    def mean_steps(self) -> float:
        return float(np.mean([m.steps for m in self.metrics])) if self.metrics else math.nan


def load_policy_models(cfg: RunConfig, mode: str):
    goal_net = avoid_net = None
    if mode in (GOAL_ONLY, DAAC, QD):
        goal_net = load_model(cfg.eval.goal_model, expected_kind=GOAL)
    if mode in (AVOID_ONLY, DAAC, QD):
        avoid_net = load_model(cfg.eval.avoid_model, expected_kind=AVOIDANCE)
    return goal_net, avoid_net


def eval_lidar(cfg: RunConfig) -> LidarSpec:
    return cfg.lidar if cfg.eval.noise else dataclasses.replace(cfg.lidar, noise_std=0.0)


def evaluate_mode(cfg: RunConfig, mode: str, goal_net=None, avoid_net=None) -> EvalReport:
    """Roll out ``cfg.eval.episodes`` seeded episodes of one policy mode.

    Episode ``i`` uses seed ``run.seed + i``: it builds the world for seeded
    scenario kinds and perturbs the spawn pose for fixed layouts.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    policy = make_policy(goal_net, avoid_net, cfg.composer, mode)
    scenario = ScenarioSpec.parse(cfg.run.scenario)
    limits = EvalLimits(max_steps=cfg.eval.max_steps, c_reach=cfg.goal_reward.c_reach, dt=cfg.avoid_reward.dt)
    lidar = eval_lidar(cfg)
    report = EvalReport(mode, [], [])
    for i in range(cfg.eval.episodes):
        seed = cfg.run.seed + i
        world, goals = dataclasses.replace(scenario, seed=seed).build()
        rng = np.random.default_rng([seed, 1])
        if scenario.kind in FIXED_LAYOUTS:
            world = jitter_start(world, rng, cfg.eval.jitter_pos, cfg.eval.jitter_heading)
        m = evaluate_policy(world, policy, goals, limits, rng, lidar, cfg.goal_reward, cfg.avoid_reward)
        report.seeds.append(seed)
        report.metrics.append(m)
        report.goals.append(goals)
        report.worlds.append(world)
    return report


def metric_rows(report: EvalReport):
    for seed, m in zip(report.seeds, report.metrics):
        yield {"seed": seed, "success": m.success, "steps": m.steps, "path_length": m.path_length,
               "return": m.episode_return, "reason": m.reason, "goals_reached": m.goals_reached}


def _paths(report: EvalReport, limit: int = 20):
    return [([p["x"] for p in m.trajectory], [p["y"] for p in m.trajectory]) for m in report.metrics[:limit]]


def write_eval_outputs(report: EvalReport, out: Path, prefix: str = "") -> None:
    write_csv(out / f"{prefix}metrics.csv", METRIC_COLUMNS, metric_rows(report))
    tdir = out / f"{prefix}trajectories"
    tdir.mkdir(exist_ok=True)
    for seed, m in zip(report.seeds, report.metrics):
        write_csv(tdir / f"seed_{seed:06d}.csv", TRAJECTORY_COLUMNS, m.trajectory)
    if report.metrics:
        trajectory_svg(report.worlds[0], report.goals[0], _paths(report), out / f"{prefix}trajectory.svg",
                       title=f"{report.mode}: {report.success_rate:.0%} success")


def run_eval(cfg: RunConfig, out: Optional[Path] = None) -> EvalReport:
    out = _prepare(Path(out or cfg.run.out), cfg)
    goal_net, avoid_net = load_policy_models(cfg, cfg.run.mode)
    report = evaluate_mode(cfg, cfg.run.mode, goal_net, avoid_net)
    write_eval_outputs(report, out)
    return report


def run_compare(cfg: RunConfig, out: Optional[Path] = None) -> dict[str, EvalReport]:
    """DAAC and QD on the same seeds; per-episode rows plus a summary."""
    out = _prepare(Path(out or cfg.run.out), cfg)
    goal_net, avoid_net = load_policy_models(cfg, DAAC)
    reports = {mode: evaluate_mode(cfg, mode, goal_net, avoid_net) for mode in (DAAC, QD)}
    rows = []
    for mode, rep in reports.items():
        for r in metric_rows(rep):
            rows.append({"mode": mode, **r})
        write_eval_outputs(rep, out, prefix=f"{mode}_")
    write_csv(out / "compare.csv", ["mode"] + METRIC_COLUMNS, rows)
    write_csv(out / "summary.csv", ["mode", "episodes", "success_rate", "mean_steps"], (
        {"mode": m, "episodes": len(r.metrics), "success_rate": r.success_rate, "mean_steps": r.mean_steps}
        for m, r in reports.items()
    ))
    return reports
