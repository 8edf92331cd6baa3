"""Reward functions for the two sub-skills and the discounted return."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .geom2d_sim import Action


@dataclass(frozen=True)
class GoalRewardConfig:
    r_reach: float = 10.0
    c_reach: float = 0.3
    c_p: float = 2.0
    c_time: float = 0.01

    def __post_init__(self):
        if self.r_reach <= 0 or self.c_reach <= 0 or self.c_p <= 0 or self.c_time < 0:
            raise ValueError(f"invalid goal reward config {self}")


@dataclass(frozen=True)
class AvoidRewardConfig:
    r_crash: float = -10.0
    c_time: float = 0.01
    dt: float = 0.2
    # listed with the training constants but consumed by no reward term
    c_danger: float = 0.5

    def __post_init__(self):
        if self.r_crash >= 0 or self.dt <= 0:
            raise ValueError(f"invalid avoidance reward config {self}")


def goal_reward(d_t: float, d_next: float, cfg: GoalRewardConfig = GoalRewardConfig()) -> tuple[float, bool]:
    """Progress reward; the reach bonus is judged on the post-step distance."""
    if d_next <= cfg.c_reach:
        return cfg.r_reach, True
    return cfg.c_p * (d_t - d_next) - cfg.c_time, False


def avoidance_reward(action: Action, crashed: bool,
                     cfg: AvoidRewardConfig = AvoidRewardConfig()) -> tuple[float, bool]:
    if crashed:
        return cfg.r_crash, True
    # cos of the angular velocity value itself
    return action.v * math.cos(action.w) * cfg.dt - cfg.c_time, False


def episode_return(rewards: Sequence[float], gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    total, discount = 0.0, 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total
