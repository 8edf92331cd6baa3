"""Fusing the goal and avoidance Q-functions into one navigation policy.

Two fusion rules are provided: the fixed-weight sum of sub-agent Q-values,
and the danger-aware rule where the avoidance agent's weight decays
exponentially with its own state-value estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dueling_dqn import AVOIDANCE, GOAL, DuelingNet, argmax_lowest
from .geom2d_sim import Observation

DAAC, QD, GOAL_ONLY, AVOID_ONLY = "daac", "qd", "goal", "avoid"
MODES = (GOAL_ONLY, AVOID_ONLY, DAAC, QD)


class NormalizationMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ComposerConfig:
    k_d: float = 4.0
    c_t: float = 1.0
    d_goal_focus: float = 1.0
    d_clamp: float = 2.0
    qd_weights: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self):
        if self.k_d <= 0 or self.d_clamp <= 0 or self.d_goal_focus < 0:
            raise ValueError(f"invalid composer config {self}")
        if not all(math.isfinite(w) for w in self.qd_weights):
            raise ValueError("qd_weights must be finite")


@dataclass(frozen=True)
class NavDecision:
    action: int
    lam: float
    v_o: float
    q_goal: np.ndarray
    q_avoid: np.ndarray
    q_fused: np.ndarray


def clamp_scan(scan, d_clamp: float) -> np.ndarray:
    if d_clamp <= 0:
        raise ValueError("d_clamp must be > 0")
    return np.minimum(np.asarray(scan, dtype=np.float64), d_clamp)


def lambda_weight(v_o: float, d_g: float, cfg: ComposerConfig) -> float:
    if d_g <= cfg.d_goal_focus:
        return 0.0
    # cap keeps exp finite for absurdly negative value estimates
    return math.exp(min(-cfg.k_d * (v_o - cfg.c_t), 700.0))


def compose_daac(q_goal, q_avoid, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return np.asarray(q_goal, dtype=np.float64) + lam * np.asarray(q_avoid, dtype=np.float64)


def compose_qd(q_list: Sequence, weights: Sequence[float]) -> np.ndarray:
    if len(q_list) != len(weights) or not q_list:
        raise ValueError(f"{len(q_list)} Q-vectors but {len(weights)} weights")
    out = weights[0] * np.asarray(q_list[0], dtype=np.float64)
    for w, q in zip(weights[1:], q_list[1:]):
        out = out + w * np.asarray(q, dtype=np.float64)
    return out


def select_action(q) -> int:
    return argmax_lowest(q)


def check_pair(goal_net: DuelingNet, avoid_net: DuelingNet) -> None:
    if goal_net.kind != GOAL or avoid_net.kind != AVOIDANCE:
        raise NormalizationMismatch(
            f"expected (goal, avoidance) networks, got ({goal_net.kind}, {avoid_net.kind})")


def navigate_step(goal_net: DuelingNet, avoid_net: DuelingNet, obs: Observation,
                  cfg: ComposerConfig = ComposerConfig(), mode: str = DAAC) -> NavDecision:
    """One decision of the fused navigation agent.

    The scan is clamped before the avoidance net sees it; the value head's
    output on that clamped scan drives the adaptive weight.
    """
    check_pair(goal_net, avoid_net)
    if obs.scan is None:
        raise ValueError("navigation needs a lidar scan")
    clamped = replace(obs, scan=clamp_scan(obs.scan, cfg.d_clamp))
    avoid = avoid_net.q_values(clamped)
    goal = goal_net.q_values(obs)
    if mode == DAAC:
        lam = lambda_weight(avoid.v, obs.goal.d_g, cfg)
        fused = compose_daac(goal.q, avoid.q, lam)
    elif mode == QD:
        lam = float(cfg.qd_weights[1])
        fused = compose_qd([goal.q, avoid.q], cfg.qd_weights)
    elif mode == GOAL_ONLY:
        lam, fused = 0.0, goal.q.copy()
    elif mode == AVOID_ONLY:
        lam, fused = math.inf, avoid.q.copy()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return NavDecision(select_action(fused), lam, avoid.v, goal.q, avoid.q, fused)


def make_policy(goal_net: Optional[DuelingNet], avoid_net: Optional[DuelingNet],
                cfg: ComposerConfig = ComposerConfig(), mode: str = DAAC):
    """Wrap the networks as ``obs -> NavDecision`` for the evaluation harness.

    Single-network modes only need their own network."""
    if mode == GOAL_ONLY and avoid_net is None:
        def goal_policy(obs: Observation) -> NavDecision:
            q = goal_net.q_values(obs).q
            nan5 = np.full_like(q, np.nan)
            return NavDecision(select_action(q), 0.0, math.nan, q, nan5, q)
        return goal_policy
    if mode == AVOID_ONLY and goal_net is None:
        def avoid_policy(obs: Observation) -> NavDecision:
            out = avoid_net.q_values(replace(obs, scan=clamp_scan(obs.scan, cfg.d_clamp)))
            nan5 = np.full_like(out.q, np.nan)
            return NavDecision(select_action(out.q), math.inf, out.v, nan5, out.q, out.q)
        return avoid_policy
    return lambda obs: navigate_step(goal_net, avoid_net, obs, cfg, mode)
