"""Dueling DQN: network, replay memory, TD targets and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import nn_core as nn
from .geom2d_sim import ACTIONS, N_ACTIONS, Action, LidarSpec, NavEnv, Observation, WorldModel

log = logging.getLogger(__name__)

GOAL, AVOIDANCE = "goal", "avoidance"


@dataclass(frozen=True)
class Normalization:
    """Input scaling baked into a trained network.  Goal input is
    ``(d_g / dist_scale, phi_g / angle_scale)``; lidar input is
    ``ranges / range_scale``."""

    kind: str
    dist_scale: float = 10.0
    angle_scale: float = math.pi
    range_scale: float = 4.0
    beam_count: int = 108

    def encode(self, obs: Observation) -> np.ndarray:
        if self.kind == GOAL:
            return np.array([obs.goal.d_g / self.dist_scale, obs.goal.phi_g / self.angle_scale])
        if obs.scan is None or len(obs.scan) != self.beam_count:
            raise nn.ShapeError(f"avoidance net needs a {self.beam_count}-beam scan")
        return np.asarray(obs.scan, dtype=np.float64).reshape(self.beam_count, 1) / self.range_scale


def goal_layers(hidden: int = 64):
    trunk = [nn.Dense(2, hidden), nn.ReLU(), nn.Dense(hidden, hidden), nn.ReLU()]
    value = [nn.Dense(hidden, hidden), nn.ReLU(), nn.Dense(hidden, 1)]
    adv = [nn.Dense(hidden, hidden), nn.ReLU(), nn.Dense(hidden, N_ACTIONS)]
    return trunk, value, adv


def avoidance_layers(beam_count: int = 108, hidden: int = 256):
    c1 = nn.Conv1D(1, 32, kernel=5, stride=2, padding=2)
    c2 = nn.Conv1D(32, 32, kernel=3, stride=2, padding=1)
    flat = c2.out_length(c1.out_length(beam_count)) * 32
    trunk = [c1, nn.ReLU(), c2, nn.ReLU(), nn.Flatten()]
    value = [nn.Dense(flat, hidden), nn.ReLU(), nn.Dense(hidden, 1)]
    adv = [nn.Dense(flat, hidden), nn.ReLU(), nn.Dense(hidden, N_ACTIONS)]
    return trunk, value, adv


@dataclass(frozen=True)
class DuelingOutput:
    v: float
    adv: np.ndarray
    adv_centered: np.ndarray
    q: np.ndarray


def dueling_combine(v: float, adv) -> DuelingOutput:
    adv = np.asarray(adv, dtype=np.float64)
    centered = adv - adv.mean()
    return DuelingOutput(float(v), adv, centered, v + centered)


class DuelingNet:
    """Shared trunk feeding a value stream and an advantage stream."""

    def __init__(self, norm: Normalization, trunk: nn.Sequential, value: nn.Sequential,
                 advantage: nn.Sequential):
        self.norm = norm
        self.trunk = trunk
        self.value = value
        self.advantage = advantage

    @classmethod
    def build(cls, kind: str, rng: np.random.Generator, norm: Optional[Normalization] = None) -> "DuelingNet":
        norm = norm or Normalization(kind)
        if kind == GOAL:
            t, v, a = goal_layers()
        elif kind == AVOIDANCE:
            t, v, a = avoidance_layers(norm.beam_count)
        else:
            raise ValueError(f"unknown network kind {kind!r}")
        return cls(norm, nn.Sequential.build(t, rng), nn.Sequential.build(v, rng),
                   nn.Sequential.build(a, rng))

    @property
    def kind(self) -> str:
        return self.norm.kind

    @property
    def parts(self) -> tuple[nn.Sequential, nn.Sequential, nn.Sequential]:
        return self.trunk, self.value, self.advantage

    @property
    def params(self) -> list[dict[str, np.ndarray]]:
        return self.trunk.params + self.value.params + self.advantage.params

    def copy(self) -> "DuelingNet":
        return DuelingNet(self.norm, self.trunk.copy(), self.value.copy(), self.advantage.copy())

    def forward(self, x: np.ndarray):
        """Batched pass.  Returns ``(v (N,), adv (N, A), q (N, A), cache)``."""
        h, ct = self.trunk.forward(x)
        v, cv = self.value.forward(h)
        a, ca = self.advantage.forward(h)
        v = v[:, 0]
        q = v[:, None] + (a - a.mean(axis=1, keepdims=True))
        return v, a, q, (ct, cv, ca)

    def backward(self, cache, dq: np.ndarray) -> list[dict[str, np.ndarray]]:
        ct, cv, ca = cache
        gv, dh_v = self.value.backward(cv, dq.sum(axis=1, keepdims=True))
        ga, dh_a = self.advantage.backward(ca, dq - dq.mean(axis=1, keepdims=True))
        gt, _ = self.trunk.backward(ct, dh_v + dh_a)
        return gt + gv + ga

    def q_values(self, obs: Observation) -> DuelingOutput:
        v, a, _, _ = self.forward(self.norm.encode(obs)[None])
        return dueling_combine(v[0], a[0])


def q_values(net: DuelingNet, obs: Observation) -> DuelingOutput:
    return net.q_values(obs)


def sync_target(net: DuelingNet) -> DuelingNet:
    return net.copy()


def argmax_lowest(q) -> int:
    """Greedy action; ``np.argmax`` already returns the first maximum."""
    return int(np.argmax(q))


@dataclass
class TrainConfig:
    eps_initial: float = 1.0
    eps_end: float = 0.01
    lr: float = 1e-5
    buffer_capacity: int = 10000
    gamma: float = 0.99
    max_steps_per_episode: int = 250
    episodes: int = 6000
    minibatch_size: int = 64
    target_sync_interval: int = 1000
    learning_start: int = 1000
    eps_decay_fraction: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eps_end <= self.eps_initial <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_initial <= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        for name in ("buffer_capacity", "max_steps_per_episode", "minibatch_size",
                     "target_sync_interval", "learning_start"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if not 0.0 <= self.eps_decay_fraction <= 1.0:
            raise ValueError("eps_decay_fraction must lie in [0, 1]")

    @classmethod
    def goal(cls, **kw) -> "TrainConfig":
        return cls(**kw)

    @classmethod
    def avoidance(cls, **kw) -> "TrainConfig":
        base = dict(buffer_capacity=30000, max_steps_per_episode=500, episodes=3000)
        base.update(kw)
        return cls(**base)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def epsilon_schedule(episode: int, cfg: TrainConfig) -> float:
    """Linear decay over the first ``eps_decay_fraction`` of training, then flat."""
    horizon = cfg.eps_decay_fraction * cfg.episodes
    if horizon <= 0 or episode >= horizon:
        return cfg.eps_end
    return cfg.eps_initial + (cfg.eps_end - cfg.eps_initial) * (episode / horizon)


def epsilon_greedy(q, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(len(q)))
    return argmax_lowest(q)


class ReplayBuffer:
    """Fixed-capacity ring buffer of encoded transitions (oldest evicted first)."""

    def __init__(self, capacity: int, state_shape: tuple[int, ...]):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.s = np.zeros((capacity, *state_shape))
        self.s_next = np.zeros((capacity, *state_shape))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.d = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a: int, r: float, s_next, d: int) -> None:
        if not 0 <= a < N_ACTIONS or d not in (0, 1):
            raise ValueError(f"bad transition a={a} d={d}")
        i = self.cursor
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.d[i] = d
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self.cursor) % self.capacity

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=n)

    def batch(self, idx):
        return self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.d[idx]


def td_targets(r, s_next, d, target_net: DuelingNet, gamma: float) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    _, _, q_next, _ = target_net.forward(s_next)
    bootstrap = np.where(d > 0, 0.0, q_next.max(axis=1))
    return r + gamma * (1.0 - d) * bootstrap


class InsufficientBufferError(RuntimeError):
    pass


def loss_and_grads(net: DuelingNet, target_net: DuelingNet, batch, gamma: float):
    s, a, r, s_next, d = batch
    y = td_targets(r, s_next, d, target_net, gamma)
    _, _, q, cache = net.forward(s)
    n = len(a)
    err = q[np.arange(n), a] - y
    dq = np.zeros_like(q)
    dq[np.arange(n), a] = 2.0 * err / n
    return float(np.mean(err ** 2)), net.backward(cache, dq)


def train_step(net: DuelingNet, target_net: DuelingNet, buffer: ReplayBuffer, adam: nn.AdamState,
               cfg: TrainConfig, rng: np.random.Generator, idx=None) -> float:
    """One minibatch gradient step on the squared TD error; returns the loss."""
    if len(buffer) < cfg.learning_start or len(buffer) == 0:
        raise InsufficientBufferError(f"buffer holds {len(buffer)} < learning_start={cfg.learning_start}")
    if idx is None:
        idx = buffer.sample_indices(cfg.minibatch_size, rng)
    loss, grads = loss_and_grads(net, target_net, buffer.batch(idx), cfg.gamma)
    nn.adam_step(net.params, grads, adam)
    return loss


RewardFn = Callable[[Observation, Action, Observation, bool], "tuple[float, bool]"]


@dataclass
class TrainResult:
    net: DuelingNet
    episode_rewards: list[float] = field(default_factory=list)
    episode_steps: list[int] = field(default_factory=list)
    episode_outcomes: list[str] = field(default_factory=list)
    gradient_steps: int = 0


def seed_streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def train_agent(builder: Callable[[np.random.Generator], WorldModel], reward_fn: RewardFn,
                cfg: TrainConfig, kind: str, lidar: Optional[LidarSpec] = None,
                dt: float = 0.2, progress: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Run ``cfg.episodes`` episodes of dueling-DQN training.

    Every random draw comes from streams derived from ``cfg.seed``, so two
    calls with the same arguments produce bit-identical results.
    """
    init_rng, world_rng, act_rng, replay_rng, noise_rng = seed_streams(cfg.seed, 5)
    norm = Normalization(kind, beam_count=lidar.beam_count if lidar else 108,
                         range_scale=lidar.range_max if lidar else 4.0)
    net = DuelingNet.build(kind, init_rng, norm)
    result = TrainResult(net)
    if cfg.episodes == 0:
        return result
    target = sync_target(net)
    adam = nn.AdamState.for_params(net.params, lr=cfg.lr)
    env = NavEnv(builder(world_rng), lidar if kind == AVOIDANCE else None, dt, noise_rng)
    buffer = ReplayBuffer(cfg.buffer_capacity, norm.encode(env.observe()).shape)

    for episode in range(cfg.episodes):
        if episode > 0:
            env.reset(builder(world_rng))
        obs = env.observe()
        s = norm.encode(obs)
        eps = epsilon_schedule(episode, cfg)
        total, outcome, steps = 0.0, "timeout", 0
        for steps in range(1, cfg.max_steps_per_episode + 1):
            _, _, q, _ = net.forward(s[None])
            a = epsilon_greedy(q[0], eps, act_rng)
            obs_next, crashed = env.step(a)
            r, terminal = reward_fn(obs, ACTIONS[a], obs_next, crashed)
            s_next = norm.encode(obs_next)
            buffer.push(s, a, r, s_next, int(terminal))
            total += r
            if len(buffer) >= cfg.learning_start:
                train_step(net, target, buffer, adam, cfg, replay_rng)
                result.gradient_steps += 1
                if result.gradient_steps % cfg.target_sync_interval == 0:
                    target = sync_target(net)
            obs, s = obs_next, s_next
            if terminal:
                outcome = "crash" if crashed else "reached"
                break
        result.episode_rewards.append(total)
        result.episode_steps.append(steps)
        result.episode_outcomes.append(outcome)
        if progress is not None:
            progress(episode, total)
    return result
