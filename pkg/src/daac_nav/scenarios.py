"""Training and evaluation worlds plus the closed-loop evaluation harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geom2d_sim import (
    ACTIONS,
    AxisRect,
    Circle,
    LidarSpec,
    NavEnv,
    Observation,
    Pose2D,
    Segment,
    WorldModel,
    check_collision,
    clearance,
    goal_observation,
    wrap_angle,
)
from .rewards import AvoidRewardConfig, GoalRewardConfig, goal_reward

KINDS = ("goal_training", "avoidance_training", "open_corner", "multi_goal")


# -- builders ---------------------------------------------------------------

def build_goal_training_world(rng: np.random.Generator, half_width: float = 5.0,
                              min_goal_dist: float = 1.0) -> WorldModel:
    while True:
        g = rng.uniform(-half_width, half_width, size=2)
        if math.hypot(g[0], g[1]) >= min_goal_dist:
            return WorldModel(goal=(float(g[0]), float(g[1])))


def build_avoidance_training_world(rng: np.random.Generator, n_obstacles: int = 12,
                                   half_width: float = 3.5, r_min: float = 0.1, r_max: float = 0.3,
                                   spawn_clear: float = 0.8, gap: float = 0.5) -> WorldModel:
    """Walled square room with small circular obstacles kept clear of the
    origin spawn and of each other (surface-to-surface distances)."""
    circles: list[Circle] = []
    while len(circles) < n_obstacles:
        r = float(rng.uniform(r_min, r_max))
        c = rng.uniform(-half_width + r, half_width - r, size=2)
        if math.hypot(c[0], c[1]) - r < spawn_clear:
            continue
        if any(math.hypot(c[0] - o.center[0], c[1] - o.center[1]) - r - o.radius < gap for o in circles):
            continue
        circles.append(Circle((float(c[0]), float(c[1])), r))
    heading = float(rng.uniform(-math.pi, math.pi))
    world = WorldModel(obstacles=tuple(circles), bounds=AxisRect((-half_width, -half_width), (half_width, half_width)),
                       start=Pose2D(0.0, 0.0, heading))
    # a reachable-looking goal so the room can also host navigation runs
    while True:
        g = rng.uniform(-half_width + 0.5, half_width - 0.5, size=2)
        if math.hypot(g[0], g[1]) >= 2.0 and clearance(world, float(g[0]), float(g[1])) >= 0.5:
            return world.with_goal(g)


def build_open_corner_world(wall_length: float = 3.0, inset: float = 1.0,
                            goal_beyond: float = 4.0) -> WorldModel:
    """Two walls meeting at the origin: the top wall runs west along y=0 and
    the side wall runs south along x=0.  The robot starts ``inset`` metres
    from both walls facing the inner corner; the goal sits north of the top
    wall, straight ahead of the blocked direct path."""
    top = Segment((0.0, 0.0), (-wall_length, 0.0))
    side = Segment((0.0, 0.0), (0.0, -wall_length))
    start = Pose2D(-inset, -inset, math.pi / 4)
    return WorldModel(obstacles=(top, side), start=start, goal=(-inset, goal_beyond))


GOAL_SPACING = 4.5


def build_multi_goal_course() -> tuple[WorldModel, list[tuple[float, float]]]:
    """7 x 6 m room with its north-east corner cut off, four obstacles and
    three goals, each hidden behind an obstacle from the previous stop."""
    bounds = AxisRect((0.0, 0.0), (7.0, 6.0))
    obstacles = (
        Segment((5.6, 6.0), (7.0, 4.6)),          # cut corner
        AxisRect((0.5, 2.4), (1.6, 2.8)),          # between start and goal 1
        Circle((3.25, 4.5), 0.4),                  # between goal 1 and goal 2
        AxisRect((5.0, 2.4), (6.1, 2.8)),          # between goal 2 and goal 3
        Circle((3.4, 1.6), 0.3),
    )
    goals = [(1.0, 4.5), (1.0 + GOAL_SPACING, 4.5), (5.5, 1.0)]
    world = WorldModel(obstacles=obstacles, bounds=bounds, start=Pose2D(1.0, 1.0, math.pi / 2), goal=goals[0])
    return world, goals


# -- scenario files ---------------------------------------------------------

class ScenarioFormatError(ValueError):
    pass


def parse_scenario(text: str, robot_radius: float = 0.18) -> tuple[WorldModel, list[tuple[float, float]]]:
    """Parse the line-oriented scenario format.

    Recognised lines (SI units, ``#`` starts a comment)::

        wall x1 y1 x2 y2
        circle cx cy r
        rect x1 y1 x2 y2
        bounds x1 y1 x2 y2
        robot x y theta
        goal x y          # repeatable; visited in file order
    """
    arity = {"wall": 4, "circle": 3, "rect": 4, "bounds": 4, "robot": 3, "goal": 2}
    obstacles: list = []
    goals: list[tuple[float, float]] = []
    bounds = None
    start = Pose2D(0.0, 0.0, 0.0)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *rest = line.split()
        if word not in arity:
            raise ScenarioFormatError(f"line {lineno}: unknown directive {word!r}")
        if len(rest) != arity[word]:
            raise ScenarioFormatError(f"line {lineno}: {word} takes {arity[word]} numbers, got {len(rest)}")
        try:
            v = [float(t) for t in rest]
        except ValueError as exc:
            raise ScenarioFormatError(f"line {lineno}: {exc}") from None
        try:
            if word == "wall":
                obstacles.append(Segment((v[0], v[1]), (v[2], v[3])))
            elif word == "circle":
                obstacles.append(Circle((v[0], v[1]), v[2]))
            elif word == "rect":
                obstacles.append(AxisRect((min(v[0], v[2]), min(v[1], v[3])), (max(v[0], v[2]), max(v[1], v[3]))))
            elif word == "bounds":
                bounds = AxisRect((min(v[0], v[2]), min(v[1], v[3])), (max(v[0], v[2]), max(v[1], v[3])))
            elif word == "robot":
                start = Pose2D(v[0], v[1], v[2]).normalized()
            else:
                goals.append((v[0], v[1]))
        except ValueError as exc:
            raise ScenarioFormatError(f"line {lineno}: {exc}") from None
    if not goals:
        raise ScenarioFormatError("scenario defines no goal")
    world = WorldModel(obstacles=tuple(obstacles), bounds=bounds, robot_radius=robot_radius,
                       goal=goals[0], start=start)
    return world, goals


def format_scenario(world: WorldModel, goals: Sequence[tuple[float, float]]) -> str:
    lines = []
    if world.bounds is not None:
        lines.append("bounds {} {} {} {}".format(*world.bounds.lo, *world.bounds.hi))
    for ob in world.obstacles:
        if isinstance(ob, Segment):
            lines.append("wall {} {} {} {}".format(*ob.p1, *ob.p2))
        elif isinstance(ob, Circle):
            lines.append("circle {} {} {}".format(*ob.center, ob.radius))
        else:
            lines.append("rect {} {} {} {}".format(*ob.lo, *ob.hi))
    lines.append(f"robot {world.start.x} {world.start.y} {world.start.theta}")
    lines.extend(f"goal {g[0]} {g[1]}" for g in goals)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    seed: int = 0
    path: Optional[str] = None

    def build(self) -> tuple[WorldModel, list[tuple[float, float]]]:
        rng = np.random.default_rng(self.seed)
        if self.kind == "goal_training":
            w = build_goal_training_world(rng)
            return w, [w.goal]
        if self.kind == "avoidance_training":
            w = build_avoidance_training_world(rng)
            return w, [w.goal]
        if self.kind == "open_corner":
            w = build_open_corner_world()
            return w, [w.goal]
        if self.kind == "multi_goal":
            return build_multi_goal_course()
        if self.kind == "file":
            return parse_scenario(Path(self.path).read_text())
        raise ValueError(f"unknown scenario kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "ScenarioSpec":
        if text in KINDS:
            return cls(text, seed)
        return cls("file", seed, text)


# -- evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class EvalLimits:
    max_steps: int = 500
    c_reach: float = 0.3
    dt: float = 0.2

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be > 0")


@dataclass
class EvalMetrics:
    success: bool
    reason: str
    steps: int
    path_length: float
    collisions: int
    goals_reached: int
    episode_return: float
    trajectory: list[dict] = field(default_factory=list)
    decisions: list = field(default_factory=list)


def jitter_start(world: WorldModel, rng: np.random.Generator, pos: float = 0.15,
                 heading: float = 0.3) -> WorldModel:
    """Perturb the spawn pose uniformly; used to make seeded trials differ
    in otherwise deterministic layouts."""
    s = world.start
    dx, dy = rng.uniform(-pos, pos, size=2)
    dth = rng.uniform(-heading, heading)
    return replace(world, start=Pose2D(s.x + float(dx), s.y + float(dy), wrap_angle(s.theta + float(dth))))


def evaluate_policy(world: WorldModel, policy: Callable, goals: Sequence[tuple[float, float]],
                    limits: EvalLimits = EvalLimits(), rng: Optional[np.random.Generator] = None,
                    lidar: Optional[LidarSpec] = LidarSpec(noise_std=0.0),
                    goal_cfg: GoalRewardConfig = GoalRewardConfig(),
                    avoid_cfg: AvoidRewardConfig = AvoidRewardConfig()) -> EvalMetrics:
    """Closed-loop rollout visiting ``goals`` in order.

    ``policy`` maps an Observation to either an action index or an object
    with ``action``, ``lam`` and ``v_o`` attributes (logged per step).  The
    logged reward is the goal-progress reward toward the current goal, or
    the crash penalty on collision.
    """
    if not goals:
        raise ValueError("need at least one goal")
    if lidar is not None and lidar.noise_std > 0 and rng is None:
        raise ValueError("noisy lidar needs an rng")
    env = NavEnv(world.with_goal(goals[0]), lidar, limits.dt, rng)
    traj: list[dict] = []
    decisions: list = []
    path = 0.0
    total = 0.0
    gi = 0
    reason = "timeout"
    steps = 0
    collisions = 0

    def row(t, pose, action, lam, v_o, r):
        return {"t": t, "x": pose.x, "y": pose.y, "theta": pose.theta, "action": action,
                "lambda": lam, "v_o": v_o, "reward": r}

    traj.append(row(0.0, env.pose, -1, math.nan, math.nan, 0.0))
    if check_collision(env.world, env.pose):
        return EvalMetrics(False, "collision", 0, 0.0, 1, 0, 0.0, traj, decisions)

    obs = env.observe()
    while steps < limits.max_steps:
        decision = policy(obs)
        if isinstance(decision, (int, np.integer)):
            a, lam, v_o = int(decision), math.nan, math.nan
        else:
            a, lam, v_o = decision.action, decision.lam, decision.v_o
            decisions.append(decision)
        before = env.pose
        d_before = obs.goal.d_g
        obs, crashed = env.step(a)
        steps += 1
        path += math.hypot(env.pose.x - before.x, env.pose.y - before.y)
        if crashed:
            r = avoid_cfg.r_crash
        else:
            r, _ = goal_reward(d_before, obs.goal.d_g, goal_cfg)
        total += r
        traj.append(row(steps * limits.dt, env.pose, a, lam, v_o, r))
        if crashed:
            collisions += 1
            reason = "collision"
            break
        if obs.goal.d_g <= limits.c_reach:
            gi += 1
            if gi == len(goals):
                reason = "success"
                break
            env.world = env.world.with_goal(goals[gi])
            obs = Observation(goal_observation(env.pose, goals[gi]), obs.scan)
    return EvalMetrics(reason == "success", reason, steps, path, collisions, gi, total, traj, decisions)
