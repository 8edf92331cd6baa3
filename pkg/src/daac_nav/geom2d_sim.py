"""2D world for a differential-drive robot: unicycle kinematics, simple
obstacle shapes, first-hit lidar raycasting and disc collision checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite pose {self}")

    def normalized(self) -> "Pose2D":
        return Pose2D(self.x, self.y, wrap_angle(self.theta))


@dataclass(frozen=True)
class Action:
    id: int
    v: float
    w: float


ACTIONS: tuple[Action, ...] = (
    Action(0, 0.4, 0.0),
    Action(1, 0.2, 0.2),
    Action(2, 0.2, -0.2),
    Action(3, 0.1, 0.3),
    Action(4, 0.1, -0.3),
)
N_ACTIONS = len(ACTIONS)


@dataclass(frozen=True)
class LidarSpec:
    beam_count: int = 108
    fov: float = 1.5 * math.pi
    range_min: float = 0.06
    range_max: float = 4.0
    # N(0, 0.01) read as variance 0.01
    noise_std: float = 0.1

    def __post_init__(self):
        if self.beam_count < 2:
            raise ValueError("beam_count must be >= 2")
        if not 0.0 < self.range_min < self.range_max:
            raise ValueError("need 0 < range_min < range_max")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def beam_offsets(self) -> np.ndarray:
        return -self.fov / 2.0 + np.arange(self.beam_count) * (self.fov / (self.beam_count - 1))


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be > 0")


@dataclass(frozen=True)
class AxisRect:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ValueError(f"rect min must be < max componentwise: {self}")

    def edges(self) -> list["Segment"]:
        (x0, y0), (x1, y1) = self.lo, self.hi
        return [
            Segment((x0, y0), (x1, y0)),
            Segment((x1, y0), (x1, y1)),
            Segment((x1, y1), (x0, y1)),
            Segment((x0, y1), (x0, y0)),
        ]


@dataclass(frozen=True)
class Segment:
    p1: tuple[float, float]
    p2: tuple[float, float]

    def __post_init__(self):
        if tuple(self.p1) == tuple(self.p2):
            raise ValueError("segment endpoints must differ")


Obstacle = Union[Circle, AxisRect, Segment]


@dataclass(frozen=True)
class WorldModel:
    obstacles: tuple = ()
    bounds: Optional[AxisRect] = None
    robot_radius: float = 0.18
    goal: tuple[float, float] = (0.0, 0.0)
    start: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.robot_radius <= 0:
            raise ValueError("robot_radius must be > 0")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def with_goal(self, goal) -> "WorldModel":
        return replace(self, goal=(float(goal[0]), float(goal[1])))

    def geometry(self) -> "_Geometry":
        geo = self.__dict__.get("_geo")
        if geo is None:
            geo = _Geometry.from_world(self)
            object.__setattr__(self, "_geo", geo)
        return geo


@dataclass(frozen=True)
class GoalObs:
    d_g: float
    phi_g: float


@dataclass(frozen=True)
class _Geometry:
    """Obstacles flattened into arrays for vectorized queries."""

    seg_a: np.ndarray  # (S, 2)
    seg_b: np.ndarray
    circ_c: np.ndarray  # (C, 2)
    circ_r: np.ndarray
    rect_lo: np.ndarray  # (R, 2), solid rectangles
    rect_hi: np.ndarray
    bounds: Optional[AxisRect]

    @classmethod
    def from_world(cls, world: WorldModel) -> "_Geometry":
        segs, circles, rects = [], [], []
        for ob in world.obstacles:
            if isinstance(ob, Segment):
                segs.append(ob)
            elif isinstance(ob, Circle):
                circles.append(ob)
            elif isinstance(ob, AxisRect):
                rects.append(ob)
                segs.extend(ob.edges())
            else:
                raise TypeError(f"unknown obstacle {ob!r}")
        if world.bounds is not None:
            segs.extend(world.bounds.edges())
        return cls(
            seg_a=np.array([s.p1 for s in segs], dtype=float).reshape(-1, 2),
            seg_b=np.array([s.p2 for s in segs], dtype=float).reshape(-1, 2),
            circ_c=np.array([c.center for c in circles], dtype=float).reshape(-1, 2),
            circ_r=np.array([c.radius for c in circles], dtype=float),
            rect_lo=np.array([r.lo for r in rects], dtype=float).reshape(-1, 2),
            rect_hi=np.array([r.hi for r in rects], dtype=float).reshape(-1, 2),
            bounds=world.bounds,
        )


def step_kinematics(pose: Pose2D, action: Action, dt: float) -> Pose2D:
    """Exact arc integration of a constant (v, w) command over ``dt``."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    v, w, th = action.v, action.w, pose.theta
    if abs(w) < 1e-9:
        return Pose2D(pose.x + v * math.cos(th) * dt, pose.y + v * math.sin(th) * dt, wrap_angle(th))
    r = v / w
    th2 = th + w * dt
    return Pose2D(
        pose.x + r * (math.sin(th2) - math.sin(th)),
        pose.y + r * (math.cos(th) - math.cos(th2)),
        wrap_angle(th2),
    )


def ray_distances(geo: _Geometry, origin, angles: np.ndarray, max_range: float) -> np.ndarray:
    """Nearest hit distance along each ray, ``max_range`` when nothing is hit."""
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = np.cos(angles), np.sin(angles)
    best = np.full(angles.shape, float(max_range))

    if len(geo.seg_a):
        ax = geo.seg_a[:, 0] - ox
        ay = geo.seg_a[:, 1] - oy
        ex = geo.seg_b[:, 0] - geo.seg_a[:, 0]
        ey = geo.seg_b[:, 1] - geo.seg_a[:, 1]
        # origin + t*d = a + u*e  ->  Cramer's rule per (ray, segment)
        den = dx[:, None] * (-ey)[None, :] - dy[:, None] * (-ex)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax * (-ey) - ay * (-ex))[None, :] / den
            u = (dx[:, None] * ay[None, :] - dy[:, None] * ax[None, :]) / den
        ok = (np.abs(den) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        t = np.where(ok, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    if len(geo.circ_r):
        fx = ox - geo.circ_c[:, 0]
        fy = oy - geo.circ_c[:, 1]
        b = dx[:, None] * fx[None, :] + dy[:, None] * fy[None, :]
        c = fx * fx + fy * fy - geo.circ_r ** 2
        disc = b * b - c[None, :]
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = -b - sq
        t2 = -b + sq
        # origin inside a circle: the exit point is the hit
        t = np.where(t1 >= 0.0, t1, t2)
        t = np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)
        best = np.minimum(best, t.min(axis=1))
    return best


def cast_lidar(world: WorldModel, pose: Pose2D, spec: LidarSpec,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Range reading per beam, noise added then clamped to the sensor limits.

    ``rng`` may be None only when ``spec.noise_std == 0``."""
    angles = pose.theta + spec.beam_offsets()
    ranges = ray_distances(world.geometry(), (pose.x, pose.y), angles, spec.range_max)
    if spec.noise_std > 0:
        ranges = ranges + rng.normal(0.0, spec.noise_std, size=ranges.shape)
    return np.clip(ranges, spec.range_min, spec.range_max)


def point_segment_distance(p, a, b) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    e = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    closest = a + t[:, None] * e
    return np.hypot(p[0] - closest[:, 0], p[1] - closest[:, 1])


def clearance(world: WorldModel, x: float, y: float) -> float:
    """Distance from (x, y) to the nearest obstacle surface or bounds wall
    (zero inside a solid obstacle)."""
    geo = world.geometry()
    d = math.inf
    if len(geo.seg_a):
        d = min(d, float(point_segment_distance((x, y), geo.seg_a, geo.seg_b).min()))
    if len(geo.circ_r):
        dc = np.hypot(geo.circ_c[:, 0] - x, geo.circ_c[:, 1] - y) - geo.circ_r
        d = min(d, max(float(dc.min()), 0.0))
    if len(geo.rect_lo):
        inside = ((geo.rect_lo[:, 0] <= x) & (x <= geo.rect_hi[:, 0])
                  & (geo.rect_lo[:, 1] <= y) & (y <= geo.rect_hi[:, 1]))
        if inside.any():
            d = 0.0
    if geo.bounds is not None:
        (x0, y0), (x1, y1) = geo.bounds.lo, geo.bounds.hi
        if not (x0 < x < x1 and y0 < y < y1):
            d = 0.0
    return d


def check_collision(world: WorldModel, pose: Pose2D) -> bool:
    return clearance(world, pose.x, pose.y) <= world.robot_radius


def goal_observation(pose: Pose2D, goal) -> GoalObs:
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return GoalObs(0.0, 0.0)
    return GoalObs(d, wrap_angle(math.atan2(dy, dx) - pose.theta))


def segment_blocked(world: WorldModel, p, q) -> bool:
    """True if the straight segment p->q crosses any obstacle (bounds ignored)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    length = float(np.hypot(*(q - p)))
    angle = math.atan2(q[1] - p[1], q[0] - p[0])
    geo = world.geometry()
    no_bounds = replace(geo, seg_a=geo.seg_a, seg_b=geo.seg_b)
    if geo.bounds is not None:
        n = 4
        no_bounds = replace(geo, seg_a=geo.seg_a[:-n], seg_b=geo.seg_b[:-n], bounds=None)
    d = ray_distances(no_bounds, p, np.array([angle]), length + 1.0)[0]
    return d < length


@dataclass(frozen=True)
class Observation:
    """Split robot state: goal part plus (optionally) the lidar scan."""

    goal: GoalObs
    scan: Optional[np.ndarray] = None


class NavEnv:
    """Minimal episodic wrapper: reset to a world's start pose, step by
    action index at a fixed control period."""

    def __init__(self, world: WorldModel, lidar: Optional[LidarSpec] = None, dt: float = 0.2,
                 rng: Optional[np.random.Generator] = None):
        self.lidar = lidar
        self.dt = dt
        self.rng = rng
        self.reset(world)

    def reset(self, world: Optional[WorldModel] = None, pose: Optional[Pose2D] = None) -> Observation:
        if world is not None:
            self.world = world
        self.pose = (pose or self.world.start).normalized()
        self.t = 0
        return self.observe()

    def observe(self) -> Observation:
        scan = None
        if self.lidar is not None:
            scan = cast_lidar(self.world, self.pose, self.lidar, self.rng)
        return Observation(goal_observation(self.pose, self.world.goal), scan)

    def step(self, action_id: int) -> tuple[Observation, bool]:
        self.pose = step_kinematics(self.pose, ACTIONS[action_id], self.dt)
        self.t += 1
        return self.observe(), check_collision(self.world, self.pose)
