"""SVG figures: learning curves and trajectory overlays."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle as CirclePatch, Rectangle  # noqa: E402

from .geom2d_sim import AxisRect, Circle, Segment, WorldModel  # noqa: E402

# fixed salt + no date keeps SVG bytes reproducible
plt.rcParams["svg.hashsalt"] = "daac-nav"
_META = {"Date": None, "Creator": None}


def moving_average(values, window: int = 10) -> list[float]:
    """Mean of the last ``min(k, window)`` values at each position ``k``."""
    out, acc = [], 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def learning_curve_svg(rewards, smoothed, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(1, len(rewards) + 1)
    ax.plot(x, rewards, color="0.75", lw=0.6, label="episode reward")
    ax.plot(x, smoothed, color="C0", lw=1.4, label="moving average (10)")
    ax.set_xlabel("episode")
    ax.set_ylabel("total reward")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def draw_world(ax, world: WorldModel) -> None:
    if world.bounds is not None:
        (x0, y0), (x1, y1) = world.bounds.lo, world.bounds.hi
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, ec="k", lw=1.5))
    for ob in world.obstacles:
        if isinstance(ob, Segment):
            ax.plot([ob.p1[0], ob.p2[0]], [ob.p1[1], ob.p2[1]], color="k", lw=2.5)
        elif isinstance(ob, Circle):
            ax.add_patch(CirclePatch(ob.center, ob.radius, color="0.4"))
        elif isinstance(ob, AxisRect):
            ax.add_patch(Rectangle(ob.lo, ob.hi[0] - ob.lo[0], ob.hi[1] - ob.lo[1], color="0.4"))


def trajectory_svg(world: WorldModel, goals, paths, path, title: str = "", labels=None) -> None:
    """``paths`` is a list of ``(xs, ys)`` pairs drawn over the world."""
    fig, ax = plt.subplots(figsize=(6, 6))
    draw_world(ax, world)
    for i, (xs, ys) in enumerate(paths):
        label = labels[i] if labels else None
        ax.plot(xs, ys, lw=1.0, alpha=0.8, label=label)
        ax.plot(xs[0], ys[0], "o", color="C2", ms=4)
    for j, g in enumerate(goals):
        ax.plot(g[0], g[1], "*", color="C3", ms=12)
        ax.annotate(f"goal {j + 1}", g, textcoords="offset points", xytext=(5, 5))
    ax.set_aspect("equal")
    ax.autoscale_view()
    if title:
        ax.set_title(title)
    if labels:
        ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
