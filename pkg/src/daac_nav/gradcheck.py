"""Central finite-difference check of the dueling network gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dueling_dqn import DuelingNet


@dataclass
class GradCheckReport:
    n_checked: int
    max_rel_error: float
    max_abs_error: float

    def passed(self, tol: float = 1e-5) -> bool:
        return self.max_rel_error < tol


def relative_error(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_network_gradients(net: DuelingNet, rng: np.random.Generator, n_params: int = 200,
                            batch: int = 4, h: float = 1e-5) -> GradCheckReport:
    """Compare backprop against central differences of a random linear
    functional of the Q outputs, on ``n_params`` uniformly drawn scalars."""
    shape = (2,) if net.kind == "goal" else (net.norm.beam_count, 1)
    x = rng.uniform(0.05, 1.0, size=(batch, *shape))
    _, _, q, _ = net.forward(x)
    weights = rng.normal(size=q.shape)

    def loss() -> float:
        return float(np.sum(net.forward(x)[2] * weights))

    _, _, _, cache = net.forward(x)
    grads = net.backward(cache, weights)
    slots = [(i, k) for i, p in enumerate(net.params) for k in p]
    sizes = np.array([net.params[i][k].size for i, k in slots])
    picks = rng.choice(sizes.sum(), size=n_params, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst_rel = worst_abs = 0.0
    for flat in picks:
        j = int(np.searchsorted(offsets, flat, side="right") - 1)
        i, k = slots[j]
        arr = net.params[i][k].reshape(-1)
        idx = int(flat - offsets[j])
        orig = arr[idx]
        arr[idx] = orig + h
        up = loss()
        arr[idx] = orig - h
        down = loss()
        arr[idx] = orig
        numeric = (up - down) / (2 * h)
        analytic = float(grads[i][k].reshape(-1)[idx])
        worst_rel = max(worst_rel, relative_error(analytic, numeric))
        worst_abs = max(worst_abs, abs(analytic - numeric))
    return GradCheckReport(n_params, worst_rel, worst_abs)
