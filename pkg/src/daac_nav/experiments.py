"""Desk-scale reproduction runs shared by the acceptance suite and the
experiment scripts.

Trained models are cached under a directory keyed by the resolved config,
so the expensive training runs happen once and every later check reuses
the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, apply_overrides, dump_config
from .dueling_dqn import AVOIDANCE, GOAL
from .runner import MODEL_FILES, run_train

log = logging.getLogger(__name__)

DEFAULT_CACHE = Path("artifacts") / "acceptance"

# default training settings with a smaller episode budget and a raised learning rate
GOAL_OVERRIDES = [("goal_train.episodes", "2000"), ("goal_train.lr", "0.0001")]
AVOID_OVERRIDES = [("avoid_train.episodes", "1500"), ("avoid_train.lr", "0.0001")]


def training_config(kind: str, seed: int = 0) -> RunConfig:
    overrides = GOAL_OVERRIDES if kind == GOAL else AVOID_OVERRIDES
    return apply_overrides(RunConfig(), [("run.seed", str(seed))] + overrides)


def _key(cfg: RunConfig, kind: str) -> str:
    return hashlib.sha256(f"{kind}\n{dump_config(cfg)}".encode()).hexdigest()[:12]


def trained_run(kind: str, cache: Path = DEFAULT_CACHE, seed: int = 0,
                cfg: Optional[RunConfig] = None) -> Path:
    """Directory holding a finished training run for ``kind``; trains on a miss."""
    cfg = cfg or training_config(kind, seed)
    out = Path(cache) / f"{kind}-{_key(cfg, kind)}"
    done = out / "DONE"
    if done.exists():
        return out

    def progress(ep, r):
        if (ep + 1) % 100 == 0:
            log.info("%s episode %d reward %.3f", kind, ep + 1, r)

    run_train(cfg, kind, out, progress)
    done.write_text("")
    return out


def model_path(run_dir: Path, kind: str) -> Path:
    return Path(run_dir) / MODEL_FILES[kind]


def read_rewards(run_dir: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(run_dir) / "rewards.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["reward"]) for r in rows]),
            np.array([float(r["smoothed"]) for r in rows]))


def plateau(smoothed, tail: float = 0.2) -> float:
    """Mean smoothed reward over the final ``tail`` fraction of episodes."""
    smoothed = np.asarray(smoothed, dtype=np.float64)
    n = max(1, int(round(len(smoothed) * tail)))
    return float(smoothed[-n:].mean())


def thirds(smoothed) -> tuple[float, float]:
    """Mean smoothed reward over the first and the final third of training."""
    smoothed = np.asarray(smoothed, dtype=np.float64)
    k = len(smoothed) // 3
    return float(smoothed[:k].mean()), float(smoothed[-k:].mean())


def improved_threefold(first: float, final: float) -> bool:
    """``final >= 3 * first`` and strictly better.  With a non-positive first
    third the multiplicative bound holds for any improvement, so the strict
    comparison is what binds."""
    return final >= 3.0 * first and final > first


def eval_config(scenario: str, goal_model: Path, avoid_model: Optional[Path], episodes: int,
                seed: int = 0, max_steps: int = 500) -> RunConfig:
    items = [("run.scenario", scenario), ("run.seed", str(seed)), ("eval.episodes", str(episodes)),
             ("eval.max_steps", str(max_steps)), ("eval.noise", "false"),
             ("eval.goal_model", str(goal_model))]
    if avoid_model is not None:
        items.append(("eval.avoid_model", str(avoid_model)))
    return apply_overrides(RunConfig(), items)

