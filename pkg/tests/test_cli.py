import csv
import math

import numpy as np
import pytest

from daac_nav import cli
from daac_nav.composer import DAAC
from daac_nav.config import apply_overrides, RunConfig
from daac_nav.dueling_dqn import AVOIDANCE, GOAL, DuelingNet
from daac_nav.model_io import save_model
from daac_nav.plots import moving_average
from daac_nav.runner import REWARD_COLUMNS, TRAJECTORY_COLUMNS, evaluate_mode

TINY = ["--override", "goal_train.max_steps_per_episode=20", "--override", "goal_train.learning_start=10",
        "--override", "goal_train.minibatch_size=4",
        "--override", "avoid_train.max_steps_per_episode=15", "--override", "avoid_train.learning_start=10",
        "--override", "avoid_train.minibatch_size=4"]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    root = tmp_path_factory.mktemp("models")
    assert cli.main(["train-goal", "--episodes", "3", "--seed", "1", "--out", str(root / "g")] + TINY) == 0
    assert cli.main(["train-avoid", "--episodes", "2", "--seed", "1", "--out", str(root / "a")] + TINY) == 0
    return root


class TestTrain:
    def test_outputs(self, models):
        g = models / "g"
        for name in ("config.txt", "rewards.csv", "learning_curve.svg", "goal.model"):
            assert (g / name).exists()
        assert (models / "a" / "avoidance.model").exists()
        rows = read_rows(g / "rewards.csv")
        assert list(rows[0]) == REWARD_COLUMNS and len(rows) == 3
        rewards = [float(r["reward"]) for r in rows]
        for k, r in enumerate(rows, 1):
            window = rewards[max(0, k - 10):k]
            assert float(r["smoothed"]) == pytest.approx(sum(window) / len(window), abs=1e-12)

    def test_single_episode_csv(self, tmp_path):
        assert cli.main(["train-goal", "--episodes", "1", "--out", str(tmp_path)] + TINY) == 0
        assert len(read_rows(tmp_path / "rewards.csv")) == 1

    def test_same_seed_identical_bytes(self, models, tmp_path):
        assert cli.main(["train-goal", "--episodes", "3", "--seed", "1", "--out", str(tmp_path)] + TINY) == 0
        for name in ("rewards.csv", "goal.model", "learning_curve.svg"):
            assert (tmp_path / name).read_bytes() == (models / "g" / name).read_bytes()

    def test_config_records_overrides(self, models):
        text = (models / "g" / "config.txt").read_text()
        assert "goal_train.episodes = 3" in text and "run.seed = 1" in text


def eval_args(models, out, *extra):
    return ["eval", "--goal-model", str(models / "g" / "goal.model"),
            "--avoid-model", str(models / "a" / "avoidance.model"), "--out", str(out),
            "--override", "eval.max_steps=15", "--episodes", "2", *extra]


class TestEval:
    def test_eval_outputs_and_determinism(self, models, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(eval_args(models, a, "--scenario", "open_corner")) == 0
        assert cli.main(eval_args(models, b, "--scenario", "open_corner")) == 0
        traj = sorted((a / "trajectories").iterdir())
        assert len(traj) == 2
        assert list(read_rows(traj[0])[0]) == TRAJECTORY_COLUMNS
        for f in traj:
            assert f.read_bytes() == (b / "trajectories" / f.name).read_bytes()
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
        assert (a / "trajectory.svg").exists()

    def test_compare(self, models, tmp_path):
        args = eval_args(models, tmp_path, "--scenario", "open_corner")
        args[0] = "compare"
        assert cli.main(args) == 0
        rows = read_rows(tmp_path / "compare.csv")
        assert len(rows) == 4
        assert [r["seed"] for r in rows if r["mode"] == "daac"] == [r["seed"] for r in rows if r["mode"] == "qd"]
        assert len(read_rows(tmp_path / "summary.csv")) == 2

    def test_threshold_exit(self, models, tmp_path):
        args = eval_args(models, tmp_path, "--override", "eval.min_success_rate=1.0")
        assert cli.main(args) == 3

    def test_missing_model(self, tmp_path):
        assert cli.main(["eval", "--goal-model", str(tmp_path / "none"), "--avoid-model",
                         str(tmp_path / "none"), "--out", str(tmp_path)]) == 2

    def test_wrong_kind(self, models, tmp_path):
        args = ["eval", "--goal-model", str(models / "a" / "avoidance.model"),
                "--avoid-model", str(models / "a" / "avoidance.model"), "--out", str(tmp_path)]
        assert cli.main(args) == 2


class TestUsage:
    def test_unknown_key(self, tmp_path):
        assert cli.main(["train-goal", "--override", "goal_train.nope=1", "--out", str(tmp_path)]) == 1

    def test_bad_flag(self):
        assert cli.main(["train-goal", "--mode", "fancy"]) == 1

    def test_no_command(self):
        assert cli.main([]) == 1


def test_lambda_zero_when_goal_close(tmp_path):
    # goal within D_g of the spawn: every logged lambda is 0
    (tmp_path / "s.txt").write_text("robot 0 0 0\ngoal 0.9 0\n")
    cfg = apply_overrides(RunConfig(), [("run.scenario", str(tmp_path / "s.txt")), ("eval.episodes", "3"),
                                        ("eval.max_steps", "20")])
    goal = DuelingNet.build(GOAL, np.random.default_rng(0))
    avoid = DuelingNet.build(AVOIDANCE, np.random.default_rng(1))
    rep = evaluate_mode(cfg, DAAC, goal, avoid)
    checked = 0
    for m in rep.metrics:
        for prev, row in zip(m.trajectory, m.trajectory[1:]):
            # lambda is decided from the pose before the step
            if math.hypot(prev["x"] - 0.9, prev["y"]) <= 1.0:
                assert row["lambda"] == 0.0
                checked += 1
    assert checked >= 3


def test_moving_average_window():
    vals = list(range(25))
    ma = moving_average(vals, 10)
    assert ma[0] == 0 and ma[9] == 4.5 and ma[24] == 19.5
