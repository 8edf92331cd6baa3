import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from daac_nav import nn_core as nn
from daac_nav.dueling_dqn import (
    AVOIDANCE,
    GOAL,
    DuelingNet,
    InsufficientBufferError,
    Normalization,
    ReplayBuffer,
    TrainConfig,
    dueling_combine,
    epsilon_greedy,
    epsilon_schedule,
    q_values,
    seed_streams,
    sync_target,
    td_targets,
    train_agent,
    train_step,
)
from daac_nav.geom2d_sim import GoalObs, LidarSpec, Observation
from daac_nav.rewards import goal_reward
from daac_nav.scenarios import build_goal_training_world
from daac_nav.tabular import TabularMDP, gridworld, tabular_q_learning, value_iteration

adv_vectors = arrays(np.float64, 5, elements=st.floats(-1e3, 1e3, allow_nan=False))


def zero_net(kind):
    net = DuelingNet.build(kind, np.random.default_rng(0))
    for part in net.parts:
        for p in part.params:
            for v in p.values():
                v[:] = 0.0
    return net


def goal_obs(d=2.0, phi=0.3):
    return Observation(GoalObs(d, phi))


class TestDuelingCombine:
    def test_example(self):
        out = dueling_combine(2.0, [1, 2, 3, 4, 5])
        assert out.adv_centered.tolist() == [-2, -1, 0, 1, 2]
        assert out.q.tolist() == [0, 1, 2, 3, 4]

    def test_flat_advantage(self):
        assert dueling_combine(1.5, [7.0] * 5).q.tolist() == [1.5] * 5

    @given(st.floats(-1e3, 1e3, allow_nan=False), adv_vectors)
    def test_identity(self, v, adv):
        out = dueling_combine(v, adv)
        assert abs(out.adv_centered.mean()) < 1e-9
        assert np.array_equal(out.q, v + out.adv_centered)
        # adding v can only merge advantages closer than a few ulps of the sum
        tol = 8 * np.finfo(float).eps * (abs(v) + np.max(np.abs(adv)))
        assert adv[np.argmax(out.q)] >= np.max(adv) - tol

    @given(st.floats(-1e3, 1e3, allow_nan=False),
           arrays(np.float64, 5, elements=st.integers(-1000, 1000).map(float)))
    def test_argmax_preserved_when_resolvable(self, v, adv):
        assert np.argmax(dueling_combine(v, adv / 8).q) == np.argmax(adv)


class TestQValues:
    def test_zero_network(self):
        out = q_values(zero_net(GOAL), goal_obs())
        assert out.v == 0.0 and np.all(out.q == 0.0)

    def test_deterministic(self):
        net = DuelingNet.build(AVOIDANCE, np.random.default_rng(4))
        obs = Observation(GoalObs(1, 0), np.linspace(0.1, 4.0, 108))
        a, b = q_values(net, obs), q_values(net, obs)
        assert a.q.tobytes() == b.q.tobytes()

    @pytest.mark.parametrize("kind", [GOAL, AVOIDANCE])
    def test_matches_manual_composition(self, kind):
        net = DuelingNet.build(kind, np.random.default_rng(11))
        obs = Observation(GoalObs(3.2, -1.1), np.random.default_rng(2).uniform(0.06, 4.0, 108))
        x = net.norm.encode(obs)[None]
        h, _ = nn.forward(net.trunk.params, net.trunk.layers, x)
        v, _ = nn.forward(net.value.params, net.value.layers, h)
        a, _ = nn.forward(net.advantage.params, net.advantage.layers, h)
        manual = v[0, 0] + a[0] - a[0].mean()
        assert np.max(np.abs(q_values(net, obs).q - manual)) < 1e-12

    def test_encoding(self):
        n = Normalization(GOAL)
        assert n.encode(goal_obs(5.0, math.pi / 2)).tolist() == [0.5, 0.5]
        with pytest.raises(nn.ShapeError):
            Normalization(AVOIDANCE).encode(goal_obs())


class TestEpsilon:
    cfg = TrainConfig(episodes=1000, eps_decay_fraction=0.6)

    def test_schedule(self):
        assert epsilon_schedule(0, self.cfg) == 1.0
        assert epsilon_schedule(600, self.cfg) == 0.01
        assert epsilon_schedule(999, self.cfg) == 0.01
        assert epsilon_schedule(300, self.cfg) == pytest.approx(0.505)

    def test_schedule_monotone(self):
        eps = [epsilon_schedule(e, self.cfg) for e in range(1000)]
        assert all(b <= a for a, b in zip(eps, eps[1:]))

    def test_greedy(self):
        rng = np.random.default_rng(0)
        assert all(epsilon_greedy([0, 3, 1, 1, 1], 0.0, rng) == 1 for _ in range(100))
        assert epsilon_greedy([5, 5, 0, 0, 0], 0.0, rng) == 0

    def test_uniform_when_eps_one(self):
        rng = np.random.default_rng(1)
        n = 100_000
        counts = np.bincount([epsilon_greedy(np.arange(5.0), 1.0, rng) for _ in range(n)], minlength=5)
        sigma = math.sqrt(n * 0.2 * 0.8)
        assert np.all(np.abs(counts - 0.2 * n) < 3 * sigma)


class TestReplay:
    def test_fifo(self):
        buf = ReplayBuffer(5, (2,))
        for i in range(8):
            buf.push(np.full(2, i), i % 5, float(i), np.full(2, i + 1), 0)
        assert len(buf) == 5
        s, a, r, s2, d = buf.batch(buf.order())
        assert r.tolist() == [3.0, 4.0, 5.0, 6.0, 7.0]
        assert s[:, 0].tolist() == [3, 4, 5, 6, 7]

    @given(st.integers(1, 20), st.integers(0, 40))
    @settings(max_examples=30)
    def test_fifo_property(self, cap, extra):
        buf = ReplayBuffer(cap, (1,))
        total = cap + extra
        for i in range(total):
            buf.push([i], 0, float(i), [i], 0)
        assert buf.batch(buf.order())[2].tolist() == [float(i) for i in range(total - cap, total)]

    def test_uniform_sampling(self):
        buf = ReplayBuffer(10, (1,))
        for i in range(10):
            buf.push([i], 0, 0.0, [i], 0)
        rng = np.random.default_rng(0)
        n = 200_000
        counts = np.bincount(buf.sample_indices(n, rng), minlength=10)
        sigma = math.sqrt(n * 0.1 * 0.9)
        assert np.all(np.abs(counts - n / 10) < 3 * sigma)

    def test_rejects_bad_transition(self):
        buf = ReplayBuffer(2, (1,))
        with pytest.raises(ValueError):
            buf.push([0], 5, 0.0, [0], 0)
        with pytest.raises(ValueError):
            buf.push([0], 0, 0.0, [0], 2)


class TestTargets:
    net = DuelingNet.build(GOAL, np.random.default_rng(3))

    def test_terminal_masked(self):
        y = td_targets([10.0], np.array([[0.3, 0.1]]), [1], self.net, 0.99)
        assert y.tolist() == [10.0]

    def test_bootstrap_arithmetic(self):
        net = zero_net(GOAL)
        net.value.params[-1]["b"][:] = 2.0  # every next-state Q equals 2
        y = td_targets([1.0], np.array([[0.3, 0.1]]), [0], net, 0.99)
        assert y[0] == pytest.approx(2.98, abs=1e-12)

    def test_gamma_zero(self):
        r = np.array([1.0, -2.0, 0.5])
        y = td_targets(r, np.random.default_rng(0).normal(size=(3, 2)), [0, 0, 1], self.net, 0.0)
        assert y.tolist() == r.tolist()

    @given(arrays(np.float64, 2, elements=st.floats(-100, 100, allow_nan=False)), st.floats(-10, 10))
    @settings(max_examples=30)
    def test_terminal_independent_of_next_state(self, s_next, r):
        y1 = td_targets([r], s_next[None], [1], self.net, 0.99)
        y2 = td_targets([r], (s_next + 7.0)[None], [1], self.net, 0.99)
        assert y1[0] == y2[0] == r


def filled_buffer(n, rng, state=None):
    buf = ReplayBuffer(max(n, 1), (2,))
    for _ in range(n):
        s = rng.normal(size=2) if state is None else state
        buf.push(s, int(rng.integers(5)), float(rng.normal()), rng.normal(size=2), int(rng.integers(2)))
    return buf


class TestTrainStep:
    def test_requires_learning_start(self):
        net = DuelingNet.build(GOAL, np.random.default_rng(0))
        cfg = TrainConfig(learning_start=10)
        buf = filled_buffer(5, np.random.default_rng(0))
        with pytest.raises(InsufficientBufferError):
            train_step(net, net.copy(), buf, nn.AdamState.for_params(net.params), cfg, np.random.default_rng(0))

    def test_fixed_point_leaves_params(self):
        net = DuelingNet.build(GOAL, np.random.default_rng(0))
        s = np.array([0.2, -0.4])
        q = net.forward(s[None])[2][0]
        buf = ReplayBuffer(4, (2,))
        for _ in range(4):
            buf.push(s, 2, float(q[2]), s, 1)  # target = r = prediction
        before = [{k: v.copy() for k, v in p.items()} for p in net.params]
        cfg = TrainConfig(learning_start=1, minibatch_size=4)
        loss = train_step(net, net.copy(), buf, nn.AdamState.for_params(net.params, lr=1e-3), cfg,
                          np.random.default_rng(0))
        assert loss == 0.0
        assert all(np.array_equal(p[k], b[k]) for p, b in zip(net.params, before) for k in p)

    def test_single_transition_loss(self):
        net = DuelingNet.build(GOAL, np.random.default_rng(5))
        target = net.copy()
        buf = ReplayBuffer(1, (2,))
        s, s2 = np.array([0.3, 0.2]), np.array([0.1, -0.5])
        buf.push(s, 3, 0.7, s2, 0)
        q = net.forward(s[None])[2][0, 3]
        y = 0.7 + 0.99 * target.forward(s2[None])[2][0].max()
        cfg = TrainConfig(learning_start=1, minibatch_size=1)
        loss = train_step(net, target, buf, nn.AdamState.for_params(net.params), cfg,
                          np.random.default_rng(0))
        assert loss == pytest.approx((q - y) ** 2, rel=1e-12)

    def test_overfits_frozen_batch(self):
        rng = np.random.default_rng(0)
        net = DuelingNet.build(GOAL, rng)
        target = net.copy()
        buf = filled_buffer(32, rng)
        cfg = TrainConfig(learning_start=1, minibatch_size=32)
        adam = nn.AdamState.for_params(net.params, lr=1e-3)
        idx = np.arange(32)
        losses = [train_step(net, target, buf, adam, cfg, rng, idx=idx) for _ in range(1500)]
        windows = [np.mean(losses[i:i + 250]) for i in range(0, 1500, 250)]
        assert windows[1] < windows[0]
        assert max(windows[2:]) < 1e-2 * windows[0]


class TestSync:
    def test_copy_then_perturb(self):
        net = DuelingNet.build(GOAL, np.random.default_rng(0))
        tgt = sync_target(net)
        x = np.random.default_rng(1).normal(size=(16, 2))
        before = tgt.forward(x)[2].copy()
        assert np.array_equal(before, net.forward(x)[2])
        for p in net.params:
            for v in p.values():
                v += 0.1
        assert np.array_equal(tgt.forward(x)[2], before)

    def test_idempotent(self):
        net = DuelingNet.build(AVOIDANCE, np.random.default_rng(0))
        a, b = sync_target(net), sync_target(net)
        x = np.random.default_rng(1).uniform(size=(3, 108, 1))
        assert a.forward(x)[2].tobytes() == b.forward(x)[2].tobytes()


def _goal_rf(o, a, o2, crashed):
    return goal_reward(o.goal.d_g, o2.goal.d_g)


class TestTrainAgent:
    def test_zero_episodes(self):
        cfg = TrainConfig(episodes=0, seed=3)
        res = train_agent(build_goal_training_world, _goal_rf, cfg, GOAL)
        fresh = DuelingNet.build(GOAL, seed_streams(3, 5)[0])
        assert res.episode_rewards == []
        assert all(np.array_equal(p[k], f[k]) for p, f in zip(res.net.params, fresh.params) for k in p)

    def test_same_seed_same_log(self):
        cfg = TrainConfig(episodes=6, max_steps_per_episode=40, learning_start=50, minibatch_size=8,
                          target_sync_interval=20, seed=7, lr=1e-3)
        a = train_agent(build_goal_training_world, _goal_rf, cfg, GOAL)
        b = train_agent(build_goal_training_world, _goal_rf, cfg, GOAL)
        assert a.gradient_steps > 0
        assert a.episode_rewards == b.episode_rewards
        assert all(np.array_equal(p[k], q[k]) for p, q in zip(a.net.params, b.net.params) for k in p)

    def test_avoidance_short_run(self):
        from daac_nav.rewards import avoidance_reward
        from daac_nav.scenarios import build_avoidance_training_world

        cfg = TrainConfig.avoidance(episodes=2, max_steps_per_episode=30, learning_start=20,
                                    minibatch_size=4, seed=1)
        res = train_agent(build_avoidance_training_world, lambda o, a, o2, c: avoidance_reward(a, c),
                          cfg, AVOIDANCE, LidarSpec())
        assert len(res.episode_rewards) == 2
        assert set(res.episode_outcomes) <= {"crash", "timeout"}

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(eps_end=0.5, eps_initial=0.1)
        with pytest.raises(ValueError):
            TrainConfig(gamma=1.5)
        with pytest.raises(ValueError):
            TrainConfig(minibatch_size=0)
        assert TrainConfig.avoidance().buffer_capacity == 30000


class TestTabular:
    def test_single_state_geometric(self):
        mdp = TabularMDP(np.zeros((1, 1), dtype=np.int64), np.ones((1, 1)), np.zeros(1, dtype=bool))
        q = tabular_q_learning(mdp, 0.5, 0.5, 1, np.random.default_rng(0), eps=0.0, max_steps=200)
        assert q[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert value_iteration(mdp, 0.5)[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_gridworld_converges(self):
        mdp = gridworld(5, goal_reward=10.0)
        q_star = value_iteration(mdp, 0.9)
        q = tabular_q_learning(mdp, 0.5, 0.9, 20000, np.random.default_rng(0), eps=0.5, alpha_decay=0.001)
        assert np.max(np.abs(q - q_star)) < 1e-6

    def test_value_iteration_closed_form(self):
        mdp = gridworld(5, goal_reward=10.0)
        q_star = value_iteration(mdp, 0.9)
        v = q_star.max(axis=1)
        # Manhattan distance k to the goal: reward 10 discounted k-1 times
        for s in range(24):
            k = (4 - s % 5) + (4 - s // 5)
            assert v[s] == pytest.approx(10 * 0.9 ** (k - 1), abs=1e-12)

    def test_zero_alpha_no_change(self):
        q = tabular_q_learning(gridworld(), 0.0, 0.9, 50, np.random.default_rng(0))
        assert np.all(q == 0.0)
