"""Tabular Q-learning on small deterministic MDPs, checked against value
iteration.  These back the network-free sanity suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TabularMDP:
    """Deterministic MDP: ``next_state[s, a]``, ``reward[s, a]``; entering a
    terminal state ends the episode."""

    next_state: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_actions(self) -> int:
        return self.next_state.shape[1]


def gridworld(size: int = 5, goal=(4, 4), goal_reward: float = 10.0, step_reward: float = 0.0) -> TabularMDP:
    """``size`` x ``size`` grid, actions up/down/left/right, walls block
    motion.  Entering ``goal`` pays ``goal_reward`` and terminates."""
    moves = [(0, 1), (0, -1), (-1, 0), (1, 0)]
    n = size * size
    nxt = np.zeros((n, 4), dtype=np.int64)
    rew = np.full((n, 4), step_reward)
    g = goal[1] * size + goal[0]
    for s in range(n):
        x, y = s % size, s // size
        for a, (dx, dy) in enumerate(moves):
            nx = min(max(x + dx, 0), size - 1)
            ny = min(max(y + dy, 0), size - 1)
            nxt[s, a] = ny * size + nx
            if nxt[s, a] == g:
                rew[s, a] = goal_reward
    term = np.zeros(n, dtype=bool)
    term[g] = True
    return TabularMDP(nxt, rew, term)


def value_iteration(mdp: TabularMDP, gamma: float, tol: float = 1e-13, max_iter: int = 100000) -> np.ndarray:
    """Optimal Q by repeated Bellman optimality backups."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        v_next = np.where(mdp.terminal[mdp.next_state], 0.0, q.max(axis=1)[mdp.next_state])
        q_new = mdp.reward + gamma * v_next
        q_new[mdp.terminal] = 0.0
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new
    return q


def tabular_q_learning(mdp: TabularMDP, alpha: float, gamma: float, episodes: int,
                       rng: np.random.Generator, eps: float = 0.2, max_steps: int = 100,
                       alpha_decay: float = 0.0) -> np.ndarray:
    """Q-learning with epsilon-greedy behaviour and exploring starts.

    The step size for a pair visited ``n`` times is
    ``alpha / (1 + alpha_decay * n)``.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions))
    visits = np.zeros_like(q)
    starts = np.flatnonzero(~mdp.terminal)
    for _ in range(episodes):
        s = int(rng.choice(starts))
        for _ in range(max_steps):
            if rng.random() < eps:
                a = int(rng.integers(mdp.n_actions))
            else:
                a = int(np.argmax(q[s]))
            s2 = int(mdp.next_state[s, a])
            bootstrap = 0.0 if mdp.terminal[s2] else q[s2].max()
            step = alpha / (1.0 + alpha_decay * visits[s, a])
            q[s, a] += step * (mdp.reward[s, a] + gamma * bootstrap - q[s, a])
            visits[s, a] += 1
            if mdp.terminal[s2]:
                break
            s = s2
    return q
