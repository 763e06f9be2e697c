"""Tabular Q-learning over reward machine states with counterfactual updates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rm_core import RewardMachine


@dataclass
class Hyperparams:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon: float = 0.1
    epsilon_min: float = 0.01
    horizon: int = 500
    num_episodes: int = 2000
    p_sync: float = 0.3
    eval_period: int = 50
    eval_episodes: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0 or not 0.0 <= self.epsilon_min <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.p_sync <= 1.0:
            raise ValueError("p_sync must lie in [0, 1]")
        if self.horizon < 1 or self.num_episodes < 0 or self.eval_period < 1:
            raise ValueError("horizon and eval_period must be positive, num_episodes >= 0")

    def epsilon_at(self, episode: int) -> float:
        """Linear decay from ``epsilon`` to ``epsilon_min`` over the run."""
        if self.num_episodes <= 1 or self.epsilon <= self.epsilon_min:
            return self.epsilon
        frac = min(1.0, episode / (self.num_episodes - 1))
        return self.epsilon + frac * (self.epsilon_min - self.epsilon)


class QPolicy:
    """One Q-table per RM state; the final state's table stays all zero."""

    def __init__(self, rm: RewardMachine, n_obs: int, n_actions: int = 5,
                 alpha: float = 0.1, gamma: float = 0.95, epsilon: float = 0.1):
        self.rm = rm
        self.n_obs = n_obs
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.table = np.zeros((rm.n_states, n_obs, n_actions))
        self.final = rm.index(rm.final)
        self.live = np.array([i for i in range(rm.n_states) if i != self.final], dtype=np.intp)
        self._steps = {}

    def values(self, u: int, s: int) -> np.ndarray:
        return self.table[u, s]

    def transitions(self, lab):
        hit = self._steps.get(lab)
        if hit is None:
            nxt, rew = self.rm.step_table(lab)
            live = self.live
            hit = (np.asarray(nxt, dtype=np.intp)[live], np.asarray(rew, dtype=float)[live])
            self._steps[lab] = hit
        return hit


def select_action(q: QPolicy, u: int, s: int, rng, epsilon: float | None = None) -> int:
    eps = q.epsilon if epsilon is None else epsilon
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(q.n_actions))
    row = q.table[u, s]
    best = np.flatnonzero(row == row.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def greedy_action(q: QPolicy, u: int, s: int, rng) -> int:
    return select_action(q, u, s, rng, epsilon=0.0)


def update_all(q: QPolicy, s: int, a: int, s2: int, lab) -> None:
    """Apply the QRM update at ``(s, a)`` for every non-final RM state."""
    nxt, rew = q.transitions(lab)
    t = q.table
    live = q.live
    target = rew + q.gamma * t[nxt, s2].max(axis=1)
    cur = t[live, s, a]
    t[live, s, a] = cur + q.alpha * (target - cur)


def reset(q: QPolicy, rm: RewardMachine) -> QPolicy:
    return QPolicy(rm, q.n_obs, q.n_actions, q.alpha, q.gamma, q.epsilon)


def dump(q: QPolicy, path) -> None:
    """Write ``state obs action value`` lines for nonzero entries."""
    with open(path, "w") as fh:
        for u, s, a in zip(*np.nonzero(q.table)):
            fh.write(f"{q.rm.states[u]} {s} {a} {q.table[u, s, a]:.6g}\n")
