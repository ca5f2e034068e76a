"""Tabular Q-learning of per-device threshold levels.

Every device runs its own table.  A device's state is its current level
together with the outcome class of the previous TTI; its action is the level
for the next TTI.  Rewards come from :func:`rl_environment_step`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..network import Deployment, SensingModel, threshold_floor, w_vector
from ..rng import make_rng
from ..sim import OUTCOMES, RewardConfig, RlState, rl_environment_step
from .common import ErrorBudget, OptimizerResult, make_result

__all__ = ["QConfig", "QTable", "level_grid", "solve_qlearning"]


def level_grid(dep: Deployment, model: SensingModel, levels: int = 20) -> np.ndarray:
    """``levels`` thresholds log-spaced from the full-coverage floor to 1."""
    if levels < 1:
        raise ValueError("the action grid must not be empty")
    if levels == 1:
        return np.ones(1)
    return np.exp(np.linspace(math.log(threshold_floor(dep.area, model)), 0.0, levels))


@dataclass
class QConfig:
    """Learning settings.

    ``ttis`` is the number of simulated TTIs per episode.  ``epsilon`` decays
    linearly from ``epsilon_start`` to ``epsilon_end`` over all training
    TTIs.  ``start_level`` is the initial level of every device (default:
    the top level, threshold 1).
    """

    levels: int = 20
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    ttis: int = 2_000
    seed: int = 0
    start_level: Optional[int] = None
    reward: RewardConfig = field(default_factory=RewardConfig)
    include_utility: bool = True

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning rate must be in (0, 1]")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        for v in (self.epsilon_start, self.epsilon_end):
            if not 0 <= v <= 1:
                raise ValueError("exploration rates must be in [0, 1]")
        if self.ttis < 1:
            raise ValueError("ttis must be >= 1")


class QTable:
    """Lookup table ``Q[state, action]`` with visit counts."""

    def __init__(self, n_states: int, n_actions: int, learning_rate: float, discount: float):
        if n_states < 1 or n_actions < 1:
            raise ValueError("the Q-table needs at least one state and one action")
        if not 0 < learning_rate <= 1 or not 0 < discount <= 1:
            raise ValueError("learning rate and discount must be in (0, 1]")
        self.values = np.zeros((n_states, n_actions))
        self.visits = np.zeros((n_states, n_actions), dtype=np.int64)
        self.learning_rate = learning_rate
        self.discount = discount

    def greedy(self, state: int) -> int:
        return int(np.argmax(self.values[state]))  # first maximum wins ties

    def choose(self, state: int, epsilon: float, rng: np.random.Generator) -> int:
        if epsilon > 0 and rng.random() < epsilon:
            return int(rng.integers(self.values.shape[1]))
        return self.greedy(state)

    def update(self, state: int, action: int, reward: float, next_state: Optional[int]) -> None:
        """``Q <- (1 - w) Q + w (r + z max Q')``; ``next_state=None`` ends the episode."""
        future = 0.0 if next_state is None else float(self.values[next_state].max())
        target = reward + self.discount * future
        lr = self.learning_rate
        self.values[state, action] = (1.0 - lr) * self.values[state, action] + lr * target
        self.visits[state, action] += 1

    def policy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)


def _state_index(level: int, outcome: str) -> int:
    return level * len(OUTCOMES) + OUTCOMES.index(outcome)


def solve_qlearning(
    dep: Deployment,
    cals,
    model: SensingModel,
    budget: ErrorBudget,
    qcfg: QConfig = QConfig(),
    episodes: int = 1,
) -> OptimizerResult:
    """Train independent per-device Q-tables and return the greedy levels.

    Each device's final level is the greedy action of its states weighted by
    how often they were visited, i.e. the level its learnt policy picks most
    often in the situations it actually met.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    grid = level_grid(dep, model, qcfg.levels)
    n_levels = len(grid)
    n = dep.n
    w = w_vector(cals)
    tables = [QTable(n_levels * len(OUTCOMES), n_levels, qcfg.learning_rate, qcfg.discount) for _ in range(n)]
    rng = make_rng(qcfg.seed)
    total = episodes * qcfg.ttis
    start = n_levels - 1 if qcfg.start_level is None else int(qcfg.start_level)
    if not 0 <= start < n_levels:
        raise ValueError("start level outside the action grid")
    step = 0
    for _ in range(episodes):
        state = RlState(tuple([start] * n))
        for _ in range(qcfg.ttis):
            frac = step / max(total - 1, 1)
            eps = qcfg.epsilon_start + (qcfg.epsilon_end - qcfg.epsilon_start) * frac
            s_idx = [_state_index(state.levels[j], state.last_outcome) for j in range(n)]
            action = np.array([tables[j].choose(s_idx[j], eps, rng) for j in range(n)])
            nxt, rewards = rl_environment_step(state, action, dep, model, rng, grid, cals_w=w,
                                               reward=qcfg.reward, include_utility=qcfg.include_utility)
            for j in range(n):
                tables[j].update(s_idx[j], int(action[j]), float(rewards[j]),
                                 _state_index(nxt.levels[j], nxt.last_outcome))
            state = nxt
            step += 1
    levels = np.empty(n, dtype=int)
    for j, tab in enumerate(tables):
        weight = tab.visits.sum(axis=1)
        votes = np.bincount(tab.policy(), weights=weight, minlength=n_levels)
        levels[j] = int(np.argmax(votes))
    return make_result("qlearn", cals, model, budget, grid[levels], iterations=total,
                       evaluations=total, seed=qcfg.seed, levels=levels, episodes=episodes)
