"""The budgeted feature-acquisition MDP.

A state is (query point, revealed feature set, accrued cost, budget).
Revealing feature f costs c(f) and yields reward -alpha*c(f); terminating
yields the negative rank-MSE score of the revealed set.  A state is terminal
once no unrevealed feature is affordable.  Revealing any member of a feature
group reveals the whole group while charging only the acted-on feature.

When a reveal lands the episode in a terminal state the environment issues
the terminal score on that same step (the agent would have no choice left),
so episode return is always exactly -alpha * charged_cost - score(final set).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from frugalnn.cluster import Clustering, rank_clusters
from frugalnn.data import CostSchedule


@dataclass(frozen=True)
class Action:
    """Reveal(feature) when `feature` is an index; terminate when None."""

    feature: int | None = None

    @property
    def is_terminate(self) -> bool:
        return self.feature is None


TERMINATE = Action(None)


@dataclass(frozen=True)
class EnvState:
    point_index: int
    revealed: frozenset[int]
    accrued_cost: float
    budget: float
    done: bool = False


@dataclass(frozen=True)
class StepResult:
    state: EnvState
    reward: float
    done: bool


class Environment:
    """Episode mechanics over a fixed query set, clustering, and schedule.

    Instances are cheap; all mutable episode state lives in EnvState values,
    so distinct episodes can run concurrently against one Environment.
    """

    def __init__(self, points: np.ndarray, clustering: Clustering,
                 schedule: CostSchedule, alpha: float = 1.0):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.clustering = clustering
        self.schedule = schedule
        self.alpha = float(alpha)
        self.n_features = self.points.shape[1]
        self._full_ranks: dict[int, np.ndarray] = {}

    @property
    def n_actions(self) -> int:
        return self.n_features + 1

    def action_from_index(self, index: int) -> Action:
        return TERMINATE if index == self.n_features else Action(index)

    def action_index(self, action: Action) -> int:
        return self.n_features if action.is_terminate else action.feature

    def reset(self, p_index: int, budget: float) -> EnvState:
        if not 0 <= p_index < self.points.shape[0]:
            raise ValueError(f"point index {p_index} out of range")
        if not budget > 0:
            raise ValueError(f"budget must be positive, got {budget}")
        return EnvState(point_index=p_index, revealed=frozenset(),
                        accrued_cost=0.0, budget=float(budget))

    def is_terminal(self, s: EnvState) -> bool:
        """True iff no unrevealed feature fits in the remaining budget."""
        costs = self.schedule.costs
        return all(f in s.revealed or s.accrued_cost + costs[f] > s.budget
                   for f in range(self.n_features))

    def mask(self, s: EnvState) -> np.ndarray:
        """Availability bits over the n+1 actions; terminate is always on.

        Unlike the bare multi-hot complement, unaffordable reveals are also
        masked out so the budget constraint is enforced by the environment.
        """
        m = np.zeros(self.n_actions, dtype=bool)
        costs = self.schedule.costs
        for f in range(self.n_features):
            if f not in s.revealed and s.accrued_cost + costs[f] <= s.budget:
                m[f] = True
        m[self.n_features] = True
        return m

    def encode(self, s: EnvState) -> np.ndarray:
        """Multi-hot of revealed features with the accrued cost appended."""
        e = np.zeros(self.n_features + 1)
        for f in s.revealed:
            e[f] = 1.0
        e[self.n_features] = s.accrued_cost
        return e

    def _score(self, s: EnvState) -> float:
        p = self.points[s.point_index]
        full = self._full_ranks.get(s.point_index)
        if full is None:
            full = rank_clusters(p, np.arange(self.n_features), self.clustering)
            self._full_ranks[s.point_index] = full
        partial = rank_clusters(p, s.revealed, self.clustering)
        diff = (partial - full).astype(float)
        return float(diff @ diff) / self.clustering.n_clusters

    def step(self, s: EnvState, a: Action) -> StepResult:
        if s.done:
            raise ValueError("cannot step a finished episode")
        if a.is_terminate:
            nxt = replace(s, done=True)
            return StepResult(nxt, -self._score(s), True)

        f = a.feature
        if not 0 <= f < self.n_features:
            raise ValueError(f"feature index {f} out of range")
        if f in s.revealed:
            raise ValueError(f"feature {f} already revealed")
        cost = float(self.schedule.costs[f])
        if s.accrued_cost + cost > s.budget:
            raise ValueError(f"feature {f} unaffordable: cost {cost} with "
                             f"{s.budget - s.accrued_cost} budget left")
        nxt = EnvState(point_index=s.point_index,
                       revealed=s.revealed | self.schedule.group_of(f),
                       accrued_cost=s.accrued_cost + cost,
                       budget=s.budget)
        reward = -self.alpha * cost
        if self.is_terminal(nxt):
            reward -= self._score(nxt)
            nxt = replace(nxt, done=True)
        return StepResult(nxt, reward, nxt.done)

    def final_score(self, s: EnvState) -> float:
        """Rank-MSE of the state's revealed set (used for reporting)."""
        return self._score(s)
