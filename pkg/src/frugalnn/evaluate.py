"""Policy evaluation: episode rollouts, k-nearest retrieval, budget sweeps.

Three policies are compared through the same environment: uniform-random
over available actions, a trained Q-network acting greedily, and tree-walk
suggestions.  Quality is reported two ways per test point: the ranking score
of the final revealed set, and the sum of full-feature distances to the k
neighbors retrieved with only the revealed coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from frugalnn import cbctree, dqn
from frugalnn.cluster import Clustering, partial_distances
from frugalnn.data import CostSchedule
from frugalnn.env import Action, EnvState, Environment


class Agent(Protocol):
    def choose(self, env: Environment, state: EnvState) -> Action: ...

    def retrieval_restriction(self, env: Environment,
                              state: EnvState) -> np.ndarray | None: ...


class _NoRestriction:
    """Mixin for policies that retrieve from the whole reference set."""

    def retrieval_restriction(self, env, state):
        return None


class RandomAgent(_NoRestriction):
    """Uniform over every available action, terminate included."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def choose(self, env: Environment, state: EnvState) -> Action:
        available = np.flatnonzero(env.mask(state))
        return env.action_from_index(int(available[self.rng.integers(available.size)]))


class RevealAllAgent(_NoRestriction):
    """Reveals the lowest-index affordable feature until none remain."""

    def choose(self, env: Environment, state: EnvState) -> Action:
        reveals = np.flatnonzero(env.mask(state)[:-1])
        return Action(int(reveals[0])) if reveals.size else Action(None)


class DqnAgent(_NoRestriction):
    """Greedy masked argmax of a trained Q-network."""

    def __init__(self, network: dqn.QNetwork):
        self.network = network

    def choose(self, env: Environment, state: EnvState) -> Action:
        idx = dqn.act(self.network, env.encode(state), env.mask(state), eps=0.0)
        return env.action_from_index(idx)


class TreeAgent:
    """Follows tree suggestions; retrieval is confined to the predicted leaf."""

    def __init__(self, tree: cbctree.CBCTree, schedule: CostSchedule):
        self.tree = tree
        self.schedule = schedule

    def choose(self, env: Environment, state: EnvState) -> Action:
        p = env.points[state.point_index]
        action = cbctree.suggest(self.tree, p, state.revealed, self.schedule,
                                 state.budget - state.accrued_cost)
        # Guard against float drift between "cost <= budget_left" and the
        # environment's "accrued + cost <= budget" affordability forms.
        if not action.is_terminate and not env.mask(state)[action.feature]:
            return Action(None)
        return action

    def retrieval_restriction(self, env, state):
        p = env.points[state.point_index]
        leaf = cbctree.predict_cluster(self.tree, p, state.revealed)
        return np.asarray(leaf.point_indices, dtype=int)


@dataclass(frozen=True)
class EpisodeOutcome:
    revealed: frozenset[int]
    cost: float
    score: float
    final_state: EnvState


def run_episode(agent: Agent, env: Environment, p_index: int,
                budget: float) -> EpisodeOutcome:
    """Rolls the agent's policy from a fresh state to termination."""
    state = env.reset(p_index, budget)
    while not state.done:
        state = env.step(state, agent.choose(env, state)).state
    return EpisodeOutcome(revealed=state.revealed, cost=state.accrued_cost,
                          score=env.final_score(state), final_state=state)


def knn_retrieve(rows: np.ndarray, p, revealed, k: int,
                 restriction: np.ndarray | None = None) -> np.ndarray:
    """Indices of the k rows nearest to p over the revealed coordinates.

    Distance ties break toward the lower index.  A restriction narrows the
    candidate rows; if it holds fewer than k points they are all returned.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if restriction is None:
        candidates = np.arange(rows.shape[0])
    else:
        candidates = np.sort(np.asarray(restriction, dtype=int))
        if candidates.size == 0:
            raise ValueError("empty retrieval restriction")
    d = partial_distances(p, rows[candidates], revealed)
    order = np.argsort(d, kind="stable")
    return candidates[order[:min(k, candidates.size)]]


def true_distance_sum(rows: np.ndarray, p, retrieved) -> float:
    """Sum of full-feature euclidean distances from p to the retrieved rows."""
    diffs = rows[np.asarray(retrieved, dtype=int)] - np.asarray(p, dtype=float)
    return float(np.sqrt((diffs * diffs).sum(axis=1)).sum())


@dataclass(frozen=True)
class SweepRow:
    agent: str
    budget: float
    seed: int
    mean_sum_true_distance: float
    mean_score: float
    mean_cost: float
    n_test: int


@dataclass(frozen=True)
class TraceRow:
    point_id: int
    agent: str
    budget: float
    revealed_bitmask: int
    cost: float
    score: float
    sum_true_distance: float


@dataclass
class SweepReport:
    rows: list[SweepRow]
    traces: list[TraceRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


AgentFactory = Callable[[float, int], Agent]


def evaluate_cell(agent: Agent, name: str, train_rows: np.ndarray,
                  test_rows: np.ndarray, clustering: Clustering,
                  schedule: CostSchedule, budget: float, seed: int,
                  k: int = 5, alpha: float = 1.0,
                  collect_trace: bool = False) -> tuple[SweepRow, list[TraceRow]]:
    """One (agent, budget, seed) cell: every test point once, means reported."""
    env = Environment(test_rows, clustering, schedule, alpha=alpha)
    sums, scores, costs = [], [], []
    traces: list[TraceRow] = []
    for i in range(test_rows.shape[0]):
        out = run_episode(agent, env, i, budget)
        restriction = agent.retrieval_restriction(env, out.final_state)
        retrieved = knn_retrieve(train_rows, test_rows[i], out.revealed, k,
                                 restriction)
        dist = true_distance_sum(train_rows, test_rows[i], retrieved)
        sums.append(dist)
        scores.append(out.score)
        costs.append(out.cost)
        if collect_trace:
            bitmask = sum(1 << f for f in out.revealed)
            traces.append(TraceRow(i, name, budget, bitmask, out.cost,
                                   out.score, dist))
    row = SweepRow(agent=name, budget=budget, seed=seed,
                   mean_sum_true_distance=float(np.mean(sums)),
                   mean_score=float(np.mean(scores)),
                   mean_cost=float(np.mean(costs)),
                   n_test=test_rows.shape[0])
    return row, traces


def budget_sweep(factories: dict[str, AgentFactory], train_rows: np.ndarray,
                 test_rows: np.ndarray, clustering: Clustering,
                 schedule: CostSchedule, budgets: list[float],
                 seeds: list[int], k: int = 5, alpha: float = 1.0,
                 collect_trace: bool = False,
                 metadata: dict | None = None) -> SweepReport:
    """Cross product of agents x budgets x seeds, serially.

    Budgets must be positive.  Factories receive (budget, seed) so policies
    that depend on either, like a Q-network trained at a specific budget, are
    rebuilt per cell.
    """
    report = SweepReport(rows=[], metadata=dict(metadata or {}))
    report.metadata.setdefault("k", k)
    report.metadata.setdefault("budgets", list(budgets))
    report.metadata.setdefault("seeds", list(seeds))
    for name in sorted(factories):
        for budget in budgets:
            for seed in seeds:
                agent = factories[name](budget, seed)
                row, traces = evaluate_cell(
                    agent, name, train_rows, test_rows, clustering, schedule,
                    budget, seed, k=k, alpha=alpha, collect_trace=collect_trace)
                report.rows.append(row)
                report.traces.extend(traces)
    return report


REPORT_COLUMNS = ("agent", "budget", "seed", "mean_sum_true_distance",
                  "mean_score", "mean_cost", "n_test")
TRACE_COLUMNS = ("point_id", "agent", "budget", "revealed_bitmask", "cost",
                 "score", "sum_true_distance")


def _cell_text(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_report_csv(report: SweepReport, path: str,
                     comments: list[str] | None = None) -> None:
    """Deterministic CSV; floats via repr so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([_cell_text(getattr(row, c)) for c in REPORT_COLUMNS])


def write_trace_csv(report: SweepReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in report.traces:
            writer.writerow([_cell_text(getattr(row, c)) for c in TRACE_COLUMNS])


def read_report_csv(path: str) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for rec in reader:
            rows.append(SweepRow(
                agent=rec["agent"], budget=float(rec["budget"]),
                seed=int(rec["seed"]),
                mean_sum_true_distance=float(rec["mean_sum_true_distance"]),
                mean_score=float(rec["mean_score"]),
                mean_cost=float(rec["mean_cost"]), n_test=int(rec["n_test"])))
    return rows


def full_reveal_bound(train_rows: np.ndarray, test_rows: np.ndarray,
                      k: int = 5) -> float:
    """Mean over test points of the exact k-NN true-distance sum; the floor
    every policy curve sits on."""
    n = train_rows.shape[1]
    revealed = np.arange(n)
    sums = []
    for p in test_rows:
        retrieved = knn_retrieve(train_rows, p, revealed, k)
        sums.append(true_distance_sum(train_rows, p, retrieved))
    return float(np.mean(sums))
