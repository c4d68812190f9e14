"""Budgeted feature acquisition for nearest-cluster retrieval.

Given a complete reference table with per-feature acquisition costs and a
query point whose values are initially unknown, the package learns policies
(a cost-balancing clustering tree and a dueling double DQN) that decide which
features to reveal under a budget so the query's nearest clusters and
neighbors can be identified.  An evaluation harness sweeps budgets and an
HTTP advisory service drives interactive, human-in-the-loop sessions.
"""

from frugalnn.errors import DataError, TrainingDiverged

__version__ = "0.1.0"

__all__ = ["DataError", "TrainingDiverged", "__version__"]
