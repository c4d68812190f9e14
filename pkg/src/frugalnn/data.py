"""Dataset ingestion, normalization, train/test splitting, cost schedules.

Reference tables are complete numeric CSVs.  Incompleteness is never stored:
it is simulated by the environment, so missing or non-numeric cells are load
errors.  Normalization maps every feature into [0, 1] (min-max, the default)
or roughly [-1, 1] (mean/range), with stats always computed on the training
portion and applied, clamped, to test data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from frugalnn.errors import DataError

NORMALIZATION_MODES = ("minmax", "meanrange")


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature (min, max, mean, range) computed on the fitting rows."""

    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    range: np.ndarray

    @classmethod
    def fit(cls, rows: np.ndarray, feature_names: list[str]) -> "FeatureStats":
        lo = rows.min(axis=0)
        hi = rows.max(axis=0)
        rng = hi - lo
        for j in np.flatnonzero(rng <= 0):
            raise DataError(f"constant feature {feature_names[int(j)]!r}: "
                            f"all values equal {lo[int(j)]!r}")
        return cls(min=lo, max=hi, mean=rows.mean(axis=0), range=rng)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("min", "max", "mean", "range")}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        return cls(**{k: np.asarray(d[k], dtype=float) for k in ("min", "max", "mean", "range")})


@dataclass(frozen=True)
class Dataset:
    """Numeric table; `stats`/`mode` are set once the rows are normalized."""

    feature_names: list[str]
    rows: np.ndarray
    stats: FeatureStats | None = None
    mode: str = "minmax"

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=float)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0


@dataclass(frozen=True)
class CostSchedule:
    """Per-feature acquisition costs in [0, 1] plus disjoint feature groups.

    Revealing any member of a group reveals the rest of that group; only the
    acted-on feature's cost is charged.
    """

    costs: np.ndarray
    groups: tuple[frozenset[int], ...] = ()

    def __post_init__(self):
        costs = np.ascontiguousarray(self.costs, dtype=float)
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "groups", tuple(frozenset(g) for g in self.groups))

    @property
    def n_features(self) -> int:
        return self.costs.shape[0]

    def group_of(self, feature: int) -> frozenset[int]:
        for g in self.groups:
            if feature in g:
                return g
        return frozenset((feature,))

    def to_dict(self) -> dict:
        return {"costs": self.costs.tolist(),
                "groups": [sorted(g) for g in self.groups]}


def uniform_schedule(n_features: int) -> CostSchedule:
    return CostSchedule(costs=np.full(n_features, 1.0 / n_features))


def _looks_like_header(cells: list[str]) -> bool:
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_dataset(path: str, header: bool | None = None) -> Dataset:
    """Parse a comma-separated numeric file into a raw (unnormalized) Dataset.

    Every cell must parse as a finite real; rows must all have the same
    arity.  Feature names come from the header line when `header` is set,
    otherwise f0..f{n-1}.  Default is to sniff: a first line with any
    non-numeric cell is taken as the header (an all-numeric header line
    cannot be distinguished from data and needs header=True).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            lines = [row for row in reader if row]
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None

    if header is None:
        header = bool(lines) and _looks_like_header(lines[0])
    if header:
        if not lines:
            raise DataError(f"{path}: empty file, expected a header line")
        names = [c.strip() for c in lines[0]]
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate feature names in header")
        body = lines[1:]
    else:
        names = None
        body = lines
    if not body:
        raise DataError(f"{path}: no data rows")

    n = len(body[0])
    rows = np.empty((len(body), n), dtype=float)
    for i, line in enumerate(body):
        if len(line) != n:
            raise DataError(f"{path}: row {i + 1} has {len(line)} cells, expected {n}")
        for j, cell in enumerate(line):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell at row {i + 1}, "
                                f"column {j + 1}: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: missing/non-finite value at row {i + 1}, "
                                f"column {j + 1}: {cell!r}")
            rows[i, j] = v
    if names is None:
        names = [f"f{j}" for j in range(n)]
    elif len(names) != n:
        raise DataError(f"{path}: header has {len(names)} names but rows have {n} cells")
    return Dataset(feature_names=names, rows=rows)


def _transform(rows: np.ndarray, stats: FeatureStats, mode: str, clamp: bool) -> np.ndarray:
    if clamp:
        rows = np.clip(rows, stats.min, stats.max)
    if mode == "minmax":
        return (rows - stats.min) / stats.range
    if mode == "meanrange":
        return (rows - stats.mean) / stats.range
    raise DataError(f"unknown normalization mode {mode!r}")


def denormalize(values: np.ndarray, stats: FeatureStats, mode: str = "minmax") -> np.ndarray:
    """Inverse of the normalization transform (exact on unclamped data)."""
    values = np.asarray(values, dtype=float)
    if mode == "minmax":
        return values * stats.range + stats.min
    if mode == "meanrange":
        return values * stats.range + stats.mean
    raise DataError(f"unknown normalization mode {mode!r}")


def normalize(ds: Dataset, mode: str = "minmax") -> Dataset:
    """Normalize a raw dataset in place with stats fitted on itself."""
    stats = FeatureStats.fit(ds.rows, ds.feature_names)
    return Dataset(feature_names=ds.feature_names,
                   rows=_transform(ds.rows, stats, mode, clamp=False),
                   stats=stats, mode=mode)


def split_indices(n_rows: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic disjoint exhaustive (train, test) index partition.

    The test side takes floor((1 - train_fraction) * n) rows, which matches
    the published per-dataset train/test counts.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {spec.train_fraction}")
    if n_rows < 2:
        raise DataError("need at least 2 rows to split")
    n_test = int(math.floor((1.0 - spec.train_fraction) * n_rows))
    n_test = min(max(n_test, 0), n_rows - 1)
    perm = np.random.default_rng(spec.seed).permutation(n_rows)
    return np.sort(perm[: n_rows - n_test]), np.sort(perm[n_rows - n_test:])


def split(ds: Dataset, spec: SplitSpec, mode: str = "minmax") -> tuple[Dataset, Dataset]:
    """Partition `ds`, fit normalization stats on train, apply to both sides.

    Test values outside the train min/max are clamped so distances stay
    bounded and environment states remain valid.
    """
    train_idx, test_idx = split_indices(len(ds), spec)
    stats = FeatureStats.fit(ds.rows[train_idx], ds.feature_names)
    train = Dataset(feature_names=ds.feature_names,
                    rows=_transform(ds.rows[train_idx], stats, mode, clamp=False),
                    stats=stats, mode=mode)
    test = Dataset(feature_names=ds.feature_names,
                   rows=_transform(ds.rows[test_idx], stats, mode, clamp=True),
                   stats=stats, mode=mode)
    return train, test


def load_cost_schedule(path: str | None, n_features: int) -> CostSchedule:
    """Load a JSON cost schedule, or build the uniform 1/n default.

    Costs are renormalized by their maximum when any exceeds 1 so that
    0 <= c(f) <= 1 holds for every feature.
    """
    if path is None:
        return uniform_schedule(n_features)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"cost schedule file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None

    costs = np.asarray(raw.get("costs", []), dtype=float)
    if costs.shape != (n_features,):
        raise DataError(f"{path}: expected {n_features} costs, got {costs.shape}")
    if np.any(costs < 0):
        j = int(np.flatnonzero(costs < 0)[0])
        raise DataError(f"{path}: negative cost {costs[j]!r} for feature {j}")
    if not np.all(np.isfinite(costs)):
        raise DataError(f"{path}: non-finite cost")
    if costs.size and costs.max() > 1.0:
        costs = costs / costs.max()

    groups = []
    seen: set[int] = set()
    for g in raw.get("groups", []):
        members = set()
        for f in g:
            if not isinstance(f, int) or not 0 <= f < n_features:
                raise DataError(f"{path}: group member {f!r} is not a valid feature index")
            members.add(f)
        if members & seen:
            raise DataError(f"{path}: overlapping groups (feature "
                            f"{sorted(members & seen)[0]} appears twice)")
        seen |= members
        if members:
            groups.append(frozenset(members))
    return CostSchedule(costs=costs, groups=tuple(groups))


def save_dataset_csv(ds: Dataset, path: str) -> None:
    """Write a dataset back out as a headered CSV (shortest round-trip floats)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names)
        for row in ds.rows:
            writer.writerow([repr(float(v)) for v in row])


def clamp_to_train_range(raw_value: float, feature: int, stats: FeatureStats,
                         mode: str = "minmax") -> float:
    """Normalize one user-supplied raw value, clamped into the train range."""
    v = min(max(float(raw_value), float(stats.min[feature])), float(stats.max[feature]))
    if mode == "minmax":
        return (v - float(stats.min[feature])) / float(stats.range[feature])
    if mode == "meanrange":
        return (v - float(stats.mean[feature])) / float(stats.range[feature])
    raise DataError(f"unknown normalization mode {mode!r}")
