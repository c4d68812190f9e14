"""Cost Balancing Clustering Tree: induction, traversal, and suggestion.

Nodes split on (feature, threshold) boundaries chosen to maximize the drop in
average centroid distance discounted by the scaled feature cost; features
already used on the path are cost-free, so continuous features may be reused
at several thresholds.  Partial queries traverse known boundaries and fan out
across unknown ones, scoring candidate nodes by the reciprocal size-weighted
sum of partial distances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from frugalnn.cluster import partial_distances
from frugalnn.data import CostSchedule, Dataset
from frugalnn.env import TERMINATE, Action

SIMILARITY_EPS = 1e-9


@dataclass(frozen=True)
class Boundary:
    feature: int
    value: float


@dataclass(frozen=True)
class TreeParams:
    tau: int = 10           # min points before a node may stay a leaf
    alpha: float = 1.0      # cost scaler in the split reward
    ell: int = 20           # candidate thresholds per feature per node
    reuse_features: bool = True  # allow re-splitting a path feature at zero cost

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.ell < 2:
            raise ValueError(f"ell must be >= 2, got {self.ell}")


@dataclass
class Node:
    """Internal node (has a boundary) or leaf; every node keeps its points."""

    point_indices: np.ndarray
    centroid: np.ndarray
    avg_dist: float
    boundary: Boundary | None = None
    left: "Node | None" = None
    right: "Node | None" = None
    node_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.boundary is None

    @property
    def size(self) -> int:
        return int(self.point_indices.shape[0])


@dataclass
class CBCTree:
    root: Node
    rows: np.ndarray
    params: TreeParams

    def leaves(self) -> list[Node]:
        out: list[Node] = []
        _collect_leaves(self.root, out)
        return out


def _collect_leaves(node: Node, out: list[Node]) -> None:
    if node.is_leaf:
        out.append(node)
    else:
        _collect_leaves(node.left, out)
        _collect_leaves(node.right, out)


def avg_centroid_distance(points: np.ndarray) -> float:
    """Mean L2 distance from the set's centroid to its members (0 if singleton)."""
    if points.shape[0] <= 1:
        return 0.0
    centroid = points.mean(axis=0)
    return float(np.linalg.norm(points - centroid, axis=1).mean())


def split_score(points: np.ndarray, b: Boundary) -> float:
    """Drop in size-weighted average centroid distance induced by `b`.

    Undefined (raises) when either side of the partition is empty.
    """
    left = points[:, b.feature] < b.value
    nl = int(left.sum())
    nr = points.shape[0] - nl
    if nl == 0 or nr == 0:
        raise ValueError(f"boundary {b} puts every point on one side")
    delta = avg_centroid_distance(points)
    dl = avg_centroid_distance(points[left])
    dr = avg_centroid_distance(points[~left])
    n = points.shape[0]
    return delta - (nl / n * dl + nr / n * dr)


def split_reward(points: np.ndarray, b: Boundary, schedule: CostSchedule,
                 alpha: float, path_used: frozenset[int] | set[int] = frozenset()) -> float:
    """Split score discounted by the scaled cost; path features cost nothing."""
    cost = 0.0 if b.feature in path_used else float(schedule.costs[b.feature])
    return (1.0 - alpha * cost) * split_score(points, b)


def candidate_values(col: np.ndarray, ell: int) -> np.ndarray:
    """`ell` evenly spaced interior thresholds over the column's local range.

    Endpoints are excluded since thresholds at the extremes create an empty
    partition.
    """
    lo = float(col.min())
    hi = float(col.max())
    if hi <= lo:
        return np.empty(0)
    return np.linspace(lo, hi, ell + 2)[1:-1]


def _best_boundary(points: np.ndarray, schedule: CostSchedule, params: TreeParams,
                   path_used: frozenset[int]):
    """Max-reward boundary at a node, or None if no candidate has reward > 0.

    Reward ties break toward the largest margin (distance from the threshold
    to the nearest point along the split feature), then the lower feature
    index and lower threshold.  Mid-gap thresholds generalize better to
    unseen queries than the first tied candidate would.
    """
    n = points.shape[0]
    delta = avg_centroid_distance(points)
    best_reward = 0.0
    best = None
    best_margin = -1.0
    for f in range(points.shape[1]):
        reused = f in path_used
        if reused and not params.reuse_features:
            continue
        cost_factor = 1.0 - params.alpha * (0.0 if reused else float(schedule.costs[f]))
        col = points[:, f]
        for v in candidate_values(col, params.ell):
            left = col < v
            nl = int(left.sum())
            if nl == 0 or nl == n:
                continue
            dl = avg_centroid_distance(points[left])
            dr = avg_centroid_distance(points[~left])
            reward = cost_factor * (delta - (nl / n * dl + (n - nl) / n * dr))
            if reward <= 0.0 or reward < best_reward:
                continue
            if reward > best_reward:
                best_reward = reward
                best = Boundary(f, float(v))
                best_margin = float(np.abs(col - v).min())
            else:  # exact tie: prefer the better-separated threshold
                margin = float(np.abs(col - v).min())
                if margin > best_margin:
                    best = Boundary(f, float(v))
                    best_margin = margin
    return best


def build(train, schedule: CostSchedule, params: TreeParams = TreeParams()) -> CBCTree:
    """Recursive induction: stop at tau points or when no split has reward > 0."""
    rows = train.rows if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    if rows.shape[0] < 1:
        raise ValueError("cannot build a tree from an empty dataset")

    def grow(indices: np.ndarray, path_used: frozenset[int]) -> Node:
        points = rows[indices]
        node = Node(point_indices=indices,
                    centroid=points.mean(axis=0),
                    avg_dist=avg_centroid_distance(points))
        if indices.shape[0] <= params.tau:
            return node
        b = _best_boundary(points, schedule, params, path_used)
        if b is None:
            return node
        left = points[:, b.feature] < b.value
        node.boundary = b
        used = path_used | {b.feature}
        node.left = grow(indices[left], used)
        node.right = grow(indices[~left], used)
        return node

    tree = CBCTree(root=grow(np.arange(rows.shape[0]), frozenset()),
                   rows=np.ascontiguousarray(rows, dtype=float), params=params)
    _assign_ids(tree.root, 0)
    return tree


def _assign_ids(node: Node, next_id: int) -> int:
    node.node_id = next_id
    next_id += 1
    if not node.is_leaf:
        next_id = _assign_ids(node.left, next_id)
        next_id = _assign_ids(node.right, next_id)
    return next_id


def _descend(node: Node, p) -> Node:
    return node.left if p[node.boundary.feature] < node.boundary.value else node.right


def reachable_with_feature(tree: CBCTree, p, revealed, f: int) -> list[Node]:
    """Nodes reachable knowing `revealed` plus a hypothetical reveal of `f`.

    Known boundaries are followed, boundaries on `f` fan out to both sides,
    and any other unknown boundary stops the walk, collecting that node
    (internal nodes included).
    """
    known = set(revealed)
    out: list[Node] = []

    def walk(node: Node) -> None:
        if node.is_leaf:
            out.append(node)
        elif node.boundary.feature in known:
            walk(_descend(node, p))
        elif node.boundary.feature == f:
            walk(node.left)
            walk(node.right)
        else:
            out.append(node)

    walk(tree.root)
    return out


def reachable_all(tree: CBCTree, p, revealed) -> list[Node]:
    """All leaves the partial point could fall into (every unknown boundary
    fans out), in left-to-right tree order."""
    known = set(revealed)
    out: list[Node] = []

    def walk(node: Node) -> None:
        if node.is_leaf:
            out.append(node)
        elif node.boundary.feature in known:
            walk(_descend(node, p))
        else:
            walk(node.left)
            walk(node.right)

    walk(tree.root)
    return out


def similarity(node: Node, p, revealed, rows: np.ndarray, total_size: int) -> float:
    """Reciprocal of the size-weighted sum of partial distances to the node's
    points; the denominator is floored at a small epsilon so exact matches
    and empty revealed sets yield a large, finite score."""
    dist_sum = float(partial_distances(np.asarray(p, dtype=float),
                                       rows[node.point_indices], revealed).sum())
    weighted = (node.size / total_size) * dist_sum
    return 1.0 / max(weighted, SIMILARITY_EPS)


def similarity_scores(nodes: list[Node], p, revealed, rows: np.ndarray) -> np.ndarray:
    total = sum(n.size for n in nodes)
    return np.array([similarity(n, p, revealed, rows, total) for n in nodes])


def suggest(tree: CBCTree, p, revealed, schedule: CostSchedule,
            budget_left: float) -> Action:
    """Next action: the first unknown split feature on the walk from the root.

    If that feature is unaffordable, fall back to the affordable unknown
    feature with the highest expected similarity over its reachable nodes;
    terminate when the walk hits a leaf or nothing is affordable.
    """
    known = set(revealed)
    node = tree.root
    while not node.is_leaf and node.boundary.feature in known:
        node = _descend(node, p)
    if node.is_leaf:
        return TERMINATE

    first_unknown = node.boundary.feature
    if schedule.costs[first_unknown] <= budget_left:
        return Action(first_unknown)

    n = tree.rows.shape[1]
    affordable = [f for f in range(n)
                  if f not in known and schedule.costs[f] <= budget_left]
    if not affordable:
        return TERMINATE
    best_f = None
    best_total = -np.inf
    for f in affordable:
        nodes = reachable_with_feature(tree, p, revealed, f)
        total = float(similarity_scores(nodes, p, revealed, tree.rows).sum())
        if total > best_total:
            best_total = total
            best_f = f
    return Action(best_f)


def predict_cluster(tree: CBCTree, p, revealed) -> Node:
    """Candidate leaf with the highest similarity score; ties prefer the
    larger leaf, then the leftmost in tree order."""
    nodes = reachable_all(tree, p, revealed)
    scores = similarity_scores(nodes, p, revealed, tree.rows)
    best = nodes[0]
    best_key = (scores[0], nodes[0].size)
    for node, s in zip(nodes[1:], scores[1:]):
        key = (s, node.size)
        if key > best_key:
            best = node
            best_key = key
    return best


def _node_to_dict(node: Node) -> dict:
    if node.is_leaf:
        return {"leaf": True, "points": node.point_indices.tolist()}
    return {"leaf": False,
            "feature": node.boundary.feature,
            "value": node.boundary.value,
            "left": _node_to_dict(node.left),
            "right": _node_to_dict(node.right)}


def _node_from_dict(doc: dict, rows: np.ndarray) -> Node:
    if doc["leaf"]:
        idx = np.asarray(doc["points"], dtype=int)
        pts = rows[idx]
        return Node(point_indices=idx, centroid=pts.mean(axis=0),
                    avg_dist=avg_centroid_distance(pts))
    left = _node_from_dict(doc["left"], rows)
    right = _node_from_dict(doc["right"], rows)
    idx = np.concatenate([left.point_indices, right.point_indices])
    pts = rows[idx]
    return Node(point_indices=idx, centroid=pts.mean(axis=0),
                avg_dist=avg_centroid_distance(pts),
                boundary=Boundary(int(doc["feature"]), float(doc["value"])),
                left=left, right=right)


def save_tree(tree: CBCTree, path: str, extra: dict | None = None) -> None:
    doc = {"version": 1,
           "params": {"tau": tree.params.tau, "alpha": tree.params.alpha,
                      "ell": tree.params.ell,
                      "reuse_features": tree.params.reuse_features},
           "root": _node_to_dict(tree.root)}
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_tree(path: str, rows: np.ndarray) -> CBCTree:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "root" not in doc or "params" not in doc:
        raise ValueError(f"{path}: not a tree file")
    rows = np.ascontiguousarray(rows, dtype=float)
    params = TreeParams(**doc["params"])
    tree = CBCTree(root=_node_from_dict(doc["root"], rows), rows=rows, params=params)
    _assign_ids(tree.root, 0)
    return tree


def format_tree(tree: CBCTree, feature_names: list[str] | None = None) -> str:
    """Indented boundary/leaf rendering of the whole tree."""
    names = feature_names or [f"f{j}" for j in range(tree.rows.shape[1])]
    lines: list[str] = []

    def render(node: Node, depth: int) -> None:
        pad = "  " * depth
        if node.is_leaf:
            lines.append(f"{pad}leaf #{node.node_id}: {node.size} points, "
                         f"avg_dist={node.avg_dist:.4f}")
        else:
            b = node.boundary
            lines.append(f"{pad}[{names[b.feature]} < {b.value:.6g}] (n={node.size})")
            render(node.left, depth + 1)
            render(node.right, depth + 1)

    render(tree.root, 0)
    return "\n".join(lines)
