"""CART classification tree: binary threshold splits minimizing Gini impurity.

Split convention is `value < threshold` to the left, `value >= threshold` to
the right.  Candidate thresholds are midpoints between consecutive distinct
sorted values; ties break on (lower feature index, lower threshold) so a fit
is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyHistogramError,
    EmptyTrainingSetError,
    InvalidConfigError,
)
from .ingest import FeatureMatrix

LT = "<"
GE = ">="


@dataclass(frozen=True)
class CartConfig:
    max_depth: int = 5
    min_samples_split: int = 2
    min_impurity_decrease: float = 0.0
    seed: int = 0  # unused; kept for interface symmetry with other models

    def __post_init__(self):
        if self.max_depth < 1:
            raise InvalidConfigError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise InvalidConfigError("min_samples_split must be >= 2")
        if self.min_impurity_decrease < 0:
            raise InvalidConfigError("min_impurity_decrease must be >= 0")


@dataclass(frozen=True)
class Leaf:
    class_histogram: dict[int, int]
    majority_class: int
    support: int


@dataclass(frozen=True)
class Internal:
    feature_index: int
    feature_name: str
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class Condition:
    """One threshold test on the path to a leaf."""

    feature_index: int
    feature_name: str
    op: str  # LT or GE
    threshold: float

    def holds(self, value: float) -> bool:
        return value < self.threshold if self.op == LT else value >= self.threshold

    def __str__(self) -> str:
        return f"{self.feature_name} {self.op} {self.threshold:g}"


@dataclass(frozen=True)
class CartTree:
    root: TreeNode
    feature_names: tuple[str, ...]
    classes: tuple[int, ...]
    config: CartConfig

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []

        def walk(node: TreeNode):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out


@dataclass(frozen=True)
class LeafPrediction:
    majority_class: int
    leaf: Leaf
    conditions: tuple[Condition, ...]


def gini(histogram: Mapping[int, int]) -> float:
    """Gini impurity 1 - sum(p_c^2) of a class-count histogram."""
    total = sum(histogram.values())
    if total < 1:
        raise EmptyHistogramError("histogram has no samples")
    acc = 0.0
    for c in sorted(histogram):
        p = histogram[c] / total
        acc += p * p
    return 1.0 - acc


def _gini_counts(counts: np.ndarray, total: int) -> float:
    acc = 0.0
    for cnt in counts:
        p = cnt / total
        acc += p * p
    return 1.0 - acc


def best_split(
    rows: np.ndarray, labels: np.ndarray
) -> Optional[tuple[int, float, float]]:
    """Exhaustive threshold search maximizing weighted Gini decrease.

    Returns (feature_index, threshold, impurity_decrease) or None when no
    candidate strictly reduces impurity.  Candidates are midpoints between
    consecutive distinct sorted values per feature.
    """
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    n, d = rows.shape
    if n < 2:
        return None
    classes, y = np.unique(labels, return_inverse=True)
    C = len(classes)
    total_counts = np.bincount(y, minlength=C)
    parent = _gini_counts(total_counts, n)

    best: Optional[tuple[int, float, float]] = None
    for f in range(d):
        order = np.argsort(rows[:, f], kind="stable")
        vals = rows[order, f]
        ys = y[order]
        left = np.zeros(C, dtype=int)
        for i in range(1, n):
            left[ys[i - 1]] += 1
            if vals[i] == vals[i - 1]:
                continue
            threshold = (vals[i - 1] + vals[i]) / 2.0
            right = total_counts - left
            n_left = i
            n_right = n - i
            weighted = (
                n_left * _gini_counts(left, n_left)
                + n_right * _gini_counts(right, n_right)
            ) / n
            decrease = parent - weighted
            if best is None or decrease > best[2]:
                best = (f, float(threshold), float(decrease))
    if best is None or best[2] <= 0.0:
        return None
    return best


def _histogram(labels: np.ndarray) -> dict[int, int]:
    values, counts = np.unique(labels, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def _majority(histogram: dict[int, int]) -> int:
    top = max(histogram.values())
    return min(c for c, cnt in histogram.items() if cnt == top)


def _make_leaf(labels: np.ndarray) -> Leaf:
    hist = _histogram(labels)
    return Leaf(class_histogram=hist, majority_class=_majority(hist), support=len(labels))


def fit_cart(train: FeatureMatrix, cfg: CartConfig = CartConfig()) -> CartTree:
    """Recursive partitioning until depth, size, purity or gain limits."""
    if train.n_students < 1:
        raise EmptyTrainingSetError("no training rows")
    X = train.values
    y = train.labels
    names = train.feature_names

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        sub_y = y[idx]
        if (
            depth >= cfg.max_depth
            or len(idx) < cfg.min_samples_split
            or len(np.unique(sub_y)) == 1
        ):
            return _make_leaf(sub_y)
        found = best_split(X[idx], sub_y)
        if found is None or found[2] <= cfg.min_impurity_decrease:
            return _make_leaf(sub_y)
        f, threshold, _ = found
        mask = X[idx, f] < threshold
        left_idx = idx[mask]
        right_idx = idx[~mask]
        return Internal(
            feature_index=f,
            feature_name=names[f],
            threshold=threshold,
            left=build(left_idx, depth + 1),
            right=build(right_idx, depth + 1),
        )

    root = build(np.arange(train.n_students), 0)
    classes = tuple(int(c) for c in np.unique(y))
    return CartTree(root=root, feature_names=names, classes=classes, config=cfg)


def predict_leaf(tree: CartTree, row: np.ndarray) -> LeafPrediction:
    """Route a row to its leaf; also returns the root-to-leaf conditions."""
    row = np.asarray(row, dtype=float)
    if row.shape != (len(tree.feature_names),):
        raise DimensionMismatchError(len(tree.feature_names), row.shape[-1] if row.ndim else 0)
    node = tree.root
    conditions: list[Condition] = []
    while isinstance(node, Internal):
        if row[node.feature_index] < node.threshold:
            conditions.append(
                Condition(node.feature_index, node.feature_name, LT, node.threshold)
            )
            node = node.left
        else:
            conditions.append(
                Condition(node.feature_index, node.feature_name, GE, node.threshold)
            )
            node = node.right
    return LeafPrediction(
        majority_class=node.majority_class, leaf=node, conditions=tuple(conditions)
    )


def tree_depth(tree: CartTree) -> int:
    def depth(node: TreeNode) -> int:
        if isinstance(node, Leaf):
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    return depth(tree.root)


def node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {
            "histogram": {str(c): n for c, n in sorted(node.class_histogram.items())},
            "majority_class": node.majority_class,
            "support": node.support,
        }
    return {
        "feature": node.feature_index,
        "feature_name": node.feature_name,
        "threshold": node.threshold,
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(data: dict) -> TreeNode:
    if "histogram" in data:
        hist = {int(c): int(n) for c, n in data["histogram"].items()}
        return Leaf(
            class_histogram=hist,
            majority_class=int(data["majority_class"]),
            support=int(data["support"]),
        )
    return Internal(
        feature_index=int(data["feature"]),
        feature_name=data["feature_name"],
        threshold=float(data["threshold"]),
        left=node_from_dict(data["left"]),
        right=node_from_dict(data["right"]),
    )


def tree_to_dict(tree: CartTree) -> dict:
    return {
        "root": node_to_dict(tree.root),
        "feature_names": list(tree.feature_names),
        "classes": list(tree.classes),
        "config": {
            "max_depth": tree.config.max_depth,
            "min_samples_split": tree.config.min_samples_split,
            "min_impurity_decrease": tree.config.min_impurity_decrease,
            "seed": tree.config.seed,
        },
    }


def tree_from_dict(data: dict) -> CartTree:
    return CartTree(
        root=node_from_dict(data["root"]),
        feature_names=tuple(data["feature_names"]),
        classes=tuple(int(c) for c in data["classes"]),
        config=CartConfig(**data["config"]),
    )


def to_dot(tree: CartTree, title: str = "cart") -> str:
    """Graphviz DOT rendering in the style of the usual tree figures."""
    lines = [f'digraph "{title}" {{', "  node [shape=box, fontname=Helvetica];"]
    counter = [0]

    def emit(node: TreeNode) -> int:
        nid = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            hist = ", ".join(f"{c}: {n}" for c, n in sorted(node.class_histogram.items()))
            lines.append(
                f'  n{nid} [label="grade {node.majority_class}\\n{hist}\\nn={node.support}"];'
            )
        else:
            lines.append(f'  n{nid} [label="{node.feature_name} < {node.threshold:g}"];')
            left = emit(node.left)
            lines.append(f'  n{nid} -> n{left} [label="yes"];')
            right = emit(node.right)
            lines.append(f'  n{nid} -> n{right} [label="no"];')
        return nid

    emit(tree.root)
    lines.append("}")
    return "\n".join(lines)
