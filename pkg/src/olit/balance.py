"""Class balancing: SMOTE oversampling and seeded stratified splitting.

Synthetic rows are convex combinations of a minority sample and one of its
k nearest same-class neighbours; full provenance is kept so tests can
reconstruct every synthetic row exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ClassTooSmallError, InvalidConfigError
from .ingest import FeatureMatrix

SmoteOrder = Literal["paper", "train-only"]


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_count: int | None = None  # None: raise every class to the majority count
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise InvalidConfigError("k_neighbors must be >= 1")


@dataclass(frozen=True)
class SyntheticProvenance:
    """How one synthetic row was produced: row = parent + lam * (neighbor - parent)."""

    parent_index: int
    neighbor_index: int
    lam: float
    label: int


def _class_indices(labels: np.ndarray) -> dict[int, np.ndarray]:
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def _nearest_same_class(values: np.ndarray, rows: np.ndarray, k: int) -> dict[int, np.ndarray]:
    """For each row index in `rows`, the k nearest other rows of `rows` by
    Euclidean distance, ties broken by lower row index."""
    sub = values[rows]
    # pairwise squared distances within the class
    sq = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=2)
    neighbors = {}
    for i, ri in enumerate(rows):
        order = np.argsort(sq[i], kind="stable")  # stable sort = low-index tie-break
        order = order[order != i][:k]
        neighbors[int(ri)] = rows[order]
    return neighbors


def smote(
    m: FeatureMatrix, cfg: SmoteConfig
) -> tuple[FeatureMatrix, list[SyntheticProvenance]]:
    """Raise every class count to the target (majority count by default).

    Original rows are preserved verbatim and first; synthetic rows cycle
    through the class's rows as parents, interpolating toward one of the k
    nearest same-class neighbours with lambda ~ U[0,1].
    """
    per_class = _class_indices(m.labels)
    counts = {c: len(idx) for c, idx in per_class.items()}
    target = cfg.target_count if cfg.target_count is not None else max(counts.values())
    if cfg.target_count is not None and cfg.target_count < max(counts.values()):
        raise InvalidConfigError(
            f"target_count {cfg.target_count} below majority count {max(counts.values())}"
        )
    for c in sorted(per_class):
        if counts[c] < 2:
            raise ClassTooSmallError(c, counts[c], 2)

    rng = np.random.default_rng(cfg.seed)
    new_rows: list[np.ndarray] = []
    new_labels: list[int] = []
    new_ids: list[str] = []
    provenance: list[SyntheticProvenance] = []
    for c in sorted(per_class):
        rows = per_class[c]
        needed = target - counts[c]
        if needed <= 0:
            continue
        k = min(cfg.k_neighbors, counts[c] - 1)
        if k < cfg.k_neighbors:
            warnings.warn(
                f"class {c}: k_neighbors clamped to {k} (class size {counts[c]})",
                stacklevel=2,
            )
        neighbors = _nearest_same_class(m.values, rows, k)
        for i in range(needed):
            parent = int(rows[i % counts[c]])
            neighbor = int(neighbors[parent][rng.integers(len(neighbors[parent]))])
            lam = float(rng.uniform())
            row = m.values[parent] + lam * (m.values[neighbor] - m.values[parent])
            new_rows.append(row)
            new_labels.append(c)
            new_ids.append(f"syn_{c}_{i:04d}")
            provenance.append(SyntheticProvenance(parent, neighbor, lam, c))
    if not new_rows:
        return m, []
    balanced = m.append_rows(np.vstack(new_rows), new_labels, new_ids)
    return balanced, provenance


def stratified_split(
    m: FeatureMatrix, train_fraction: float = 0.8, seed: int = 0
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Per-class shuffled split preserving proportions within one sample.

    Both sides keep at least one row of every class.  Deterministic for a
    fixed seed; the partition depends only on the label vector, never on
    feature values.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidConfigError("train_fraction must lie strictly between 0 and 1")
    per_class = _class_indices(m.labels)
    for c in sorted(per_class):
        if len(per_class[c]) < 2:
            raise ClassTooSmallError(c, len(per_class[c]), 2)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in sorted(per_class):
        rows = per_class[c]
        perm = rng.permutation(len(rows))
        n_train = int(round(len(rows) * train_fraction))
        n_train = min(max(n_train, 1), len(rows) - 1)
        ordered = rows[perm]
        train_idx.extend(int(i) for i in ordered[:n_train])
        test_idx.extend(int(i) for i in ordered[n_train:])
    train_idx.sort()
    test_idx.sort()
    return m.take(train_idx), m.take(test_idx)


def balance_and_split(
    m: FeatureMatrix,
    smote_cfg: SmoteConfig,
    order: SmoteOrder,
    train_fraction: float = 0.8,
    split_seed: int = 0,
) -> tuple[FeatureMatrix, FeatureMatrix, list[SyntheticProvenance]]:
    """Apply SMOTE and the train/test split in the configured order.

    "paper": oversample the full dataset, then split (synthetic neighbours
    can leak across the split).  "train-only": split first, then oversample
    the training side only.
    """
    if order == "paper":
        balanced, prov = smote(m, smote_cfg)
        train, test = stratified_split(balanced, train_fraction, split_seed)
        return train, test, prov
    if order == "train-only":
        train_raw, test = stratified_split(m, train_fraction, split_seed)
        train, prov = smote(train_raw, smote_cfg)
        return train, test, prov
    raise InvalidConfigError(f"unknown smote order {order!r}")
