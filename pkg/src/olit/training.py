"""End-to-end model training: windowed logistic models plus the early
(weeks 1-5) and late (weeks 5-8) decision trees, packed into a bundle."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .balance import SmoteConfig, SmoteOrder, balance_and_split
from .bundle import FORMAT_VERSION, ModelBundle
from .carttree import CartConfig, CartTree, fit_cart, predict_leaf
from .errors import EmptyFeatureSetError
from .experiment import LrSettings, WindowResult, accuracy
from .ingest import (
    UNGRADED,
    CourseCalendar,
    FeatureMatrix,
    WindowSubset,
    select_window,
)
from .linmodel import SoftmaxModel, fit_logreg

EARLY_WINDOW = (1, 5)
LATE_WINDOW = (5, 8)


@dataclass(frozen=True)
class TreeDiagnostics:
    train_accuracy: float
    test_accuracy: float
    n_features: int


@dataclass(frozen=True)
class TrainResult:
    bundle: ModelBundle
    early: TreeDiagnostics
    late: TreeDiagnostics
    lr_converged: Optional[int] = None  # cells converged, None when LR skipped
    lr_total: Optional[int] = None


@dataclass(frozen=True)
class TrainSettings:
    seed: int = 42
    smote_order: SmoteOrder = "paper"
    smote_k: int = 5
    train_fraction: float = 0.8
    cart: CartConfig = CartConfig()
    lr: LrSettings = LrSettings()
    include_lr: bool = True

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "smote_order": self.smote_order,
            "smote_k": self.smote_k,
            "train_fraction": self.train_fraction,
            "cart": {
                "max_depth": self.cart.max_depth,
                "min_samples_split": self.cart.min_samples_split,
                "min_impurity_decrease": self.cart.min_impurity_decrease,
            },
            "lr": {
                "l2_lambda": self.lr.l2_lambda,
                "tol": self.lr.tol,
                "max_iters": self.lr.max_iters,
            },
            "include_lr": self.include_lr,
            "early_window": list(EARLY_WINDOW),
            "late_window": list(LATE_WINDOW),
        }


def drop_ungraded(m: FeatureMatrix) -> FeatureMatrix:
    """Remove rows without a grade label; they cannot train or score."""
    keep = [i for i, lab in enumerate(m.labels) if lab != UNGRADED]
    if len(keep) < m.n_students:
        warnings.warn(
            f"dropping {m.n_students - len(keep)} student(s) without grade rows",
            stacklevel=2,
        )
        return m.take(keep)
    return m


def _fit_window_tree(
    m: FeatureMatrix, window: tuple[int, int], settings: TrainSettings
) -> tuple[CartTree, TreeDiagnostics]:
    selected = select_window(
        m, upto_week=window[1], subset=WindowSubset.BOTH, from_week=window[0]
    )
    train, test, _ = balance_and_split(
        selected,
        SmoteConfig(k_neighbors=settings.smote_k, seed=settings.seed),
        settings.smote_order,
        settings.train_fraction,
        split_seed=settings.seed,
    )
    tree = fit_cart(train, settings.cart)
    train_acc = accuracy(
        [predict_leaf(tree, row).majority_class for row in train.values],
        list(train.labels),
    )
    test_acc = accuracy(
        [predict_leaf(tree, row).majority_class for row in test.values],
        list(test.labels),
    )
    return tree, TreeDiagnostics(train_acc, test_acc, selected.n_features)


def _fit_window_models(
    m: FeatureMatrix, settings: TrainSettings, n_weeks: int
) -> tuple[dict[str, SoftmaxModel], list[WindowResult]]:
    """The window grid, keeping the fitted model of every cell."""
    models: dict[str, SoftmaxModel] = {}
    results: list[WindowResult] = []
    smote_cfg = SmoteConfig(k_neighbors=settings.smote_k, seed=settings.seed)
    for week in range(1, n_weeks + 1):
        for subset in (WindowSubset.GRADES_ONLY, WindowSubset.LOGS_ONLY, WindowSubset.BOTH):
            try:
                windowed = select_window(m, week, subset)
            except EmptyFeatureSetError:
                results.append(WindowResult(week, subset, None, 0))
                continue
            train, test, _ = balance_and_split(
                windowed,
                smote_cfg,
                settings.smote_order,
                settings.train_fraction,
                split_seed=settings.seed,
            )
            model, report = fit_logreg(
                train,
                l2_lambda=settings.lr.l2_lambda,
                tol=settings.lr.tol,
                max_iters=settings.lr.max_iters,
            )
            from .linmodel import predict_classes

            acc = accuracy(predict_classes(model, test.values), list(test.labels))
            models[f"week{week}:{subset.value}"] = model
            results.append(
                WindowResult(week, subset, acc, windowed.n_features, report.converged)
            )
    return models, results


def train_bundle(
    m: FeatureMatrix,
    calendar: CourseCalendar,
    settings: TrainSettings = TrainSettings(),
    normalization_maxima: Optional[dict[str, float]] = None,
) -> TrainResult:
    """Train everything the service needs and pack it into a ModelBundle.

    The matrix must already be normalized; maxima default to the matrix's
    own record (all 1.0 when it was read back from a CSV export).
    """
    m = drop_ungraded(m)
    if normalization_maxima is None:
        if m.activity_maxima is not None:
            normalization_maxima = dict(zip(m.feature_names, m.activity_maxima))
        else:
            normalization_maxima = {name: 1.0 for name in m.feature_names}

    tree_early, early_diag = _fit_window_tree(m, EARLY_WINDOW, settings)
    tree_late, late_diag = _fit_window_tree(m, LATE_WINDOW, settings)

    lr_models = None
    window_results = None
    lr_converged = lr_total = None
    if settings.include_lr:
        lr_models, window_results = _fit_window_models(m, settings, calendar.n_weeks)
        fitted = [r for r in window_results if not r.no_features]
        lr_converged = sum(1 for r in fitted if r.converged)
        lr_total = len(fitted)

    config = settings.as_dict()
    config_hash = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")
    ).hexdigest()
    bundle = ModelBundle(
        calendar=calendar,
        feature_names=m.feature_names,
        normalization_maxima=normalization_maxima,
        classes=tuple(int(c) for c in np.unique(m.labels)),
        tree_early=tree_early,
        tree_late=tree_late,
        lr_models=lr_models,
        window_results=window_results,
        metadata={"settings": config, "config_hash": config_hash},
        format_version=FORMAT_VERSION,
    )
    return TrainResult(
        bundle=bundle,
        early=early_diag,
        late=late_diag,
        lr_converged=lr_converged,
        lr_total=lr_total,
    )
