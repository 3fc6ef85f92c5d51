"""Softmax regression: probability identities, gradient correctness against
central finite differences, optimizer behaviour and determinism."""

from __future__ import annotations

import math

import numpy as np
import pytest

from olit.errors import DimensionMismatchError, SingleClassError
from olit.linmodel import (
    SoftmaxModel,
    fit_logreg,
    nll_and_gradient,
    predict_class,
    predict_classes,
    predict_proba,
)
from conftest import random_matrix


def make_model(classes, weights, bias, names=None):
    weights = np.asarray(weights, dtype=float)
    names = names or tuple(f"Week1 Stat{i}" for i in range(weights.shape[1]))
    return SoftmaxModel(
        classes=tuple(classes),
        weights=weights,
        bias=np.asarray(bias, dtype=float),
        feature_names=tuple(names),
        l2_lambda=0.0,
    )


# ------------------------------------------------------------ probability


def test_zero_model_is_uniform():
    model = make_model([0, 2, 3], np.zeros((3, 2)), np.zeros(3))
    proba = predict_proba(model, np.array([0.4, 0.9]))
    assert proba == pytest.approx([1 / 3] * 3, abs=1e-12)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    weights = rng.normal(size=(4, 3))
    model = make_model([0, 2, 3, 5], weights, rng.normal(size=4))
    shifted = make_model([0, 2, 3, 5], weights, model.bias + 7.3)
    row = rng.uniform(size=3)
    assert predict_proba(model, row) == pytest.approx(
        predict_proba(shifted, row), abs=1e-12
    )


def test_ln2_bias_gives_half_quarter_quarter():
    # softmax(ln2, 0, 0) = (2, 1, 1) / 4
    model = make_model([0, 1, 2], np.zeros((3, 2)), [math.log(2.0), 0.0, 0.0])
    proba = predict_proba(model, np.zeros(2))
    assert proba == pytest.approx([0.5, 0.25, 0.25], abs=1e-12)


def test_probabilities_sum_to_one_with_extreme_logits():
    model = make_model([0, 1], np.array([[1000.0], [-1000.0]]), [0.0, 0.0])
    proba = predict_proba(model, np.array([1.0]))
    assert np.isfinite(proba).all()
    assert abs(proba.sum() - 1.0) < 1e-9


def test_predict_class_tie_breaks_low_label():
    model = make_model([0, 2, 3], np.zeros((3, 2)), np.zeros(3))
    assert predict_class(model, np.array([0.1, 0.2])) == 0


def test_predict_class_argmax():
    # bias chosen so proba is exactly (0.1, 0.7, 0.2)
    bias = np.log([0.1, 0.7, 0.2])
    model = make_model([2, 3, 4], np.zeros((3, 1)), bias)
    assert predict_class(model, np.array([0.0])) == 3


def test_predict_class_matches_argmax_fuzz():
    rng = np.random.default_rng(1)
    model = make_model([0, 2, 5], rng.normal(size=(3, 4)), rng.normal(size=3))
    for _ in range(200):
        row = rng.uniform(size=4)
        proba = predict_proba(model, row)
        assert predict_class(model, row) == model.classes[int(np.argmax(proba))]
    X = rng.uniform(size=(50, 4))
    batch = predict_classes(model, X)
    assert list(batch) == [predict_class(model, row) for row in X]


def test_dimension_mismatch():
    model = make_model([0, 1], np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(DimensionMismatchError):
        predict_proba(model, np.zeros(2))


# --------------------------------------------------------------- gradient


def finite_difference_gradient(params, X, Y, lam, step=1e-5):
    grad = np.zeros_like(params)
    for i in range(len(params)):
        hi = params.copy()
        lo = params.copy()
        hi[i] += step
        lo[i] -= step
        f_hi, _ = nll_and_gradient(hi, X, Y, lam)
        f_lo, _ = nll_and_gradient(lo, X, Y, lam)
        grad[i] = (f_hi - f_lo) / (2 * step)
    return grad


@pytest.mark.parametrize("shape_seed", [0, 1, 2, 3, 4])
def test_gradient_matches_finite_differences(shape_seed):
    rng = np.random.default_rng(shape_seed)
    n = int(rng.integers(5, 30))
    d = int(rng.integers(1, 8))
    C = int(rng.integers(2, 5))
    X = rng.normal(size=(n, d))
    Y = np.zeros((n, C))
    Y[np.arange(n), rng.integers(0, C, size=n)] = 1.0
    lam = float(rng.uniform(0, 0.1))
    for point in range(5):
        params = rng.normal(scale=0.5, size=C * d + C)
        _, analytic = nll_and_gradient(params, X, Y, lam)
        numeric = finite_difference_gradient(params, X, Y, lam)
        denom = max(np.max(np.abs(numeric)), 1e-8)
        rel = np.max(np.abs(analytic - numeric)) / denom
        assert rel < 1e-5, f"shape seed {shape_seed}, point {point}: rel err {rel}"


# -------------------------------------------------------------- training


def separable_matrix(rng, n=200):
    # single feature, label is the sign bucket of the feature
    x = np.concatenate([rng.uniform(0.05, 1.0, n // 2), rng.uniform(-1.0, -0.05, n // 2)])
    labels = (x > 0).astype(int)
    order = rng.permutation(n)
    return _matrix_1d(x[order], labels[order])


def _matrix_1d(x, labels):
    from olit.ingest import FeatureMatrix

    return FeatureMatrix(
        feature_names=("Week1 Stat0",),
        values=np.asarray(x, dtype=float).reshape(-1, 1),
        labels=np.asarray(labels, dtype=int),
        student_ids=tuple(f"r{i}" for i in range(len(x))),
    )


def brute_force_threshold_accuracy(x, labels):
    """Best single-threshold classifier; independent check of separability."""
    best = 0.0
    for t in np.unique(x):
        for sign in (1, -1):
            pred = (sign * (x >= t)).astype(int) if sign == 1 else (x < t).astype(int)
            best = max(best, float(np.mean(pred == labels)))
    return best


def test_separable_data_trains_to_high_accuracy():
    rng = np.random.default_rng(7)
    m = separable_matrix(rng)
    x = m.values[:, 0]
    assert brute_force_threshold_accuracy(x, m.labels) == 1.0  # oracle: separable
    model, report = fit_logreg(m, l2_lambda=1e-4)
    train_acc = float(np.mean(predict_classes(model, m.values) == m.labels))
    assert train_acc >= 0.99
    assert report.converged


def test_nll_history_non_increasing():
    rng = np.random.default_rng(8)
    m = random_matrix(rng, 60, 4, rng.integers(0, 3, size=60))
    _, report = fit_logreg(m)
    history = report.nll_history
    assert len(history) >= 2
    for prev, cur in zip(history, history[1:]):
        assert cur <= prev + 1e-12


def test_fit_is_row_order_invariant():
    rng = np.random.default_rng(9)
    labels = rng.integers(0, 3, size=40)
    m = random_matrix(rng, 40, 3, labels)
    shuffled = m.take(list(rng.permutation(40)))
    model_a, _ = fit_logreg(m)
    model_b, _ = fit_logreg(shuffled)
    assert np.array_equal(model_a.weights, model_b.weights)
    assert np.array_equal(model_a.bias, model_b.bias)


def test_fit_deterministic():
    rng = np.random.default_rng(10)
    m = random_matrix(rng, 50, 4, rng.integers(0, 4, size=50))
    a, _ = fit_logreg(m)
    b, _ = fit_logreg(m)
    assert np.array_equal(a.weights, b.weights)


def test_feature_scaling_identity_on_logits():
    # scaling a column by s and its weights by 1/s leaves logits unchanged
    rng = np.random.default_rng(11)
    W = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    row = rng.uniform(size=4)
    s = 37.5
    W_scaled = W.copy()
    W_scaled[:, 2] /= s
    row_scaled = row.copy()
    row_scaled[2] *= s
    assert W_scaled @ row_scaled + b == pytest.approx(W @ row + b, abs=1e-12)


def test_single_class_rejected():
    rng = np.random.default_rng(12)
    m = random_matrix(rng, 10, 2, [3] * 10)
    with pytest.raises(SingleClassError):
        fit_logreg(m)


def test_fit_report_fields():
    rng = np.random.default_rng(13)
    m = random_matrix(rng, 30, 3, rng.integers(0, 2, size=30))
    model, report = fit_logreg(m, tol=1e-6, max_iters=500)
    assert report.iterations <= 500
    assert report.final_nll == report.nll_history[-1] or report.final_nll <= report.nll_history[0]
    if report.converged:
        assert report.final_gradient_norm <= 1e-6
    assert model.classes == (0, 1)
