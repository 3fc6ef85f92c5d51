"""Multinomial (softmax) logistic regression.

Penalized maximum likelihood: mean negative log-likelihood plus an L2 ridge
on the weights (bias unpenalized), minimized with L-BFGS-B from a zero
start.  The loss and analytic gradient live here; tests check the gradient
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DimensionMismatchError,
    NonFiniteLossError,
    SingleClassError,
)
from .ingest import FeatureMatrix


@dataclass(frozen=True)
class SoftmaxModel:
    classes: tuple[int, ...]
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    feature_names: tuple[str, ...]
    l2_lambda: float

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class FitReport:
    iterations: int
    final_nll: float
    final_gradient_norm: float
    converged: bool
    nll_history: tuple[float, ...] = ()


def _softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def nll_and_gradient(
    params: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray]:
    """Objective and gradient over the packed parameter vector.

    params = [weights.ravel(), bias]; Y is one-hot (n, C).
    """
    n, d = X.shape
    C = Y.shape[1]
    W = params[: C * d].reshape(C, d)
    b = params[C * d :]
    logits = X @ W.T + b
    log_p = _log_softmax(logits)
    loss = -float(np.sum(Y * log_p)) / n + 0.5 * l2_lambda * float(np.sum(W * W))
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"loss is {loss}")
    P = np.exp(log_p)
    diff = (P - Y) / n  # (n, C)
    grad_W = diff.T @ X + l2_lambda * W
    grad_b = diff.sum(axis=0)
    grad = np.concatenate([grad_W.ravel(), grad_b])
    if not np.all(np.isfinite(grad)):
        raise NonFiniteLossError("gradient has non-finite entries")
    return loss, grad


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sort rows by (label, features) so the fit is invariant to input
    row order, down to the last bit of float summation."""
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    return np.lexsort(keys)


def fit_logreg(
    train: FeatureMatrix,
    l2_lambda: float = 1e-4,
    tol: float = 1e-6,
    max_iters: int = 1000,
) -> tuple[SoftmaxModel, FitReport]:
    """Fit the softmax model on a feature matrix.

    Convergence means gradient max-norm <= tol; hitting max_iters is
    reported, not fatal.
    """
    classes = tuple(int(c) for c in np.unique(train.labels))
    if len(classes) < 2:
        raise SingleClassError(f"training labels are all {classes[0] if classes else '?'}")
    if train.n_features < 1:
        raise DimensionMismatchError(1, 0)

    order = _canonical_order(train.values, train.labels)
    X = np.ascontiguousarray(train.values[order])
    y = train.labels[order]
    C, d, n = len(classes), X.shape[1], X.shape[0]
    class_pos = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((n, C))
    Y[np.arange(n), [class_pos[int(v)] for v in y]] = 1.0

    history: list[float] = []

    def objective(params):
        return nll_and_gradient(params, X, Y, l2_lambda)

    def track(params):
        loss, _ = nll_and_gradient(params, X, Y, l2_lambda)
        history.append(loss)

    x0 = np.zeros(C * d + C)
    history.append(objective(x0)[0])
    result = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=track,
        options={"maxiter": max_iters, "gtol": tol, "ftol": 1e-17, "maxls": 50},
    )
    loss, grad = nll_and_gradient(result.x, X, Y, l2_lambda)
    grad_norm = float(np.max(np.abs(grad)))
    model = SoftmaxModel(
        classes=classes,
        weights=result.x[: C * d].reshape(C, d).copy(),
        bias=result.x[C * d :].copy(),
        feature_names=train.feature_names,
        l2_lambda=l2_lambda,
    )
    report = FitReport(
        iterations=int(result.nit),
        final_nll=loss,
        final_gradient_norm=grad_norm,
        converged=grad_norm <= tol,
        nll_history=tuple(history),
    )
    return model, report


def _check_row(model: SoftmaxModel, row: np.ndarray) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.shape[0] != model.n_features:
        raise DimensionMismatchError(model.n_features, row.shape[-1] if row.ndim else 0)
    if not np.all(np.isfinite(row)):
        raise NonFiniteLossError("feature vector has non-finite entries")
    return row


def predict_proba(model: SoftmaxModel, row: np.ndarray) -> np.ndarray:
    """Class probability vector for one feature row, ordered like model.classes."""
    row = _check_row(model, row)
    return _softmax(model.weights @ row + model.bias)


def predict_class(model: SoftmaxModel, row: np.ndarray) -> int:
    """Argmax grade label; ties go to the lower label."""
    proba = predict_proba(model, row)
    # classes are sorted ascending, argmax returns the first maximum
    return model.classes[int(np.argmax(proba))]


def predict_classes(model: SoftmaxModel, X: np.ndarray) -> np.ndarray:
    """Vectorized argmax labels for a matrix of rows."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(model.n_features, X.shape[1])
    logits = X @ model.weights.T + model.bias
    proba = _softmax(logits)
    picks = np.argmax(proba, axis=1)
    classes = np.asarray(model.classes)
    return classes[picks]
