from __future__ import annotations

import numpy as np

from ..core import DomainError
from .artifact import ModelArtifact, check_matrix, standardize_fit


def fit_elastic_net(X, y, l1_weight: float = 0.0, l2_weight: float = 0.0,
                    learning_rate: float = 0.01, max_iter: int = 1000,
                    tol: float = 1e-12) -> ModelArtifact:
    """Linear regression with an L1 + L2 penalty, fit by proximal gradient descent.

    Minimizes ``mean((y - Xw - b)^2) + l1*|w|_1 + l2*|w|^2`` on standardized
    columns. Both penalties go through the proximal step (soft-threshold, then
    shrink), so large weights cannot make the iteration diverge.
    Coefficients are stored in the original feature units.
    """
    X, y = check_matrix(X, y)
    if l1_weight < 0 or l2_weight < 0:
        raise DomainError("penalty weights must be non-negative")
    mean, scale = standardize_fit(X)
    Z = (X - mean) / scale
    y_mean = float(y.mean())
    yc = y - y_mean
    n = len(y)
    w = np.zeros(X.shape[1])
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        grad = -2.0 / n * (Z.T @ (yc - Z @ w))
        step = w - learning_rate * grad
        new = np.sign(step) * np.maximum(np.abs(step) - learning_rate * l1_weight, 0.0)
        new /= 1.0 + 2.0 * learning_rate * l2_weight
        delta = np.max(np.abs(new - w)) if len(w) else 0.0
        w = new
        if not np.all(np.isfinite(w)):
            raise DomainError(f"elastic net diverged at iteration {n_iter}")
        if delta < tol:
            break
    coef = w / scale
    intercept = y_mean - float(coef @ mean)
    return ModelArtifact(
        "linear_elastic_net",
        {"coef": coef, "intercept": intercept},
        {"n_features": X.shape[1], "l1_weight": l1_weight, "l2_weight": l2_weight,
         "learning_rate": learning_rate, "max_iter": max_iter, "n_iter": n_iter},
    )


def predict_linear(art: ModelArtifact, X: np.ndarray) -> np.ndarray:
    return X @ art.parameters["coef"] + art.parameters["intercept"]
