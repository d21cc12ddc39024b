"""Prediction dispatch, the median ensemble, and grid-search cross-validation."""
from __future__ import annotations

import itertools
from typing import Any, Callable, Mapping

import numpy as np

from ..core import DomainError
from .artifact import ModelArtifact, check_matrix
from .linear import fit_elastic_net, predict_linear
from .metrics import evaluate_predictions
from .mlp import fit_mlp, predict_mlp
from .trees import fit_gbt, fit_random_forest, predict_forest, predict_gbt

ENSEMBLE_MEMBERS = ("linear", "rf", "gbt", "mlp")

FITTERS: dict[str, Callable[..., ModelArtifact]] = {
    "linear_elastic_net": fit_elastic_net,
    "random_forest": fit_random_forest,
    "gbt": fit_gbt,
    "mlp": fit_mlp,
}


def predict(art: ModelArtifact, X) -> np.ndarray:
    """Predictions of a tabular model (or ensemble) on feature matrix ``X``."""
    X = np.asarray(X, dtype=float)
    if art.n_features is not None and X.shape[1] != art.n_features:
        raise DomainError(f"{art.kind} expects {art.n_features} features, got {X.shape[1]}")
    if art.kind == "linear_elastic_net":
        return predict_linear(art, X)
    if art.kind == "random_forest":
        return predict_forest(art, X)
    if art.kind == "gbt":
        return predict_gbt(art, X)
    if art.kind == "mlp":
        return predict_mlp(art, X)
    if art.kind == "ensemble":
        return ensemble_predict(art.parameters["members"], X)
    raise DomainError(f"{art.kind} models are not tabular; use their own predict function")


def ensemble_predict(artifacts: Mapping[str, ModelArtifact], X) -> np.ndarray:
    """Elementwise median of the member predictions."""
    if not artifacts:
        raise DomainError("empty ensemble")
    widths = {a.n_features for a in artifacts.values()}
    if len(widths) != 1:
        raise DomainError(f"ensemble members trained on different schemas: {sorted(map(str, widths))}")
    X = np.asarray(X, dtype=float)
    preds = np.vstack([predict(artifacts[k], X) for k in sorted(artifacts)])
    return np.median(preds, axis=0)


def fit_ensemble(X, y, seed: int = 0, params: Mapping[str, Mapping[str, Any]] | None = None
                 ) -> ModelArtifact:
    """Train the four tabular members on the same matrix."""
    X, y = check_matrix(X, y)
    params = {k: dict(v) for k, v in (params or {}).items()}
    members = {
        "linear": fit_elastic_net(X, y, **params.get("linear", {})),
        "rf": fit_random_forest(X, y, seed=seed, **params.get("rf", {})),
        "gbt": fit_gbt(X, y, **params.get("gbt", {})),
        "mlp": fit_mlp(X, y, seed=seed, **params.get("mlp", {})),
    }
    return ModelArtifact("ensemble", {"members": members},
                         {"n_features": X.shape[1], "seed": seed, "member_params": params})


def grid_search_cv(model_kind: str, grid: Mapping[str, list], X, y, folds: int = 5, seed: int = 0,
                   fixed: Mapping[str, Any] | None = None):
    """Exhaustive k-fold search scored by mean absolute error.

    Returns ``(best_params, table)`` where ``table`` has one dict per grid
    point in grid order. Ties keep the earliest grid point.
    """
    if model_kind not in FITTERS:
        raise DomainError(f"unknown model kind {model_kind!r}")
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise DomainError("empty grid")
    X, y = check_matrix(X, y)
    if len(y) < folds or folds < 2:
        raise DomainError(f"need at least {folds} rows and folds >= 2")
    fit = FITTERS[model_kind]
    fixed = dict(fixed or {})
    rng = np.random.default_rng(seed)
    splits = np.array_split(rng.permutation(len(y)), folds)

    keys = list(grid)
    table, best, best_score = [], None, np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        scores = []
        for k in range(folds):
            test = splits[k]
            train = np.concatenate([splits[j] for j in range(folds) if j != k])
            art = fit(X[train], y[train], **fixed, **point)
            scores.append(evaluate_predictions(predict(art, X[test]), y[test]).mae)
        mean = float(np.mean(scores))
        table.append({"params": point, "mean_mae": mean, "fold_mae": scores})
        if mean < best_score:
            best, best_score = point, mean
    return best, table
