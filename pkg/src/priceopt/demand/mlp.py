"""One-hidden-layer ReLU regressor trained with Adam and early stopping."""
from __future__ import annotations

import numpy as np

from .artifact import ModelArtifact, TrainingError, check_matrix, standardize_fit
from .optim import Adam


def init_mlp(n_in: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "W1": rng.standard_normal((n_in, hidden)) * np.sqrt(2.0 / n_in),
        "b1": np.zeros(hidden),
        # zero output layer: an untrained net predicts the (standardized) mean
        "W2": np.zeros((hidden, 1)),
        "b2": np.zeros(1),
    }


def mlp_forward(params, X):
    z = X @ params["W1"] + params["b1"]
    h = np.maximum(z, 0.0)
    return (h @ params["W2"] + params["b2"]).ravel(), (z, h)


def mlp_loss_and_grads(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray):
    """Mean squared error and its gradient with respect to every parameter."""
    out, (z, h) = mlp_forward(params, X)
    n = len(y)
    err = out - y
    loss = float(np.mean(err ** 2))
    d_out = (2.0 / n) * err[:, None]
    grads = {"W2": h.T @ d_out, "b2": d_out.sum(axis=0)}
    d_z = (d_out @ params["W2"].T) * (z > 0)
    grads["W1"] = X.T @ d_z
    grads["b1"] = d_z.sum(axis=0)
    return loss, grads


def fit_mlp(X, y, hidden: int = 100, seed: int = 0, learning_rate: float = 1e-3,
            max_epochs: int = 1000, patience: int = 20, batch_size: int = 200,
            validation_fraction: float = 0.1, tol: float = 1e-5) -> ModelArtifact:
    """Train on standardized inputs and targets.

    Stops when validation loss has not improved by ``tol`` for ``patience``
    epochs, or after ``max_epochs``; the best-validation weights are kept.
    """
    X, y = check_matrix(X, y)
    rng = np.random.default_rng(seed)
    x_mean, x_scale = standardize_fit(X)
    y_mean = float(y.mean())
    y_scale = float(y.std()) or 1.0
    Z = (X - x_mean) / x_scale
    t = (y - y_mean) / y_scale

    n = len(t)
    n_val = int(round(validation_fraction * n)) if n >= 10 else 0
    perm = rng.permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Zt, tt = Z[tr_idx], t[tr_idx]
    Zv, tv = (Z[val_idx], t[val_idx]) if n_val else (Zt, tt)

    params = init_mlp(X.shape[1], hidden, rng)
    opt = Adam(params, lr=learning_rate)
    bs = min(batch_size, len(tt))
    best = (np.inf, {k: v.copy() for k, v in params.items()})
    history, stale = [], 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(tt))
        total = 0.0
        for start in range(0, len(tt), bs):
            b = order[start:start + bs]
            loss, grads = mlp_loss_and_grads(params, Zt[b], tt[b])
            if not np.isfinite(loss):
                raise TrainingError(f"MLP loss diverged at epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(b)
        val_loss = float(np.mean((mlp_forward(params, Zv)[0] - tv) ** 2))
        if not np.isfinite(val_loss):
            raise TrainingError(f"MLP loss diverged at epoch {epoch}")
        history.append(total / len(tt))
        if val_loss < best[0] - tol:
            best, stale = (val_loss, {k: v.copy() for k, v in params.items()}), 0
        else:
            stale += 1
            if stale >= patience:
                break
    return ModelArtifact(
        "mlp",
        {**best[1], "x_mean": x_mean, "x_scale": x_scale, "y_mean": y_mean, "y_scale": y_scale},
        {"n_features": X.shape[1], "hidden": hidden, "seed": seed, "epochs": len(history),
         "train_loss": history, "best_val_loss": best[0]},
    )


def predict_mlp(art: ModelArtifact, X: np.ndarray) -> np.ndarray:
    p = art.parameters
    out, _ = mlp_forward(p, (X - p["x_mean"]) / p["x_scale"])
    return out * p["y_scale"] + p["y_mean"]
