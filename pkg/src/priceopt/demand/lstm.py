"""Single-layer LSTM with a linear head, trained by backpropagation through time.

Inputs are per-product daily sequences. A training batch holds every
product's trailing window ending on one day, with the next day's quantity
as the target.
"""
from __future__ import annotations

import numpy as np

from ..core import DomainError
from .artifact import ModelArtifact, TrainingError
from .optim import Adam


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_lstm(n_in: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    scale = 1.0 / np.sqrt(n_in + hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0          # forget-gate bias
    return {
        "Wx": rng.uniform(-scale, scale, (n_in, 4 * hidden)),
        "Wh": rng.uniform(-scale, scale, (hidden, 4 * hidden)),
        "b": b,
        "Wy": rng.uniform(-scale, scale, hidden),
        "by": np.zeros(1),
    }


def lstm_forward(params, X):
    """Run (B, T, n_in) inputs; returns predictions (B,) and the step cache."""
    B, T, _ = X.shape
    H = params["Wh"].shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        a = X[:, t] @ params["Wx"] + h @ params["Wh"] + params["b"]
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        o = _sigmoid(a[:, 2 * H:3 * H])
        g = np.tanh(a[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((X[:, t], h, c, i, f, o, g, tc))
        h, c = h_new, c_new
    return h @ params["Wy"] + params["by"][0], (cache, h)


def lstm_loss_and_grads(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray):
    """Mean squared error of the final-step prediction and its BPTT gradients."""
    out, (cache, h_last) = lstm_forward(params, X)
    B = len(y)
    err = out - y
    loss = float(np.mean(err ** 2))
    d_out = (2.0 / B) * err
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["Wy"] = h_last.T @ d_out
    grads["by"] = np.array([d_out.sum()])
    dh = d_out[:, None] * params["Wy"][None, :]
    dc = np.zeros_like(dh)
    for x_t, h_prev, c_prev, i, f, o, g, tc in reversed(cache):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc ** 2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        da = np.hstack([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g ** 2)])
        grads["Wx"] += x_t.T @ da
        grads["Wh"] += h_prev.T @ da
        grads["b"] += da.sum(axis=0)
        dh = da @ params["Wh"].T
        dc = dc * f
    return loss, grads


def _windows(inputs: np.ndarray, target: np.ndarray, window: int):
    """Yield (X (P, window, F), y (P,)) for each target day."""
    T = inputs.shape[1]
    for t in range(window, T):
        yield inputs[:, t - window:t], target[:, t]


def _stack_inputs(features: np.ndarray, quantity: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    quantity = np.asarray(quantity, dtype=float)
    if features.ndim == 2:
        features = features[:, :, None]
    if features.shape[:2] != quantity.shape:
        raise DomainError("features and quantity disagree on (products, days)")
    return np.concatenate([features, quantity[:, :, None]], axis=2)


def fit_lstm(features, quantity, neurons: int = 50, epochs: int = 1000, seed: int = 0,
             window: int = 7, learning_rate: float = 1e-3) -> ModelArtifact:
    """Fit on ``features`` (products, days, F) and ``quantity`` (products, days).

    The model input for each day is that day's features plus its quantity;
    the target is the quantity on the day after the window.
    """
    inputs = _stack_inputs(features, quantity)
    quantity = np.asarray(quantity, dtype=float)
    if inputs.shape[1] < window + 1:
        raise DomainError(f"sequence length {inputs.shape[1]} shorter than window + 1 = {window + 1}")
    flat = inputs.reshape(-1, inputs.shape[2])
    x_mean = flat.mean(axis=0)
    x_scale = flat.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    y_mean = float(quantity.mean())
    y_scale = float(quantity.std()) or 1.0
    Z = (inputs - x_mean) / x_scale
    Y = (quantity - y_mean) / y_scale
    batches = list(_windows(Z, Y, window))

    rng = np.random.default_rng(seed)
    params = init_lstm(inputs.shape[2], neurons, rng)
    opt = Adam(params, lr=learning_rate)
    history = []
    for epoch in range(1, epochs + 1):
        total = 0.0
        for k in rng.permutation(len(batches)):
            Xb, yb = batches[k]
            loss, grads = lstm_loss_and_grads(params, Xb, yb)
            if not np.isfinite(loss):
                raise TrainingError(f"LSTM loss diverged at epoch {epoch}")
            opt.step(params, grads)
            total += loss
        history.append(total / len(batches))
    return ModelArtifact(
        "lstm",
        {**params, "x_mean": x_mean, "x_scale": x_scale, "y_mean": y_mean, "y_scale": y_scale},
        {"n_features": inputs.shape[2], "neurons": neurons, "window": window, "seed": seed,
         "epochs": epochs, "train_loss": history},
    )


def predict_lstm(art: ModelArtifact, features, quantity) -> np.ndarray:
    """Next-day prediction per product from the last ``window`` days."""
    window = art.training_meta["window"]
    inputs = _stack_inputs(features, quantity)
    if inputs.shape[1] < window:
        raise DomainError(f"sequence length {inputs.shape[1]} shorter than window {window}")
    p = art.parameters
    Z = (inputs[:, -window:] - p["x_mean"]) / p["x_scale"]
    out, _ = lstm_forward(p, Z)
    return out * p["y_scale"] + p["y_mean"]
