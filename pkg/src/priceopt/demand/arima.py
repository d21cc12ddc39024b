"""ARIMA order identification from ACF/PACF and conditional-least-squares fitting."""
from __future__ import annotations

from math import comb

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter

from ..core import DomainError
from .artifact import ModelArtifact


class ArimaFitError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


def acf(x, nlags: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..nlags (biased estimator)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0:
        return np.concatenate([[1.0], np.zeros(nlags)])
    n = len(x)
    return np.array([1.0] + [float(x[:n - k] @ x[k:]) / denom if k < n else 0.0
                             for k in range(1, nlags + 1)])


def pacf(x, nlags: int) -> np.ndarray:
    """Partial autocorrelations via the Durbin-Levinson recursion."""
    r = acf(x, nlags)
    out = np.zeros(nlags + 1)
    out[0] = 1.0
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, nlags + 1):
        if v <= 0:
            break
        a = (r[k] - phi @ r[1:k][::-1]) / v
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        v *= 1.0 - a * a
        out[k] = a
    return out


def _leading_run(values: np.ndarray, band: float) -> int:
    run = 0
    for v in values:
        if abs(v) > band:
            run += 1
        else:
            break
    return run


def _acf_decays(x: np.ndarray, horizon: int) -> bool:
    """True when the ACF drops inside Bartlett's band within ``horizon`` lags."""
    if np.ptp(x) == 0:
        return True
    n = len(x)
    r = acf(x, horizon)
    cum = np.concatenate([[0.0], np.cumsum(r[1:horizon] ** 2)])
    band = 1.96 * np.sqrt((1.0 + 2.0 * cum) / n)
    return bool(np.any(np.abs(r[1:horizon + 1]) < band))


def select_arima_order(series, max_d: int = 2, max_lag: int = 5,
                       decay_horizon: int = 15) -> tuple[int, int, int]:
    """Pick (p, d, q) by reading the correlograms.

    d is the smallest differencing order whose ACF falls inside the
    significance band within ``decay_horizon`` lags. On the differenced
    series, p and q are the lengths of the leading runs of PACF and ACF lags
    outside ``1.96/sqrt(n)`` (capped at ``max_lag``). A correlogram whose
    run hits the cap is treated as tailing off: ACF tailing with a PACF
    cut-off means pure AR, the reverse means pure MA, both tailing gives (1, 1).
    """
    y = np.asarray(series, dtype=float)
    if len(y) < 30:
        raise DomainError("need at least 30 observations")
    if np.ptp(y) == 0:
        return (0, 0, 0)
    d = max_d
    for k in range(max_d + 1):
        if _acf_decays(np.diff(y, k), decay_horizon):
            d = k
            break
    w = np.diff(y, d)
    if np.ptp(w) == 0:
        return (0, d, 0)
    band = 1.96 / np.sqrt(len(w))
    p_run = _leading_run(pacf(w, max_lag)[1:], band)
    q_run = _leading_run(acf(w, max_lag)[1:], band)
    if p_run == 0 and q_run == 0:
        return (0, d, 0)
    if p_run == max_lag and q_run == max_lag:
        return (1, d, 1)
    if p_run <= q_run:
        return (p_run, d, 0)
    return (0, d, q_run)


def _css_residuals(params, w, p, q):
    c, phi, theta = params[0], params[1:1 + p], params[1 + p:]
    n = len(w)
    u = w[p:] - c
    for i in range(p):
        u = u - phi[i] * w[p - 1 - i:n - 1 - i]
    # e_t + sum_j theta_j e_{t-j} = u_t, zero pre-sample errors
    return lfilter([1.0], np.concatenate([[1.0], theta]), u)


def _ar_ols(w, p):
    n = len(w)
    cols = [np.ones(n - p)] + [w[p - 1 - i:n - 1 - i] for i in range(p)]
    A = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(A, w[p:], rcond=None)
    return beta


def fit_arima(series, p: int, d: int, q: int) -> ModelArtifact:
    """Fit ARIMA(p, d, q) with a constant on the differenced series.

    The residual recursion starts after the first ``p`` differenced values with
    pre-sample errors set to zero. Pure AR models reduce to ordinary least
    squares; models with MA terms are solved with a trust-region least-squares
    routine. Raises :class:`ArimaFitError` if the MA part is not invertible.
    """
    y = np.asarray(series, dtype=float)
    if min(p, d, q) < 0:
        raise DomainError("orders must be non-negative")
    if len(y) < 10 + p + d + q:
        raise DomainError(f"series of length {len(y)} too short for ARIMA({p},{d},{q})")
    w = np.diff(y, d)
    if p == 0 and q == 0:
        params = np.array([float(np.mean(w))])
    else:
        start = _ar_ols(w, p) if p else np.array([float(np.mean(w))])
        if q == 0:
            params = start
        else:
            x0 = np.concatenate([start, np.zeros(q)])
            sol = least_squares(_css_residuals, x0, args=(w, p, q), method="trf")
            params = sol.x
            theta = params[1 + p:]
            roots = np.roots(np.concatenate([theta[::-1], [1.0]]))
            if len(roots) and np.min(np.abs(roots)) <= 1.0:
                raise ArimaFitError("non-invertible MA polynomial", {
                    "theta": theta.tolist(), "min_root_modulus": float(np.min(np.abs(roots))),
                    "cost": float(sol.cost), "status": int(sol.status)})
    resid = _css_residuals(params, w, p, q)
    e_full = np.concatenate([np.zeros(p), resid])
    return ModelArtifact(
        "arima",
        {"const": float(params[0]), "phi": np.asarray(params[1:1 + p], dtype=float),
         "theta": np.asarray(params[1 + p:], dtype=float),
         "y_tail": y[-max(d, 1):].copy(), "w_tail": w[-max(p, 1):].copy(),
         "e_tail": e_full[-max(q, 1):].copy()},
        {"order": [p, d, q], "n_obs": len(y), "sigma2": float(np.mean(resid ** 2)) if len(resid) else 0.0},
    )


def forecast_arima(art: ModelArtifact) -> float:
    """One-step-ahead forecast on the original (undifferenced) scale."""
    p, d, q = art.training_meta["order"]
    prm = art.parameters
    w_next = prm["const"]
    w_tail, e_tail, y_tail = prm["w_tail"], prm["e_tail"], prm["y_tail"]
    for i in range(p):
        w_next += prm["phi"][i] * w_tail[-1 - i]
    for j in range(q):
        w_next += prm["theta"][j] * e_tail[-1 - j]
    # invert (1 - B)^d
    y_next = w_next
    for k in range(1, d + 1):
        y_next -= comb(d, k) * (-1) ** k * y_tail[-k]
    return float(y_next)
