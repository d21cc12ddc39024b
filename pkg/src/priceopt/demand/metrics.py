from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    n: int

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "n": self.n}


def evaluate_predictions(predicted, actual) -> EvalReport:
    """Mean absolute error and root mean squared error.

    R² is deliberately absent: with mostly-zero labels it says little about
    demand accuracy. See :func:`r2_debug` for diagnostics only.
    """
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if len(p) == 0 or len(a) == 0:
        raise DomainError("empty input")
    if len(p) != len(a):
        raise DomainError(f"length mismatch: {len(p)} vs {len(a)}")
    err = p - a
    abs_err = np.abs(err)
    mae = float(np.mean(abs_err))
    # scale before squaring so tiny or huge errors neither underflow nor overflow
    top = float(abs_err.max())
    rmse = top * float(np.sqrt(np.mean((abs_err / top) ** 2))) if top > 0 else 0.0
    return EvalReport(mae, rmse, len(p))


def r2_debug(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    ss_tot = np.sum((a - a.mean()) ** 2)
    return float("nan") if ss_tot == 0 else float(1 - np.sum((a - p) ** 2) / ss_tot)
