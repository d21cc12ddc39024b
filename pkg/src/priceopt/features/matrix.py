"""Assembly of model-ready feature matrices.

Row layout for a target day ``t`` (label = quantity sold on ``t``)::

    observed    counts from day t-1           (5 columns)
    engineered  trailing 7-day window, BAG share, discount on t, weekday one-hot (11)
    sort_score  search score snapshot          (1)
    emb_*       product embedding              (dimension)

Observed counts come from the day before the target so that a row for the
prediction day (one past the history) can be built the same way.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import DomainError
from ..ingest import Dataset
from .embeddings import EmbeddingTable
from .panel import (
    ENGINEERED_COLUMNS,
    OBSERVED_COLUMNS,
    attach_sort_rank,
    build_panel,
    engineered_block,
    observed_block,
)


@dataclass(frozen=True)
class FeatureVector:
    product_id: str
    date: dt.date
    observed: dict[str, float]
    engineered: dict[str, float]
    sort_score: float
    embedding: tuple[float, ...]


@dataclass
class FeatureMatrix:
    product_ids: list[str]
    dates: list[dt.date]
    columns: list[str]
    X: np.ndarray
    y: np.ndarray | None

    def __len__(self) -> int:
        return len(self.product_ids)

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        idx = np.flatnonzero(mask)
        return FeatureMatrix([self.product_ids[i] for i in idx], [self.dates[i] for i in idx],
                             self.columns, self.X[idx], None if self.y is None else self.y[idx])

    def vectors(self) -> list[FeatureVector]:
        n_obs, n_eng = len(OBSERVED_COLUMNS), len(ENGINEERED_COLUMNS)
        out = []
        for pid, day, row in zip(self.product_ids, self.dates, self.X):
            out.append(FeatureVector(
                pid, day,
                dict(zip(OBSERVED_COLUMNS, map(float, row[:n_obs]))),
                dict(zip(ENGINEERED_COLUMNS, map(float, row[n_obs:n_obs + n_eng]))),
                float(row[n_obs + n_eng]),
                tuple(map(float, row[n_obs + n_eng + 1:])),
            ))
        return out

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["product_id", "date"] + self.columns + (["label"] if self.y is not None else []))
            for i, (pid, day) in enumerate(zip(self.product_ids, self.dates)):
                row = [pid, day.isoformat()] + [repr(float(v)) for v in self.X[i]]
                if self.y is not None:
                    row.append(repr(float(self.y[i])))
                w.writerow(row)


def feature_columns(dimension: int) -> list[str]:
    return OBSERVED_COLUMNS + ENGINEERED_COLUMNS + ["sort_score"] + [f"emb_{i}" for i in range(dimension)]


def assemble_feature_matrix(d: Dataset, day: dt.date, embeddings: EmbeddingTable,
                            discount: np.ndarray | None = None) -> FeatureMatrix:
    """One row per catalog product for target ``day``.

    Labels are present when ``day`` lies inside the history, ``None`` when it
    is the prediction day. ``discount`` overrides the target-day discount.
    """
    if embeddings is None or len(embeddings) == 0:
        raise DomainError("missing embeddings")
    panel = build_panel(d)
    prev = day - dt.timedelta(days=1)
    obs = observed_block(panel, prev)
    eng = engineered_block(panel, day, discount)
    scores = attach_sort_rank(d)
    sort = np.array([scores[p] for p in panel.product_ids])[:, None]
    emb = embeddings.matrix(panel.product_ids)
    X = np.hstack([obs, eng, sort, emb])
    if not np.all(np.isfinite(X)):
        raise DomainError(f"non-finite feature values on {day}")
    t = panel.day_index(day)
    y = panel.quantity[:, t].copy() if t < len(panel.dates) else None
    return FeatureMatrix(list(panel.product_ids), [day] * len(panel.product_ids),
                         feature_columns(embeddings.dimension), X, y)


def assemble_training_matrix(d: Dataset, days: list[dt.date], embeddings: EmbeddingTable) -> FeatureMatrix:
    """Stack per-day matrices; rows ordered by day, then product."""
    if not days:
        raise DomainError("no training days")
    parts = [assemble_feature_matrix(d, day, embeddings) for day in days]
    if any(p.y is None for p in parts):
        raise DomainError("training days must lie inside the history")
    return FeatureMatrix(
        [p for m in parts for p in m.product_ids],
        [t for m in parts for t in m.dates],
        parts[0].columns,
        np.vstack([m.X for m in parts]),
        np.concatenate([m.y for m in parts]),
    )
