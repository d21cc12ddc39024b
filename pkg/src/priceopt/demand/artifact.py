"""Trained-model container and its versioned JSON serialization.

Floats are written with ``repr`` so parameters round-trip bit-exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..core import DomainError

FORMAT_VERSION = 1
KINDS = ("linear_elastic_net", "random_forest", "gbt", "mlp", "ensemble", "lstm", "arima")


class TrainingError(RuntimeError):
    pass


@dataclass
class ModelArtifact:
    kind: str
    parameters: dict[str, Any]
    training_meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")

    @property
    def n_features(self) -> int | None:
        return self.training_meta.get("n_features")

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "kind": self.kind,
                "parameters": _encode(self.parameters), "training_meta": _encode(self.training_meta)}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelArtifact":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise DomainError(f"unsupported artifact format version {version}")
        return cls(data["kind"], _decode(data["parameters"]), _decode(data["training_meta"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)

    @classmethod
    def loads(cls, text: str) -> "ModelArtifact":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ModelArtifact":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _encode(obj):
    if isinstance(obj, ModelArtifact):
        return {"__artifact__": obj.to_dict()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.ravel().tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        if "__artifact__" in obj:
            return ModelArtifact.from_dict(obj["__artifact__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def check_matrix(X, y=None, min_rows: int = 2) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DomainError("X must be two-dimensional")
    if X.shape[0] < min_rows:
        raise DomainError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DomainError("non-finite feature values")
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != X.shape[0]:
            raise DomainError("X and y lengths differ")
        if not np.all(np.isfinite(y)):
            raise DomainError("non-finite labels")
    return X, y


def standardize_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale
