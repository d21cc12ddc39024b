"""Pipeline configuration and its YAML file format."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .core import DomainError

RUN_DIR_ENV = "PRICEOPT_RUN_DIR"
MODEL_KINDS = ("ensemble", "linear_elastic_net", "random_forest", "gbt", "mlp")
PARTITION_KEYS = ("article_type", "brand", "gender", "none")


def _default_params() -> dict[str, dict[str, Any]]:
    return {
        "linear": {"l1_weight": 0.001, "l2_weight": 0.001, "max_iter": 2000},
        "rf": {"n_trees": 50, "max_depth": 12, "min_samples_leaf": 3, "ccp_alpha": 0.01},
        "gbt": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3},
        "mlp": {"hidden": 100, "max_epochs": 300, "patience": 20},
    }


@dataclass
class PipelineConfig:
    data_dir: str = "data"
    run_dir: str = "runs/latest"
    as_of: str | None = None             # ISO date; default is the day after the history
    delta_pct: int = 5
    embedding_dim: int = 16
    embedding_epochs: int = 5
    model_kind: str = "ensemble"
    sweep_steps: int = 101
    fixed_c: float | None = None         # rupees; sweep when unset
    partition_key: str = "article_type"
    seed: int = 0
    train_days: int = 14
    cold_start_k: int = 5
    max_reject_fraction: float = 0.01
    model_params: dict[str, dict[str, Any]] = field(default_factory=_default_params)

    def __post_init__(self):
        # partial model_params sections are filled in from the defaults
        merged = _default_params()
        for k, v in (self.model_params or {}).items():
            merged.setdefault(k, {}).update(v or {})
        self.model_params = merged
        self.validate()

    def validate(self) -> None:
        if isinstance(self.delta_pct, bool) or not isinstance(self.delta_pct, int) or self.delta_pct <= 0:
            raise DomainError(f"delta_pct must be a positive integer, got {self.delta_pct!r}")
        if int(self.sweep_steps) < 2:
            raise DomainError("sweep_steps must be at least 2")
        if self.model_kind not in MODEL_KINDS:
            raise DomainError(f"model_kind must be one of {MODEL_KINDS}")
        if self.partition_key not in PARTITION_KEYS:
            raise DomainError(f"partition_key must be one of {PARTITION_KEYS}")
        if self.train_days < 2:
            raise DomainError("train_days must be at least 2")
        if self.embedding_dim < 1 or self.embedding_epochs < 1:
            raise DomainError("embedding dimension and epochs must be positive")
        unknown = set(self.model_params) - set(_default_params())
        if unknown:
            raise DomainError(f"unknown model_params sections: {sorted(unknown)}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise DomainError("config file must hold a mapping")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Copy with every non-None override applied."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(data)

    def resolved_run_dir(self) -> Path:
        return Path(os.environ.get(RUN_DIR_ENV) or self.run_dir)

    def fingerprint(self) -> str:
        """Hash of every setting that can change outputs (paths excluded)."""
        data = self.to_dict()
        data.pop("run_dir")
        data.pop("data_dir")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
