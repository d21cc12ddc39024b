"""End-to-end run: ingest, features, demand, elasticity, optimize.

Every stage reads what it needs from the in-memory run context and falls
back to the files an earlier stage wrote into the run directory, so stages
can also be run one at a time from the command line.
"""
from __future__ import annotations

import contextlib
import csv
import datetime as dt
import fcntl
import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .core import DomainError, format_inr, to_paise
from .demand import ModelArtifact, evaluate_predictions, predict
from .demand.ensemble import FITTERS, fit_ensemble
from .elasticity import (
    ColdStartNeeded,
    ElasticityEstimate,
    PriceLadder,
    LadderEntry,
    build_price_ladder,
    clamp_ed,
    cold_start_elasticity,
    estimate_elasticity,
    read_elasticities,
    write_elasticities,
)
from .features import EmbeddingTable, assemble_feature_matrix, assemble_training_matrix, train_product_embeddings
from .features.panel import WINDOW
from .ingest import FILES, Dataset, load_dataset, write_rejects
from .optimizer import (
    PriceAssignment,
    solve_fixed_budget,
    sweep_budget,
    write_assignment,
    write_sweep_table,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "features", "demand", "elasticity", "optimize")
MODEL_SECTION = {"linear_elastic_net": "linear", "random_forest": "rf", "gbt": "gbt", "mlp": "mlp"}

ASSIGNMENT_FILE = "assignment.csv"
LADDER_FILE = "ladders.csv"
ELASTICITY_FILE = "elasticities.csv"
EVAL_FILE = "eval.json"
DEMAND_FILE = "base_demand.csv"
EMBEDDING_FILE = "embeddings.txt"
MANIFEST_FILE = "manifest.json"
LADDER_COLUMNS = ["product_id", "partition", "slot", "discount_pct", "price", "projected_demand"]


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class RunLockedError(RuntimeError):
    pass


def partition_name(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", value) or "_"


@contextlib.contextmanager
def run_lock(run_dir: Path):
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / ".lock", "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError as exc:
            raise RunLockedError(f"run directory {run_dir} is in use") from exc
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def infer_as_of(data_dir: str | Path) -> dt.date:
    """Day after the last date in the price history file."""
    path = Path(data_dir) / FILES["price_history"]
    if not path.is_file():
        raise FileNotFoundError(f"missing input file {path}")
    last = None
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                day = dt.date.fromisoformat(row["date"])
            except (KeyError, TypeError, ValueError):
                continue
            last = day if last is None or day > last else last
    if last is None:
        raise DomainError(f"no dated rows in {path}")
    return last + dt.timedelta(days=1)


def data_fingerprint(data_dir: str | Path) -> str:
    h = hashlib.sha256()
    for key in sorted(FILES):
        p = Path(data_dir) / FILES[key]
        h.update(FILES[key].encode())
        if p.is_file():
            h.update(p.read_bytes())
    return h.hexdigest()


@dataclass
class RunContext:
    config: PipelineConfig
    run_dir: Path
    dataset: Dataset | None = None
    embeddings: EmbeddingTable | None = None
    models: dict[str, ModelArtifact] = field(default_factory=dict)
    base_demand: dict[str, float] | None = None
    elasticities: dict[str, ElasticityEstimate] | None = None
    assignment: PriceAssignment | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @classmethod
    def create(cls, config: PipelineConfig) -> "RunContext":
        run_dir = config.resolved_run_dir()
        run_dir.mkdir(parents=True, exist_ok=True)
        return cls(config, run_dir)

    def as_of(self) -> dt.date:
        if self.config.as_of:
            return dt.date.fromisoformat(self.config.as_of)
        return infer_as_of(self.config.data_dir)

    def need_dataset(self) -> Dataset:
        if self.dataset is None:
            self.dataset = load_dataset(self.config.data_dir, self.as_of(),
                                        self.config.max_reject_fraction)
        return self.dataset

    def need_embeddings(self) -> EmbeddingTable:
        if self.embeddings is None:
            self.embeddings = EmbeddingTable.load(self.run_dir / EMBEDDING_FILE)
        return self.embeddings

    def partitions(self) -> dict[str, list[str]]:
        d = self.need_dataset()
        key = self.config.partition_key
        groups: dict[str, list[str]] = {}
        for e in d.catalog:
            name = "all" if key == "none" else partition_name(str(getattr(e, key)))
            groups.setdefault(name, []).append(e.product_id)
        return dict(sorted(groups.items()))

    def need_models(self) -> dict[str, ModelArtifact]:
        if not self.models:
            for name in self.partitions():
                self.models[name] = ModelArtifact.load(self.run_dir / "models" / f"{name}.json")
        return self.models

    def need_base_demand(self) -> dict[str, float]:
        if self.base_demand is None:
            with (self.run_dir / DEMAND_FILE).open(newline="", encoding="utf-8") as fh:
                self.base_demand = {r["product_id"]: float(r["base_demand"]) for r in csv.DictReader(fh)}
        return self.base_demand

    def need_elasticities(self) -> dict[str, ElasticityEstimate]:
        if self.elasticities is None:
            self.elasticities = read_elasticities(self.run_dir / ELASTICITY_FILE)
        return self.elasticities


# -- stages -------------------------------------------------------------------

def stage_ingest(ctx: RunContext) -> None:
    d = ctx.need_dataset()
    write_rejects(d.rejects, ctx.run_dir / "rejects.csv")
    summary = {"as_of": d.as_of.isoformat(), "products": len(d.catalog),
               "price_rows": len(d.price_history), "click_rows": len(d.clickstream),
               "rank_rows": len(d.sort_ranks), "rejects": d.rejects.counts()}
    (ctx.run_dir / "ingest.json").write_text(json.dumps(summary, indent=1, sort_keys=True), encoding="utf-8")


def stage_features(ctx: RunContext) -> None:
    cfg = ctx.config
    d = ctx.need_dataset()
    ctx.embeddings = train_product_embeddings(d.clickstream, dimension=cfg.embedding_dim,
                                              epochs=cfg.embedding_epochs, seed=cfg.seed)
    ctx.embeddings.save(ctx.run_dir / EMBEDDING_FILE)


def training_days(d: Dataset, n_days: int) -> list[dt.date]:
    dates = d.history_dates()
    usable = dates[WINDOW:]
    if len(usable) < 2:
        raise DomainError(f"history of {len(dates)} days leaves fewer than 2 training days")
    return usable[-n_days:]


def _fit(kind: str, X, y, cfg: PipelineConfig) -> ModelArtifact:
    params = cfg.model_params
    if kind == "ensemble":
        return fit_ensemble(X, y, seed=cfg.seed, params=params)
    extra = dict(params.get(MODEL_SECTION[kind], {}))
    if kind in ("random_forest", "mlp"):
        extra["seed"] = cfg.seed
    return FITTERS[kind](X, y, **extra)


def train_models(ctx: RunContext) -> dict:
    """Fit one model per partition on all training days but the last, which is held out."""
    cfg = ctx.config
    d = ctx.need_dataset()
    emb = ctx.need_embeddings()
    days = training_days(d, cfg.train_days)
    fm = assemble_training_matrix(d, days, emb)
    holdout = np.array([day == days[-1] for day in fm.dates])
    pids = np.array(fm.product_ids)
    report = {}
    (ctx.run_dir / "models").mkdir(exist_ok=True)
    for name, members in ctx.partitions().items():
        in_part = np.isin(pids, members)
        train, test = in_part & ~holdout, in_part & holdout
        art = _fit(cfg.model_kind, fm.X[train], fm.y[train], cfg)
        ctx.models[name] = art
        art.save(ctx.run_dir / "models" / f"{name}.json")
        scores = {cfg.model_kind: evaluate_predictions(predict(art, fm.X[test]), fm.y[test]).as_dict()}
        if art.kind == "ensemble":
            for member, sub in sorted(art.parameters["members"].items()):
                scores[member] = evaluate_predictions(predict(sub, fm.X[test]), fm.y[test]).as_dict()
        report[name] = {"n_train": int(train.sum()), "n_holdout": int(test.sum()), "models": scores}
    (ctx.run_dir / EVAL_FILE).write_text(json.dumps(report, indent=1, sort_keys=True), encoding="utf-8")
    return report


def predict_base_demand(ctx: RunContext) -> dict[str, float]:
    """Demand on the as-of day at each product's base discount, floored at 0."""
    d = ctx.need_dataset()
    fm = assemble_feature_matrix(d, d.as_of, ctx.need_embeddings())
    models = ctx.need_models()
    pids = np.array(fm.product_ids)
    out = {}
    for name, members in ctx.partitions().items():
        mask = np.isin(pids, members)
        pred = np.maximum(predict(models[name], fm.X[mask]), 0.0)
        out.update(zip(pids[mask].tolist(), pred.tolist()))
    ctx.base_demand = out
    with (ctx.run_dir / DEMAND_FILE).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "base_demand"])
        for pid in sorted(out):
            w.writerow([pid, repr(out[pid])])
    return out


def stage_demand(ctx: RunContext) -> None:
    train_models(ctx)
    predict_base_demand(ctx)


def stage_elasticity(ctx: RunContext) -> dict[str, ElasticityEstimate]:
    """Per-product estimates; products without price variation borrow from neighbours."""
    d = ctx.need_dataset()
    emb = ctx.need_embeddings()
    known, pending = {}, []
    for pid in d.product_ids:
        try:
            known[pid] = estimate_elasticity(d.history_for(pid), updated_on=d.as_of)
        except ColdStartNeeded:
            pending.append(pid)
    out = dict(known)
    part_of = {p: name for name, members in ctx.partitions().items() for p in members}
    for pid in pending:
        peers = {p: e for p, e in known.items() if part_of[p] == part_of[pid]} or known
        if not peers:
            raise DomainError("no product has enough price variation to estimate elasticity")
        try:
            out[pid] = cold_start_elasticity(pid, emb, peers, k=ctx.config.cold_start_k, updated_on=d.as_of)
        except DomainError:
            # no embedding for this product: fall back to the peer mean
            mean = float(np.mean([e.ed for e in peers.values()]))
            out[pid] = ElasticityEstimate(pid, clamp_ed(mean), "cold_start", len(peers), d.as_of)
    ctx.elasticities = dict(sorted(out.items()))
    write_elasticities(list(ctx.elasticities.values()), ctx.run_dir / ELASTICITY_FILE)
    return ctx.elasticities


def _merge(parts: list[PriceAssignment]) -> PriceAssignment:
    rows = sorted(row for a in parts
                  for row in zip(a.product_ids, a.choices, a.prices, a.demands, a.discounts))
    return PriceAssignment(*([r[i] for r in rows] for i in range(5)))


def stage_optimize(ctx: RunContext) -> PriceAssignment:
    cfg = ctx.config
    d = ctx.need_dataset()
    demand = ctx.need_base_demand()
    eds = ctx.need_elasticities()
    sweep_dir = ctx.run_dir / "sweeps"
    sweep_dir.mkdir(exist_ok=True)
    parts, ladder_rows = [], []
    for name, members in ctx.partitions().items():
        ladders = [build_price_ladder(d.entry(p), demand[p], eds[p].ed, cfg.delta_pct) for p in members]
        for lad in ladders:
            for slot, e in enumerate(lad.entries):
                ladder_rows.append([lad.product_id, name, slot, f"{e.discount_pct:g}", format_inr(e.price),
                                    f"{e.projected_demand:.6f}"])
        if cfg.fixed_c is not None:
            parts.append(solve_fixed_budget(ladders, to_paise(cfg.fixed_c)))
        else:
            res = sweep_budget(ladders, cfg.sweep_steps)
            write_sweep_table(res.table, sweep_dir / f"{name}.csv")
            parts.append(res.best)
    ctx.assignment = _merge(parts)
    write_assignment(ctx.assignment, ctx.run_dir / ASSIGNMENT_FILE)
    with (ctx.run_dir / LADDER_FILE).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LADDER_COLUMNS)
        w.writerows(sorted(ladder_rows))
    return ctx.assignment


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "features": stage_features,
    "demand": stage_demand,
    "elasticity": stage_elasticity,
    "optimize": stage_optimize,
}


def run_stage(ctx: RunContext, stage: str, fn=None) -> None:
    fn = fn or STAGE_FUNCS[stage]
    t0 = time.perf_counter()
    try:
        fn(ctx)
    except Exception as exc:
        raise StageError(stage, exc) from exc
    ctx.timings[stage] = round(time.perf_counter() - t0, 3)
    log.info("stage %s done in %.2fs", stage, ctx.timings[stage])


@dataclass
class RunResult:
    run_dir: Path
    manifest: dict
    assignment: PriceAssignment


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Run all stages under a lock on the run directory and write the manifest."""
    ctx = RunContext.create(config)
    with run_lock(ctx.run_dir):
        completed = []
        manifest = {"config_hash": config.fingerprint(), "data_hash": data_fingerprint(config.data_dir),
                    "seeds": {"seed": config.seed}, "stages": completed, "status": "running"}
        try:
            for stage in STAGES:
                run_stage(ctx, stage)
                completed.append(stage)
            manifest.update(status="completed", as_of=ctx.dataset.as_of.isoformat(),
                            n_products=len(ctx.dataset.catalog), partitions=list(ctx.partitions()))
        except StageError as exc:
            manifest.update(status="failed", failed_stage=exc.stage, error=str(exc.cause))
            raise
        except BaseException:
            manifest["status"] = "aborted"
            raise
        finally:
            manifest["timings"] = ctx.timings
            manifest["run_hash"] = hashlib.sha256(
                (manifest["config_hash"] + manifest["data_hash"]).encode()).hexdigest()
            (ctx.run_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, sort_keys=True),
                                                     encoding="utf-8")
            config.save(ctx.run_dir / "config.yaml")
    return RunResult(ctx.run_dir, manifest, ctx.assignment)


def assignment_prices(path: str | Path) -> dict[str, int]:
    """Chosen prices (paise) from an assignment CSV."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {r["product_id"]: to_paise(r["chosen_price"]) for r in csv.DictReader(fh)}


def read_ladders(path: str | Path) -> list[PriceLadder]:
    rows: dict[str, list] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(r["product_id"], []).append(r)
    out = []
    for pid, rs in sorted(rows.items()):
        rs.sort(key=lambda r: int(r["slot"]))
        out.append(PriceLadder(pid, tuple(LadderEntry(float(r["discount_pct"]), to_paise(r["price"]),
                                                      float(r["projected_demand"])) for r in rs)))
    return out
