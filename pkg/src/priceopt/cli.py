"""Command-line entry point: ``priceopt <subcommand> [options]``.

Settings resolve in three layers: built-in defaults, then the YAML file given
with ``--config``, then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import MODEL_KINDS, PARTITION_KEYS, PipelineConfig
from .core import DomainError
from .optimizer import LpInfeasibleError
from .pipeline import (
    RunContext,
    RunLockedError,
    StageError,
    assignment_prices,
    predict_base_demand,
    run_pipeline,
    run_stage,
    train_models,
)
from .report import emit_report, format_report

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_IO, EXIT_OTHER = 0, 2, 3, 4, 1

log = logging.getLogger("priceopt")


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline settings")
    g.add_argument("--config", type=Path, help="YAML config file")
    g.add_argument("--data-dir")
    g.add_argument("--run-dir")
    g.add_argument("--as-of", help="ISO date of the day to price")
    g.add_argument("--delta-pct", type=int)
    g.add_argument("--embedding-dim", type=int)
    g.add_argument("--embedding-epochs", type=int)
    g.add_argument("--model-kind", choices=MODEL_KINDS)
    g.add_argument("--sweep-steps", type=int)
    g.add_argument("--fixed-c", type=float, help="fixed budget in rupees instead of a sweep")
    g.add_argument("--partition-key", choices=PARTITION_KEYS)
    g.add_argument("--seed", type=int)
    g.add_argument("--train-days", type=int)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    keys = ("data_dir", "run_dir", "as_of", "delta_pct", "embedding_dim", "embedding_epochs",
            "model_kind", "sweep_steps", "fixed_c", "partition_key", "seed", "train_days")
    return cfg.with_overrides(**{k: getattr(args, k, None) for k in keys})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priceopt", description="Price ladder optimization pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_help = {
        "ingest": "load and validate the input files",
        "featurize": "train product embeddings",
        "train": "fit one demand model per partition and score the holdout day",
        "predict": "predict base-discount demand for the as-of day",
        "elasticity": "estimate per-product elasticities",
        "optimize": "build price ladders and choose one price per product",
        "pipeline": "run every stage and write a manifest",
    }
    for name, text in stage_help.items():
        _config_flags(sub.add_parser(name, help=text))

    rp = sub.add_parser("report", help="summarize a finished run")
    rp.add_argument("--run-dir", required=True)
    rp.add_argument("--json", action="store_true", help="emit JSON instead of text")

    sp = sub.add_parser("simulate", help="generate a synthetic market")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-products", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--days", type=int, default=90)
    sp.add_argument("--mean-daily-demand", type=float, default=50.0)
    sp.add_argument("--noise", choices=("poisson", "none"), default="poisson")

    ap = sub.add_parser("abtest", help="A/B test baseline prices against an assignment")
    ap.add_argument("--market", required=True, help="directory written by 'simulate'")
    ap.add_argument("--assignment", help="assignment CSV; omit for an A/A test")
    ap.add_argument("--days", type=int, default=5)
    ap.add_argument("--split-seed", type=int, default=0)
    ap.add_argument("--out", help="write the report JSON here")
    return parser


def _stage_command(cfg: PipelineConfig, command: str) -> None:
    ctx = RunContext.create(cfg)
    if command == "train":
        run_stage(ctx, "demand", train_models)
    elif command == "predict":
        run_stage(ctx, "demand", predict_base_demand)
    else:
        run_stage(ctx, {"featurize": "features"}.get(command, command))


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "pipeline":
        res = run_pipeline(resolve_config(args))
        print(json.dumps({k: res.manifest[k] for k in ("status", "stages", "run_hash")}))
        print(f"recommendations: {res.run_dir / 'assignment.csv'}")
    elif args.command in ("ingest", "featurize", "train", "predict", "elasticity", "optimize"):
        _stage_command(resolve_config(args), args.command)
    elif args.command == "report":
        rep = emit_report(args.run_dir)
        sys.stdout.write(json.dumps(rep, indent=1) + "\n" if args.json else format_report(rep))
    elif args.command == "simulate":
        from .simulate import MarketSpec, generate_market
        spec = MarketSpec(n_products=args.n_products, seed=args.seed, n_days_history=args.days,
                          mean_daily_demand=args.mean_daily_demand, noise=args.noise)
        path = generate_market(spec).save(args.out)
        print(f"market written to {path}")
    elif args.command == "abtest":
        from .simulate import Market, run_ab_test
        market = Market.load(args.market)
        base = market.baseline_prices()
        model = assignment_prices(args.assignment) if args.assignment else base
        rep = run_ab_test(market, base, model, n_days=args.days, split_seed=args.split_seed)
        text = rep.to_json()
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(text)
    return EXIT_OK


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code_for(exc.cause)
    if isinstance(exc, LpInfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(exc, DomainError):
        return EXIT_VALIDATION
    if isinstance(exc, (OSError, RunLockedError)):
        return EXIT_IO
    return EXIT_OTHER


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        code = exit_code_for(exc)
        if code == EXIT_OTHER:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
