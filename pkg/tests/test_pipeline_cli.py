import json
import shutil
from pathlib import Path

import pytest

from priceopt.cli import main
from priceopt.config import RUN_DIR_ENV, PipelineConfig
from priceopt.core import DomainError
from priceopt.optimizer import brute_force_optimal
from priceopt.pipeline import STAGES, StageError, read_ladders, run_lock, run_pipeline
from priceopt.report import SECTIONS, emit_report, format_report
from priceopt.simulate import ElasticityMix, MarketSpec, generate_market

FAST = {"rf": {"n_trees": 5}, "mlp": {"max_epochs": 20}, "gbt": {"n_rounds": 20}}


@pytest.fixture(scope="module")
def market_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("market")
    spec = MarketSpec(n_products=40, seed=2, n_article_types=2, n_days_history=30, users_per_day=60)
    generate_market(spec).save(root / "data")
    return root / "data"


def config(data_dir, run_dir, **kw):
    return PipelineConfig(data_dir=str(data_dir), run_dir=str(run_dir), embedding_epochs=2,
                          sweep_steps=11, model_params=FAST, **kw)


def cli_flags(data_dir, run_dir, *extra):
    return ["--data-dir", str(data_dir), "--run-dir", str(run_dir), "--embedding-epochs", "2",
            "--sweep-steps", "11", *extra]


@pytest.fixture
def fast_config_file(tmp_path):
    path = tmp_path / "fast.yaml"
    PipelineConfig(model_params=FAST).save(path)
    return path


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(delta_pct=7, fixed_c=1234.5, model_kind="gbt", model_params={"gbt": {"n_rounds": 3}})
    cfg.save(tmp_path / "c.yaml")
    back = PipelineConfig.load(tmp_path / "c.yaml")
    assert back == cfg
    assert back.model_params["gbt"] == {"n_rounds": 3, "learning_rate": 0.1, "max_depth": 3}


@pytest.mark.parametrize("bad", [{"delta_pct": 0}, {"delta_pct": 2.5}, {"delta_pct": True},
                                 {"sweep_steps": 1}, {"model_kind": "lstm"}, {"partition_key": "color"}])
def test_config_validation(bad):
    with pytest.raises(DomainError):
        PipelineConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(DomainError, match="unknown config keys"):
        PipelineConfig.loads("delta: 5\n")


def test_pipeline_happy_path(market_dir, tmp_path):
    res = run_pipeline(config(market_dir, tmp_path / "run"))
    m = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert m["stages"] == list(STAGES) and m["status"] == "completed"
    assert set(m["timings"]) == set(STAGES)
    assert m["n_products"] == 40 and m["partitions"] == ["shirts", "tshirts"]
    for name in ("assignment.csv", "ladders.csv", "elasticities.csv", "eval.json", "config.yaml",
                 "sweeps/shirts.csv", "models/tshirts.json"):
        assert (tmp_path / "run" / name).is_file(), name
    assert len(res.assignment.product_ids) == 40
    evals = json.loads((tmp_path / "run" / "eval.json").read_text())
    assert set(evals["shirts"]["models"]) >= {"ensemble", "linear", "rf", "gbt", "mlp"}


def test_pipeline_deterministic(market_dir, tmp_path):
    run_pipeline(config(market_dir, tmp_path / "a"))
    run_pipeline(config(market_dir, tmp_path / "b"))
    for name in ("assignment.csv", "ladders.csv", "elasticities.csv", "sweeps/shirts.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_sort_rank_fails_in_ingest(market_dir, tmp_path):
    data = tmp_path / "data"
    shutil.copytree(market_dir, data)
    (data / "sort_rank.csv").unlink()
    with pytest.raises(StageError) as info:
        run_pipeline(config(data, tmp_path / "run"))
    assert info.value.stage == "ingest"
    m = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert m["status"] == "failed" and m["failed_stage"] == "ingest"


def test_manifest_hash_tracks_config_and_data(market_dir, tmp_path):
    h1 = run_pipeline(config(market_dir, tmp_path / "r1")).manifest["run_hash"]
    h2 = run_pipeline(config(market_dir, tmp_path / "r2")).manifest["run_hash"]
    h3 = run_pipeline(config(market_dir, tmp_path / "r3", seed=1)).manifest["run_hash"]
    data = tmp_path / "data"
    shutil.copytree(market_dir, data)
    with (data / "sort_rank.csv").open("a") as fh:
        fh.write("")
    h4 = run_pipeline(config(data, tmp_path / "r4")).manifest["run_hash"]
    with (data / "catalog.csv").open("a") as fh:
        fh.write("\n")
    h5 = run_pipeline(config(data, tmp_path / "r5")).manifest["run_hash"]
    assert h1 == h2 == h4
    assert len({h1, h3, h5}) == 3


def test_report_sections(market_dir, tmp_path):
    run_pipeline(config(market_dir, tmp_path / "run"))
    rep = emit_report(tmp_path / "run")
    assert tuple(rep) == SECTIONS
    assert rep["products"]["count"] == 40
    assert sum(rep["chosen_distribution"].values()) == 40
    assert sum(b["count"] for b in rep["elasticity_histogram"]) == 40
    text = format_report(rep)
    for heading in ("Products", "Demand models", "Elasticity distribution", "Chosen ladder slot",
                    "Expected revenue"):
        assert heading in text


def test_report_on_empty_assignment(tmp_path):
    (tmp_path / "assignment.csv").write_text(
        "product_id,chosen_discount_pct,chosen_price,projected_demand,expected_revenue\n")
    with pytest.raises(DomainError, match="nothing to report"):
        emit_report(tmp_path)


def test_inelastic_market_prefers_higher_prices(tmp_path):
    mix = ElasticityMix(inelastic_weight=1.0, inelastic_mean=-0.3, inelastic_sd=0.2,
                        elastic_weight=0.0, giffen_weight=0.0)
    spec = MarketSpec(n_products=20, seed=8, n_article_types=2, n_days_history=30, users_per_day=60,
                      elasticity_mix=mix, noise="none")
    generate_market(spec).save(tmp_path / "data")
    run_pipeline(config(tmp_path / "data", tmp_path / "run"))
    rep = emit_report(tmp_path / "run")
    labels = ("-delta", "base", "+delta")
    expected = dict.fromkeys(labels, 0)
    for lad in read_ladders(tmp_path / "run" / "ladders.csv"):
        expected[labels[brute_force_optimal([lad]).choices[0]]] += 1
    assert rep["chosen_distribution"] == expected
    assert expected["+delta"] == 0
    assert rep["revenue"]["uplift_pct"] >= 0


# --- CLI ---

def test_cli_pipeline_and_report(market_dir, tmp_path, fast_config_file, capsys):
    run = tmp_path / "run"
    assert main(["pipeline", "--config", str(fast_config_file), *cli_flags(market_dir, run)]) == 0
    assert "completed" in capsys.readouterr().out
    assert main(["report", "--run-dir", str(run), "--json"]) == 0
    assert tuple(json.loads(capsys.readouterr().out)) == SECTIONS


def test_cli_stage_by_stage(market_dir, tmp_path, fast_config_file):
    flags = ["--config", str(fast_config_file), *cli_flags(market_dir, tmp_path / "run")]
    for cmd in ("ingest", "featurize", "train", "predict", "elasticity", "optimize"):
        assert main([cmd, *flags]) == 0, cmd
    whole = tmp_path / "whole"
    assert main(["pipeline", "--config", str(fast_config_file), *cli_flags(market_dir, whole)]) == 0
    assert (tmp_path / "run" / "assignment.csv").read_bytes() == (whole / "assignment.csv").read_bytes()


def test_cli_flags_override_config_file(tmp_path):
    from priceopt.cli import build_parser, resolve_config
    path = tmp_path / "c.yaml"
    PipelineConfig(delta_pct=7, sweep_steps=21).save(path)
    cfg = resolve_config(build_parser().parse_args(["optimize", "--config", str(path), "--delta-pct", "3"]))
    assert cfg.delta_pct == 3 and cfg.sweep_steps == 21


def test_cli_validation_exit_code(market_dir, tmp_path, capsys):
    assert main(["pipeline", *cli_flags(market_dir, tmp_path / "run"), "--delta-pct", "0"]) == 2
    assert "delta_pct" in capsys.readouterr().err
    (tmp_path / "empty").mkdir()
    (tmp_path / "empty" / "assignment.csv").write_text("product_id\n")
    assert main(["report", "--run-dir", str(tmp_path / "empty")]) == 2


def test_cli_infeasible_exit_code(market_dir, tmp_path, fast_config_file):
    flags = ["--config", str(fast_config_file), *cli_flags(market_dir, tmp_path / "run"), "--fixed-c", "1"]
    assert main(["pipeline", *flags]) == 3


def test_cli_io_exit_code(tmp_path):
    assert main(["pipeline", *cli_flags(tmp_path / "nowhere", tmp_path / "run")]) == 4


def test_run_dir_lock(market_dir, tmp_path, fast_config_file):
    run = tmp_path / "run"
    with run_lock(run):
        assert main(["pipeline", "--config", str(fast_config_file), *cli_flags(market_dir, run)]) == 4
    assert main(["pipeline", "--config", str(fast_config_file), *cli_flags(market_dir, run)]) == 0


def test_env_var_overrides_run_dir(market_dir, tmp_path, fast_config_file, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv(RUN_DIR_ENV, str(target))
    assert main(["pipeline", "--config", str(fast_config_file), *cli_flags(market_dir, tmp_path / "ignored")]) == 0
    assert (target / "assignment.csv").is_file()
    assert not (tmp_path / "ignored").exists()


def test_cli_simulate_and_abtest(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["simulate", "--out", str(out), "--n-products", "20", "--days", "20", "--seed", "3"]) == 0
    assert (out / "truth.json").is_file()
    assert main(["abtest", "--market", str(out), "--days", "2", "--out", str(tmp_path / "ab.json")]) == 0
    rep = json.loads(Path(tmp_path / "ab.json").read_text())
    assert rep["n_days"] == 2 and rep["users_a"] == rep["users_b"]
