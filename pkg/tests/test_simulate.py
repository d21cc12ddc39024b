import dataclasses
import datetime as dt

import numpy as np
import pytest

from priceopt.core import DomainError, discount_to_price
from priceopt.elasticity import build_price_ladder
from priceopt.ingest import load_dataset
from priceopt.optimizer import brute_force_optimal, sweep_budget
from priceopt.simulate import (
    AbReport,
    ElasticityMix,
    Market,
    MarketSpec,
    generate_market,
    gross_margin,
    run_ab_test,
    simulate_day,
    top_share,
)


@pytest.fixture(scope="module")
def big():
    return generate_market(MarketSpec(n_products=1000, seed=7))


@pytest.fixture(scope="module")
def small():
    return generate_market(MarketSpec(n_products=60, seed=3))


def realized_totals(market):
    tot = {}
    for o in market.dataset.price_history:
        tot[o.product_id] = tot.get(o.product_id, 0.0) + o.quantity_sold
    return np.array(list(tot.values()))


@pytest.mark.parametrize("rev,cost,gm", [(100, 60, 0.4), (100, 100, 0.0), (100, 0, 1.0)])
def test_gross_margin(rev, cost, gm):
    assert gross_margin(rev, cost) == pytest.approx(gm, abs=1e-15)


def test_gross_margin_needs_revenue():
    with pytest.raises(DomainError):
        gross_margin(0, 10)


def test_base_price_without_noise_gives_base_demand(small):
    sales = simulate_day(small, small.baseline_prices(), noise=False)
    for o in sales:
        assert o.quantity_sold == min(small.base_demand[o.product_id], small.stock[o.product_id])


def test_price_cut_with_known_elasticity(small):
    pid = small.product_ids[0]
    m = dataclasses.replace(small, base_price={**small.base_price, pid: 140000},
                            base_demand={**small.base_demand, pid: 7.0},
                            true_ed={**small.true_ed, pid: -4.0})
    prices = {**m.baseline_prices(), pid: 120000}
    obs = {o.product_id: o for o in simulate_day(m, prices, noise=False)}
    assert obs[pid].quantity_sold == 11.0


def test_noise_law_of_large_numbers():
    m = generate_market(MarketSpec(n_products=2, seed=4, stock_days=100.0))
    pid = m.product_ids[0]
    draws = [simulate_day(m, m.baseline_prices(), seed=s)[0].quantity_sold for s in range(10_000)]
    assert abs(np.mean(draws) - m.base_demand[pid]) / m.base_demand[pid] < 0.02


def test_missing_price(small):
    prices = small.baseline_prices()
    prices.pop(small.product_ids[0])
    with pytest.raises(DomainError, match="no price"):
        simulate_day(small, prices)


def test_generator_deterministic(tmp_path):
    spec = MarketSpec(n_products=30, seed=11, n_days_history=20, users_per_day=40)
    a, b = generate_market(spec), generate_market(spec)
    a.save(tmp_path / "a")
    b.save(tmp_path / "b")
    for name in ("catalog.csv", "price_history.csv", "clickstream.csv", "sort_rank.csv", "truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pareto_target(big):
    assert abs(top_share(realized_totals(big), 0.2) - 0.8) <= 0.05


def test_elasticity_shape(big):
    eds = np.array(list(big.true_ed.values()))
    assert np.mean((eds >= -1) & (eds <= 1)) >= 0.6
    assert eds.min() >= -5 and eds.max() <= 5
    assert (eds > 1).any() and (eds < -1).any()


def test_history_shape(big):
    d = big.dataset
    days = {o.date for o in d.price_history}
    assert len(days) >= 90 and d.as_of == max(days) + dt.timedelta(days=1)
    for o in d.price_history[:500]:
        assert o.price == discount_to_price(d.entry(o.product_id).mrp, o.discount_pct)


@pytest.mark.parametrize("spec", [
    MarketSpec(n_products=10, pareto_share=(0.9, 0.1)),
    MarketSpec(n_products=1),
    MarketSpec(n_products=10, pareto_share=(0.0, 0.8)),
    MarketSpec(n_products=10, noise="gaussian"),
])
def test_infeasible_specs(spec):
    with pytest.raises(DomainError):
        generate_market(spec)


def test_save_load_round_trip(small, tmp_path):
    small.save(tmp_path)
    back = Market.load(tmp_path)
    assert back.base_demand == small.base_demand and back.true_ed == small.true_ed
    assert back.stock == small.stock and back.buying_cost == small.buying_cost
    assert len(load_dataset(tmp_path, small.dataset.as_of).catalog) == 60


def test_aa_test(big):
    rep = run_ab_test(big, big.baseline_prices(), big.baseline_prices(), n_days=5, split_seed=1)
    assert rep.users_a == rep.users_b == 5000
    assert abs(rep.revenue_uplift_pct) < 1.0


def test_ab_needs_a_day(small):
    with pytest.raises(DomainError):
        run_ab_test(small, small.baseline_prices(), small.baseline_prices(), n_days=0)


def test_uniformly_elastic_market_gains(tmp_path):
    m = generate_market(MarketSpec(n_products=10, seed=5))
    m = dataclasses.replace(m, true_ed={p: -3.0 for p in m.product_ids})
    ladders = [build_price_ladder(m.dataset.entry(p), m.base_demand[p], -3.0, 5) for p in m.product_ids]
    best = sweep_budget(ladders).best
    oracle = brute_force_optimal(ladders)
    assert best.expected_revenue >= 0.99 * oracle.expected_revenue
    prices = dict(zip(best.product_ids, best.prices))
    rep = run_ab_test(m, m.baseline_prices(), prices, n_days=5, split_seed=0)
    assert rep.revenue_uplift_pct > 0


def test_report_json_round_trip():
    rep = AbReport(100.0, 101.0, 0.4, 0.41, 1.0, 2.5, 5, 3, 5000, 5000)
    assert AbReport.from_json(rep.to_json()) == rep


def test_elasticity_mix_rejects_negative_weights():
    with pytest.raises(DomainError):
        ElasticityMix(inelastic_weight=-1).sample(np.random.default_rng(0), 5)
