import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priceopt.core import CatalogEntry, DemandObservation, DomainError, discount_to_price, to_paise
from priceopt.elasticity import (
    ColdStartNeeded,
    ElasticityEstimate,
    build_price_ladder,
    cold_start_elasticity,
    estimate_elasticity,
    project_demand,
    read_elasticities,
    write_elasticities,
)
from priceopt.features import EmbeddingTable

D0 = dt.date(2024, 5, 1)


def history(pairs, pid="X"):
    """Observations from (price in rupees, quantity) pairs on consecutive days."""
    return [DemandObservation(pid, D0 + dt.timedelta(days=i), to_paise(p), 0.0, q, 10)
            for i, (p, q) in enumerate(pairs)]


def known(eds):
    return {pid: ElasticityEstimate(pid, ed, "arc", 2, D0) for pid, ed in eds.items()}


def unit(sim):
    return np.array([sim, np.sqrt(1 - sim ** 2)])


def entry(mrp=2000, base=30.0):
    return CatalogEntry("A", "b", "t", "men", to_paise(mrp), to_paise(mrp) // 2, base)


def test_price_drop_example():
    est = estimate_elasticity(history([(1400, 7), (1200, 11)]))
    assert est.ed == -4.0 and est.method == "arc" and est.n_points == 2
    assert est.updated_on == D0 + dt.timedelta(days=2)


def test_arc_uses_two_most_recent_distinct_prices():
    est = estimate_elasticity(history([(1000, 50), (1400, 7), (1400, 7), (1200, 11), (1200, 11)]))
    assert est.ed == -4.0


def test_unchanged_quantity_is_inelastic():
    assert estimate_elasticity(history([(500, 4), (450, 4)])).ed == 0.0


def test_power_law_regression():
    prices = [400, 450, 500, 550, 600, 700]
    est = estimate_elasticity(history([(p, 1e7 * p ** -2.0) for p in prices]))
    assert est.method == "regression" and est.n_points == 6
    assert est.ed == pytest.approx(-2.0, abs=1e-6)


def test_clamped_to_bound():
    assert estimate_elasticity(history([(1000, 1), (990, 50)])).ed == -5.0
    assert estimate_elasticity(history([(1000, 1), (1010, 50)])).ed == 5.0


def test_zero_base_quantity():
    assert estimate_elasticity(history([(1000, 0), (900, 3)])).ed == -5.0
    assert estimate_elasticity(history([(1000, 0), (900, 0)])).ed == 0.0


def test_single_price_needs_cold_start():
    with pytest.raises(ColdStartNeeded):
        estimate_elasticity(history([(800, 3), (800, 5)]))
    with pytest.raises(DomainError):
        estimate_elasticity([])


def test_cold_start_single_neighbor():
    emb = EmbeddingTable(2, {"new": unit(0.3), "k1": unit(0.9)})
    est = cold_start_elasticity("new", emb, known({"k1": -3.0}))
    assert est.ed == -3.0 and est.method == "cold_start"


def test_cold_start_symmetric_neighbors():
    emb = EmbeddingTable(2, {"new": np.array([1.0, 0.0]), "a": np.array([1.0, 1.0]), "b": np.array([1.0, -1.0])})
    assert cold_start_elasticity("new", emb, known({"a": -1.0, "b": -3.0})).ed == pytest.approx(-2.0)


def test_cold_start_weighted_mean():
    sims = [1.0, 0.8, 0.6, 0.5, 0.2, -0.3]
    eds = [-1.0, -2.0, -3.0, -4.0, -5.0, 5.0]
    vecs = {f"k{i}": unit(s) for i, s in enumerate(sims)}
    vecs["new"] = np.array([1.0, 0.0])
    est = cold_start_elasticity("new", EmbeddingTable(2, vecs), known({f"k{i}": e for i, e in enumerate(eds)}), k=5)
    # top five by similarity; the sixth (-0.3) is not a neighbour
    assert est.ed == pytest.approx((-1 - 1.6 - 1.8 - 2.0 - 1.0) / 3.1)
    assert est.n_points == 5


def test_cold_start_needs_embedding():
    emb = EmbeddingTable(2, {"k1": unit(0.5)})
    with pytest.raises(DomainError, match="no embedding"):
        cold_start_elasticity("new", emb, known({"k1": -1.0}))


def test_project_demand_examples():
    assert project_demand(1400, 7, -4.0, 1200) == 11.0
    assert project_demand(1400, 7, -4.0, 1400) == 7
    assert project_demand(100, 2, -5, 200) == 0.0


@settings(max_examples=100)
@given(p=st.integers(1, 10**7), d=st.floats(0, 1e6), ed=st.floats(-5, 5))
def test_project_demand_identity(p, d, ed):
    assert project_demand(p, d, ed, p) == d


def test_ladder_example():
    lad = build_price_ladder(entry(), 7, -4.0, 5)
    assert [e.discount_pct for e in lad.entries] == [25, 30, 35]
    assert lad.prices == [to_paise(1500), to_paise(1400), to_paise(1300)]
    assert lad.demands == pytest.approx([5.0, 7.0, 9.0], abs=1e-12)


def test_ladder_inelastic():
    assert build_price_ladder(entry(), 6.5, 0.0, 5).demands == [6.5, 6.5, 6.5]


def test_ladder_clamps_and_keeps_three_slots():
    low = build_price_ladder(entry(base=0.0), 4, -2.0, 5)
    assert [e.discount_pct for e in low.entries] == [0, 0, 5]
    assert low.entries[0] == low.entries[1]
    high = build_price_ladder(entry(base=88.0), 4, -2.0, 5)
    assert [e.discount_pct for e in high.entries] == [83, 88, 90]


@settings(max_examples=200)
@given(mrp=st.integers(100, 20_000), base=st.integers(0, 89), delta=st.integers(1, 20),
       demand=st.floats(0, 500), ed=st.floats(-5, 5))
def test_ladder_sign_coherence(mrp, base, delta, demand, ed):
    lad = build_price_ladder(entry(mrp, float(base)), demand, ed, delta)
    assert len(lad.entries) == 3
    mid = lad.entries[1]
    assert mid.discount_pct == base
    assert mid.price == discount_to_price(to_paise(mrp), base)
    assert mid.projected_demand == demand
    assert lad.prices[0] >= lad.prices[1] >= lad.prices[2]
    assert all(d >= 0 for d in lad.demands)
    # slots run from highest to lowest price
    if ed < 0:
        assert lad.demands[0] <= lad.demands[1] <= lad.demands[2]
    elif ed > 0:
        assert lad.demands[0] >= lad.demands[1] >= lad.demands[2]


def test_elasticity_csv_round_trip(tmp_path):
    ests = [ElasticityEstimate("B", -0.1 / 3, "regression", 6, D0),
            ElasticityEstimate("A", 2.5, "cold_start", 5, D0)]
    write_elasticities(ests, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "product_id,ed,method,n_points,updated_on"
    back = read_elasticities(tmp_path / "e.csv")
    assert back == {e.product_id: e for e in ests}
