import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import START
from priceopt.core import CatalogEntry, ClickstreamEvent, DemandObservation, DomainError, SortRankRecord
from priceopt.features import (
    ENGINEERED_COLUMNS,
    OBSERVED_COLUMNS,
    EmbeddingTable,
    assemble_feature_matrix,
    assemble_training_matrix,
    attach_sort_rank,
    build_engineered_features,
    build_observed_features,
    build_sentences,
    cosine,
    feature_columns,
    train_product_embeddings,
)
from priceopt.ingest import Dataset, load_dataset


@pytest.fixture
def ds(fixture_dir):
    root, as_of = fixture_dir
    return load_dataset(root, as_of)


@pytest.fixture(scope="module")
def emb():
    events = []
    for u in range(20):
        t = dt.datetime(2024, 3, 1, 9)
        for j, pid in enumerate(["A1", "A2", "B1", "A2"]):
            events.append(ClickstreamEvent(f"u{u}", pid, "click", t + dt.timedelta(minutes=j)))
    return train_product_embeddings(events, dimension=16, epochs=2, seed=1)


def make_dataset(quantities, bags, clicks=(), ranks=(), start=START):
    """In-memory dataset: quantities is (products, days)."""
    q = np.asarray(quantities)
    catalog = [CatalogEntry(f"p{i}", b[0], b[1], "men", 100000, 40000, 20.0) for i, b in enumerate(bags)]
    hist = [DemandObservation(f"p{i}", start + dt.timedelta(days=t), 80000, 20.0, int(q[i, t]), 10)
            for i in range(q.shape[0]) for t in range(q.shape[1])]
    return Dataset(catalog, hist, list(clicks), list(ranks), start + dt.timedelta(days=q.shape[1]))


def test_observed_counts_for_one_day(ds):
    obs = build_observed_features(ds, START)
    assert obs["A1"] == {"quantity_sold": 3.0, "list_count": 6.0, "pdp_count": 6.0,
                         "cart_count": 6.0, "inventory": 50.0}
    # A2 only has clicks, which are not an observed column
    assert obs["A2"]["list_count"] == obs["A2"]["pdp_count"] == obs["A2"]["cart_count"] == 0
    later = build_observed_features(ds, START + dt.timedelta(days=1))
    assert later["A1"]["cart_count"] == 0


def test_observed_day_out_of_range(ds):
    with pytest.raises(DomainError):
        build_observed_features(ds, ds.as_of)


def test_engineered_features_hand_computed(ds):
    day = START + dt.timedelta(days=7)
    eng = build_engineered_features(ds, day)
    # quantities over days 0..6 are 1 + (k + 2) % 4 -> 3,4,1,2,3,4,1
    assert eng["A1"]["sales_7d"] == 18
    assert eng["A1"]["visibility_7d"] == 12
    assert eng["A1"]["bag_ratio"] == pytest.approx(0.5)
    assert eng["B1"]["bag_ratio"] == 1.0
    assert eng["A1"]["discount_pct"] == 30.0
    assert eng["A1"][f"dow_{day.weekday()}"] == 1.0
    assert sum(eng["A1"][f"dow_{i}"] for i in range(7)) == 1.0


def test_bag_ratio_three_and_one():
    q = np.zeros((2, 8))
    q[0, :3] = 1
    q[1, 6] = 1
    d = make_dataset(q, [("b", "t"), ("b", "t")])
    eng = build_engineered_features(d, START + dt.timedelta(days=7))
    assert eng["p0"]["bag_ratio"] == pytest.approx(0.75)
    assert eng["p1"]["bag_ratio"] == pytest.approx(0.25)


def test_constant_seller_sales_7d():
    d = make_dataset(np.ones((1, 8)), [("b", "t")])
    assert build_engineered_features(d, START + dt.timedelta(days=7))["p0"]["sales_7d"] == 7


def test_engineered_needs_seven_days(ds):
    with pytest.raises(DomainError, match="need 7 prior days"):
        build_engineered_features(ds, START + dt.timedelta(days=3))


def test_engineered_names_product_with_gap():
    d = make_dataset(np.ones((2, 10)), [("b", "t"), ("b", "t")])
    d = Dataset(d.catalog, [o for o in d.price_history if not (o.product_id == "p1" and o.date == START + dt.timedelta(days=4))],
                [], [], d.as_of)
    with pytest.raises(DomainError, match="p1"):
        build_engineered_features(d, START + dt.timedelta(days=8))


def test_sort_rank(ds):
    scores = attach_sort_rank(ds)
    assert scores == {"A1": 3.5, "A2": 0.0, "B1": 1.25}
    dup = Dataset(ds.catalog, ds.price_history, ds.clickstream,
                  ds.sort_ranks + [SortRankRecord("A1", 9, 0.1)], ds.as_of)
    with pytest.raises(DomainError, match="duplicate rank row"):
        attach_sort_rank(dup)


def test_sentences_collapse_and_weight():
    t = dt.datetime(2024, 1, 1)
    evs = [ClickstreamEvent("u", "a", "list", t), ClickstreamEvent("u", "a", "click", t + dt.timedelta(seconds=1)),
           ClickstreamEvent("u", "a", "order", t + dt.timedelta(seconds=2)),
           ClickstreamEvent("u", "b", "cart", t + dt.timedelta(seconds=3))]
    assert build_sentences(evs) == [[("a", 5.0), ("b", 3.0)]]


def _co_corpus(seed=0, users=50):
    rng = np.random.default_rng(seed)
    others = [f"r{i}" for i in range(20)]
    evs = []
    for u in range(users):
        t = dt.datetime(2024, 1, 1, 8)
        seq = list(rng.choice(others, size=3, replace=False))
        pos = int(rng.integers(0, 4))
        seq[pos:pos] = ["x1", "x2"]
        for j, pid in enumerate(seq):
            evs.append(ClickstreamEvent(f"u{u}", pid, "click", t + dt.timedelta(minutes=j)))
    return evs


def test_co_interacted_products_are_closer():
    table = train_product_embeddings(_co_corpus(), dimension=16, epochs=30, seed=0)
    v1, v2 = table.get("x1"), table.get("x2")
    sims = [cosine(v1, table.get(f"r{i}")) for i in range(20)]
    assert cosine(v1, v2) > max(sims)


def test_embeddings_deterministic_and_shaped(tmp_path):
    a = train_product_embeddings(_co_corpus(), dimension=16, epochs=1, seed=3)
    b = train_product_embeddings(_co_corpus(), dimension=16, epochs=1, seed=3)
    assert a.vectors.keys() == b.vectors.keys()
    assert all(np.array_equal(a.vectors[k], b.vectors[k]) for k in a.vectors)
    assert all(len(v) == 16 for v in a.vectors.values())
    a.save(tmp_path / "e.txt")
    back = EmbeddingTable.load(tmp_path / "e.txt")
    assert back.dimension == 16 and back.training_meta["seed"] == 3
    assert all(np.array_equal(back.vectors[k], a.vectors[k]) for k in a.vectors)
    line = (tmp_path / "e.txt").read_text().splitlines()[1].split()
    assert len(line) == 17


def test_degenerate_corpus():
    t = dt.datetime(2024, 1, 1)
    with pytest.raises(DomainError):
        train_product_embeddings([ClickstreamEvent("u", "a", "click", t)])
    with pytest.raises(DomainError):
        train_product_embeddings([ClickstreamEvent(f"u{i}", f"p{i}", "click", t) for i in range(5)])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_embedding_norms_bounded(seed):
    rng = np.random.default_rng(seed)
    t = dt.datetime(2024, 1, 1)
    evs = [ClickstreamEvent(f"u{rng.integers(10)}", f"p{rng.integers(8)}",
                            str(rng.choice(["click", "cart", "order", "pdp"])), t + dt.timedelta(seconds=i))
           for i in range(80)]
    table = train_product_embeddings(evs, dimension=8, epochs=3, seed=seed)
    m = table.matrix(sorted(table.vectors))
    assert np.all(np.isfinite(m))
    assert np.linalg.norm(m, axis=1).max() < 10


def test_feature_matrix_shape_and_order(ds, emb):
    day = START + dt.timedelta(days=10)
    fm = assemble_feature_matrix(ds, day, emb)
    assert fm.X.shape == (3, 5 + len(ENGINEERED_COLUMNS) + 1 + 16)
    assert fm.columns == feature_columns(16)
    assert fm.columns[:5] == OBSERVED_COLUMNS
    assert fm.product_ids == ["A1", "A2", "B1"]
    # label is the target day's quantity; observed block is the previous day's
    assert fm.y[0] == 1 + (10 + 2) % 4
    assert fm.X[0, 0] == 1 + (9 + 2) % 4
    again = assemble_feature_matrix(ds, day, emb)
    assert np.array_equal(fm.X, again.X) and np.array_equal(fm.y, again.y)
    vec = fm.vectors()[0]
    assert vec.sort_score == 3.5 and len(vec.embedding) == 16


def test_prediction_day_row_has_no_label(ds, emb):
    fm = assemble_feature_matrix(ds, ds.as_of, emb)
    assert fm.y is None
    disc = fm.X[:, fm.columns.index("discount_pct")]
    assert list(disc) == [30.0, 20.0, 10.0]


def test_missing_embeddings(ds):
    with pytest.raises(DomainError, match="missing embeddings"):
        assemble_feature_matrix(ds, START + dt.timedelta(days=10), EmbeddingTable(16, {}))


def test_training_matrix_and_csv(ds, emb, tmp_path):
    days = [START + dt.timedelta(days=k) for k in (8, 9)]
    fm = assemble_training_matrix(ds, days, emb)
    assert fm.X.shape[0] == 6 and len(fm.y) == 6
    fm.to_csv(tmp_path / "f.csv")
    header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["product_id", "date"] and header[-1] == "label"


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_features_finite_and_bag_ratios_sum_to_one(data):
    n_prod = data.draw(st.integers(1, 5))
    n_days = data.draw(st.integers(8, 12))
    q = np.array(data.draw(st.lists(st.lists(st.integers(0, 20), min_size=n_days, max_size=n_days),
                                    min_size=n_prod, max_size=n_prod)))
    bags = [("b", data.draw(st.sampled_from(["t1", "t2"]))) for _ in range(n_prod)]
    d = make_dataset(q, bags)
    day = START + dt.timedelta(days=data.draw(st.integers(7, n_days)))
    eng = build_engineered_features(d, day)
    vals = np.array([[v for v in row.values()] for row in eng.values()])
    assert np.all(np.isfinite(vals))
    assert np.all(vals[:, :2] >= 0)
    for bag in {"t1", "t2"}:
        members = [f"p{i}" for i, b in enumerate(bags) if b[1] == bag]
        ratios = [eng[p]["bag_ratio"] for p in members]
        assert all(0 <= r <= 1 for r in ratios)
        if members and sum(eng[p]["sales_7d"] for p in members) > 0:
            assert sum(ratios) == pytest.approx(1.0)
