"""Synthetic markets with known elasticities, and an A/B harness over them.

A market's ground truth is, per product, a base price, a base daily demand
and an elasticity. Expected demand at any offered price is the linear
elasticity projection from the base point; realized sales are Poisson draws
around it, capped by the day's stock.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from .core import (
    CatalogEntry,
    ClickstreamEvent,
    DemandObservation,
    DomainError,
    SortRankRecord,
    discount_to_price,
)
from .elasticity import project_demand
from .ingest import Dataset, load_dataset, write_dataset

ARTICLE_TYPES = ["tshirts", "shirts", "jeans", "trousers", "dresses", "tops", "kurtas",
                 "shoes", "sandals", "watches", "bags", "jackets"]
BRANDS = [f"brand{i:02d}" for i in range(12)]
COLORS = ["black", "white", "blue", "red", "green", "grey"]
MRP_CHOICES = np.arange(499, 5000, 100)          # rupees
HISTORY_OFFSETS = np.array([-10.0, -5.0, 0.0, 5.0, 10.0])
DEFAULT_START = dt.date(2024, 1, 1)


@dataclass(frozen=True)
class ElasticityMix:
    """Mixture over [-5, 5]: a truncated normal on [-1, 1] plus two uniform tails."""

    inelastic_weight: float = 0.72
    inelastic_mean: float = -0.3
    inelastic_sd: float = 0.5
    elastic_weight: float = 0.23        # uniform on [-5, -1]
    giffen_weight: float = 0.05         # uniform on [1, 5]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        w = np.array([self.inelastic_weight, self.elastic_weight, self.giffen_weight])
        if np.any(w < 0) or w.sum() <= 0:
            raise DomainError("elasticity mix weights must be non-negative")
        comp = rng.choice(3, size=n, p=w / w.sum())
        a, b = (-1 - self.inelastic_mean) / self.inelastic_sd, (1 - self.inelastic_mean) / self.inelastic_sd
        inelastic = stats.truncnorm.rvs(a, b, loc=self.inelastic_mean, scale=self.inelastic_sd,
                                        size=n, random_state=rng)
        out = np.where(comp == 0, inelastic, 0.0)
        out = np.where(comp == 1, rng.uniform(-5, -1, n), out)
        return np.where(comp == 2, rng.uniform(1, 5, n), out)


@dataclass(frozen=True)
class MarketSpec:
    n_products: int = 1000
    pareto_share: tuple[float, float] = (0.2, 0.8)
    elasticity_mix: ElasticityMix = field(default_factory=ElasticityMix)
    noise: str = "poisson"              # or "none"
    seed: int = 0
    mean_daily_demand: float = 50.0
    n_days_history: int = 90
    start: dt.date = DEFAULT_START
    n_article_types: int = 10
    static_price_share: float = 0.03
    change_prob: float = 0.15           # daily chance of a new discount episode
    users_per_day: int = 300
    stock_days: float = 3.0

    def check(self) -> None:
        f, s = self.pareto_share
        if self.n_products < 2:
            raise DomainError("n_products must be at least 2")
        if not (0 < f < 1 and 0 < s < 1):
            raise DomainError(f"pareto_share components must lie in (0, 1): {self.pareto_share}")
        if s < f:
            raise DomainError(f"infeasible pareto_share {self.pareto_share}: top {f:.0%} "
                              f"of products cannot hold only {s:.0%} of quantity")
        if self.noise not in ("poisson", "none"):
            raise DomainError(f"unknown noise model {self.noise!r}")
        if self.n_days_history < 14:
            raise DomainError("need at least 14 days of history")
        if not 1 <= self.n_article_types <= len(ARTICLE_TYPES):
            raise DomainError("n_article_types out of range")


@dataclass
class Market:
    dataset: Dataset
    base_price: dict[str, int]          # paise
    base_demand: dict[str, float]
    true_ed: dict[str, float]
    buying_cost: dict[str, int]         # paise
    stock: dict[str, int]               # units available per day
    spec: dict = field(default_factory=dict)

    @property
    def product_ids(self) -> list[str]:
        return sorted(self.base_price)

    def baseline_prices(self) -> dict[str, int]:
        return dict(self.base_price)

    def expected_demand(self, prices: Mapping[str, int]) -> dict[str, float]:
        missing = [p for p in self.product_ids if p not in prices]
        if missing:
            raise DomainError(f"no price for {len(missing)} products, e.g. {missing[0]}")
        return {p: project_demand(self.base_price[p], self.base_demand[p], self.true_ed[p], prices[p])
                for p in self.product_ids}

    def save(self, root: str | Path) -> Path:
        root = Path(root)
        write_dataset(self.dataset, root)
        truth = {
            "as_of": self.dataset.as_of.isoformat(),
            "products": {p: {"base_price": self.base_price[p], "base_demand": self.base_demand[p],
                             "ed": self.true_ed[p], "buying_cost": self.buying_cost[p],
                             "stock": self.stock[p]} for p in self.product_ids},
            "spec": self.spec,
        }
        (root / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True), encoding="utf-8")
        return root

    @classmethod
    def load(cls, root: str | Path) -> "Market":
        root = Path(root)
        truth = json.loads((root / "truth.json").read_text(encoding="utf-8"))
        d = load_dataset(root, dt.date.fromisoformat(truth["as_of"]))
        prods = truth["products"]
        return cls(d, {p: v["base_price"] for p, v in prods.items()},
                   {p: v["base_demand"] for p, v in prods.items()},
                   {p: v["ed"] for p, v in prods.items()},
                   {p: v["buying_cost"] for p, v in prods.items()},
                   {p: v["stock"] for p, v in prods.items()}, truth.get("spec", {}))


def top_share(values, fraction: float) -> float:
    """Share of the total held by the largest ``fraction`` of entries."""
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    k = max(1, int(round(fraction * len(v))))
    total = v.sum()
    return float(v[:k].sum() / total) if total > 0 else 0.0


def _pareto_demand(rng, n, fraction, share, mean):
    if share == fraction:
        return np.full(n, mean)
    sigma = stats.norm.ppf(1 - fraction) - stats.norm.ppf(1 - share)
    raw = np.exp(sigma * rng.standard_normal(n))
    # tune the exponent so the sample itself hits the target share
    lo, hi = 0.0, 4.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if top_share(raw ** mid, fraction) < share:
            lo = mid
        else:
            hi = mid
    d = raw ** hi
    return d * (mean / d.mean())


def _history_discounts(rng, n_days, base, change_prob):
    disc = np.empty(n_days)
    current = base
    for t in range(n_days):
        if t == 0 or rng.random() < change_prob:
            current = base + rng.choice(HISTORY_OFFSETS)
        disc[t] = current
    # always close on the base discount for a few days, as after a sale
    disc[-3:] = base
    return np.clip(disc, 0.0, 90.0)


def _sessions(rng, day, n_users, user_pool, pids, types, weights):
    """Browsing sessions: a list view, then a funnel on products of one article type."""
    events = []
    by_type = {}
    for i, t in enumerate(types):
        by_type.setdefault(t, []).append(i)
    type_names = sorted(by_type)
    type_w = np.array([weights[by_type[t]].sum() for t in type_names])
    type_w /= type_w.sum()
    users = rng.choice(user_pool, size=n_users, replace=False)
    start = dt.datetime.combine(day, dt.time())
    for u in users:
        t = type_names[rng.choice(len(type_names), p=type_w)]
        members = np.array(by_type[t])
        w = weights[members] / weights[members].sum()
        k = min(len(members), int(rng.integers(3, 7)))
        shown = rng.choice(members, size=k, replace=False, p=w)
        ts = start + dt.timedelta(seconds=int(rng.integers(0, 86_000)))
        for i in shown:
            ts += dt.timedelta(seconds=int(rng.integers(1, 20)))
            events.append(ClickstreamEvent(u, pids[i], "list", ts))
            if rng.random() < 0.35:
                for ev, p in (("pdp", 1.0), ("click", 0.5), ("cart", 0.3), ("order", 0.5)):
                    if rng.random() >= p:
                        break
                    ts += dt.timedelta(seconds=int(rng.integers(1, 60)))
                    events.append(ClickstreamEvent(u, pids[i], ev, ts))
    return events


def generate_market(spec: MarketSpec) -> Market:
    """Draw a catalog, ground truth, price history, clickstream and sort ranks."""
    spec.check()
    ss = np.random.SeedSequence(spec.seed)
    r_cat, r_dem, r_ed, r_hist, r_click, r_rank = (np.random.default_rng(s) for s in ss.spawn(6))
    n = spec.n_products
    width = len(str(n))
    pids = [f"P{i:0{width}d}" for i in range(n)]
    types = [ARTICLE_TYPES[i] for i in r_cat.integers(0, spec.n_article_types, n)]
    catalog = []
    for i, pid in enumerate(pids):
        mrp = int(r_cat.choice(MRP_CHOICES)) * 100
        catalog.append(CatalogEntry(
            pid, BRANDS[int(r_cat.integers(len(BRANDS)))], types[i],
            ["men", "women", "unisex"][int(r_cat.integers(3))], mrp,
            int(round(mrp * r_cat.uniform(0.25, 0.45))), float(r_cat.choice(np.arange(15, 55, 5))),
            COLORS[int(r_cat.integers(len(COLORS)))]))

    f, s = spec.pareto_share
    demand = _pareto_demand(r_dem, n, f, s, spec.mean_daily_demand)
    ed = spec.elasticity_mix.sample(r_ed, n)
    static = np.zeros(n, dtype=bool)
    n_static = int(round(spec.static_price_share * n))
    if n_static:
        static[r_hist.choice(n, size=n_static, replace=False)] = True

    base_price = {e.product_id: e.base_price for e in catalog}
    stock = {pid: int(np.ceil(spec.stock_days * demand[i])) + 20 for i, pid in enumerate(pids)}
    days = [spec.start + dt.timedelta(days=k) for k in range(spec.n_days_history)]
    history = []
    for i, e in enumerate(catalog):
        if static[i]:
            disc = np.full(len(days), e.base_discount_pct)
        else:
            disc = _history_discounts(r_hist, len(days), e.base_discount_pct, spec.change_prob)
        for t, day in enumerate(days):
            price = discount_to_price(e.mrp, float(disc[t]))
            mu = project_demand(base_price[e.product_id], demand[i], ed[i], price)
            # recorded history holds whole units, so noise-free demand is rounded
            q = int(r_hist.poisson(mu)) if spec.noise == "poisson" else int(np.floor(mu + 0.5))
            q = min(q, stock[e.product_id])
            history.append(DemandObservation(e.product_id, day, price, float(disc[t]), q,
                                             int(stock[e.product_id] - q)))

    user_pool = np.array([f"U{i:05d}" for i in range(max(spec.users_per_day * 4, 10))])
    weights = np.sqrt(demand)
    clicks = []
    for day in days:
        clicks.extend(_sessions(r_click, day, spec.users_per_day, user_pool, pids, types, weights))

    score = np.log1p(demand * np.exp(r_rank.normal(0, 0.3, n)))
    order = np.argsort(-score, kind="stable")
    ranks = [SortRankRecord(pids[i], r + 1, float(round(score[i], 6))) for r, i in enumerate(order)]

    as_of = days[-1] + dt.timedelta(days=1)
    d = Dataset(catalog, history, clicks, ranks, as_of)
    spec_dict = asdict(spec)
    spec_dict["start"] = spec.start.isoformat()
    return Market(d, base_price, {p: float(demand[i]) for i, p in enumerate(pids)},
                  {p: float(ed[i]) for i, p in enumerate(pids)},
                  {e.product_id: e.buying_cost for e in catalog}, stock, spec_dict)


def simulate_day(market: Market, prices: Mapping[str, int], day: dt.date | int = 0, seed: int = 0,
                 noise: bool = True, traffic_share: float = 1.0) -> list[DemandObservation]:
    """Realized sales for one day at ``prices`` (paise), for a share of the traffic."""
    if not 0 < traffic_share <= 1:
        raise DomainError("traffic_share must lie in (0, 1]")
    if isinstance(day, int):
        day = market.dataset.as_of + dt.timedelta(days=day)
    expected = market.expected_demand(prices)
    rng = np.random.default_rng([seed, day.toordinal()])
    out = []
    for pid in market.product_ids:
        mu = expected[pid] * traffic_share
        cap = market.stock[pid] * traffic_share
        q = float(rng.poisson(mu)) if noise else mu
        q = min(q, cap)
        entry = market.dataset.entry(pid)
        disc = 100.0 * (1 - prices[pid] / entry.mrp)
        out.append(DemandObservation(pid, day, int(prices[pid]), disc, q, int(cap - q)))
    return out


def gross_margin(revenue: float, buying_cost_total: float) -> float:
    if revenue <= 0:
        raise DomainError("gross margin needs positive revenue")
    return (revenue - buying_cost_total) / revenue


@dataclass
class AbReport:
    revenue_a: float        # rupees
    revenue_b: float
    gm_a: float
    gm_b: float
    revenue_uplift_pct: float
    gm_uplift_pct: float
    n_days: int
    split_seed: int
    users_a: int = 0
    users_b: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AbReport":
        return cls(**json.loads(text))


def run_ab_test(market: Market, baseline_prices: Mapping[str, int], model_prices: Mapping[str, int],
                n_days: int = 5, split_seed: int = 0, n_users: int = 10_000) -> AbReport:
    """Arm A sees ``baseline_prices``, arm B ``model_prices``.

    Users are split exactly in half by ``split_seed``; every user shops the
    whole catalog, so each arm's expected demand is its traffic share of the
    market's demand at that arm's prices.
    """
    if n_days < 1:
        raise DomainError("n_days must be at least 1")
    market.expected_demand(baseline_prices)
    market.expected_demand(model_prices)
    rng = np.random.default_rng(split_seed)
    arm_b = np.zeros(n_users, dtype=bool)
    arm_b[rng.permutation(n_users)[: n_users // 2]] = True
    share_b = arm_b.sum() / n_users
    share_a = 1 - share_b
    totals = {}
    for arm, prices, share in (("a", baseline_prices, share_a), ("b", model_prices, share_b)):
        rev = cost = 0.0
        for k in range(n_days):
            sales = simulate_day(market, prices, k, seed=int(rng.integers(2**32)), traffic_share=share)
            for o in sales:
                rev += o.price / 100.0 * o.quantity_sold
                cost += market.buying_cost[o.product_id] / 100.0 * o.quantity_sold
        totals[arm] = (rev, cost)
    (ra, ca), (rb, cb) = totals["a"], totals["b"]
    gm_a, gm_b = gross_margin(ra, ca), gross_margin(rb, cb)
    return AbReport(ra, rb, gm_a, gm_b, 100.0 * (rb - ra) / ra, 100.0 * (gm_b - gm_a) / gm_a,
                    n_days, split_seed, int((~arm_b).sum()), int(arm_b.sum()))
