"""Per-product price elasticity, demand projection, and three-point price ladders."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import CatalogEntry, DemandObservation, DomainError, Paise, discount_to_price
from .features.embeddings import EmbeddingTable

ED_BOUND = 5.0
MAX_DISCOUNT = 90.0
METHODS = ("regression", "arc", "cold_start")


class ColdStartNeeded(DomainError):
    """History has fewer than two distinct prices."""


@dataclass(frozen=True)
class ElasticityEstimate:
    product_id: str
    ed: float
    method: str
    n_points: int
    updated_on: dt.date


@dataclass(frozen=True)
class LadderEntry:
    discount_pct: float
    price: Paise
    projected_demand: float

    @property
    def revenue(self) -> float:
        """Projected revenue in rupees."""
        return self.price / 100.0 * self.projected_demand


@dataclass(frozen=True)
class PriceLadder:
    """Candidates ordered by discount: base - delta, base, base + delta."""

    product_id: str
    entries: tuple[LadderEntry, LadderEntry, LadderEntry]

    @property
    def prices(self) -> list[Paise]:
        return [e.price for e in self.entries]

    @property
    def demands(self) -> list[float]:
        return [e.projected_demand for e in self.entries]

    @property
    def revenues(self) -> list[float]:
        return [e.revenue for e in self.entries]


def clamp_ed(ed: float) -> float:
    return float(min(ED_BOUND, max(-ED_BOUND, ed)))


def estimate_elasticity(history: Sequence[DemandObservation],
                        updated_on: dt.date | None = None) -> ElasticityEstimate:
    """Elasticity from one product's price-quantity history.

    With at least five distinct prices and every quantity positive, the slope
    of ``ln Q`` on ``ln P`` is used. Otherwise, with two or more distinct
    prices, the arc formula ``(dQ/Q) * (P/dP)`` is applied to the two most
    recent days with different prices, taking the earlier day as ``(Q, P)``.
    Raises :class:`ColdStartNeeded` when fewer than two prices were seen.
    """
    if not history:
        raise DomainError("empty history")
    obs = sorted(history, key=lambda o: o.date)
    pid = obs[-1].product_id
    if updated_on is None:
        updated_on = obs[-1].date + dt.timedelta(days=1)
    prices = np.array([o.price for o in obs], dtype=float)
    qty = np.array([o.quantity_sold for o in obs], dtype=float)
    distinct = len(np.unique(prices))
    if distinct < 2:
        raise ColdStartNeeded(f"{pid}: fewer than two distinct prices")

    if distinct >= 5 and np.all(qty > 0):
        slope = np.polyfit(np.log(prices), np.log(qty), 1)[0]
        return ElasticityEstimate(pid, clamp_ed(slope), "regression", distinct, updated_on)

    latest = obs[-1]
    earlier = next(o for o in reversed(obs) if o.price != latest.price)
    d_q = latest.quantity_sold - earlier.quantity_sold
    d_p = latest.price - earlier.price
    if d_p == 0:
        raise RuntimeError("distinct-price filtering produced a zero price change")
    if earlier.quantity_sold == 0:
        # no base quantity: flat stays flat, any movement saturates the clamp
        ed = 0.0 if d_q == 0 else np.sign(d_q) * np.sign(d_p) * np.inf
    else:
        ed = (d_q * earlier.price) / (earlier.quantity_sold * d_p)
    return ElasticityEstimate(pid, clamp_ed(ed), "arc", distinct, updated_on)


def cold_start_elasticity(product_id: str, embeddings: EmbeddingTable,
                          known: Mapping[str, ElasticityEstimate] | Sequence[ElasticityEstimate],
                          k: int = 5, updated_on: dt.date | None = None) -> ElasticityEstimate:
    """Similarity-weighted mean elasticity of the ``k`` nearest embedded neighbours.

    Similarity is cosine; negative similarities get zero weight, and if every
    weight is zero the neighbours are averaged uniformly.
    """
    target = embeddings.get(product_id)
    if target is None:
        raise DomainError(f"no embedding for product {product_id}")
    if not isinstance(known, Mapping):
        known = {e.product_id: e for e in known}
    cands = [(pid, est) for pid, est in sorted(known.items())
             if pid != product_id and embeddings.get(pid) is not None]
    if not cands:
        raise DomainError("no known elasticities with embeddings")
    vecs = np.array([embeddings.get(pid) for pid, _ in cands])
    norms = np.linalg.norm(vecs, axis=1) * np.linalg.norm(target)
    sims = np.divide(vecs @ target, norms, out=np.zeros(len(cands)), where=norms > 0)
    order = np.argsort(-sims, kind="stable")[:k]
    eds = np.array([cands[i][1].ed for i in order])
    w = np.clip(sims[order], 0.0, None)
    ed = float(eds @ w / w.sum()) if w.sum() > 0 else float(eds.mean())
    if updated_on is None:
        updated_on = max(est.updated_on for _, est in cands)
    return ElasticityEstimate(product_id, clamp_ed(ed), "cold_start", len(order), updated_on)


def project_demand(base_price: float, base_demand: float, ed: float, new_price: float) -> float:
    """Demand at ``new_price`` by linear (point-elasticity) projection, floored at 0."""
    if base_price <= 0:
        raise DomainError("base_price must be positive")
    if base_demand < 0:
        raise DomainError("base_demand must be non-negative")
    return max(0.0, base_demand + base_demand * ed * (new_price - base_price) / base_price)


def build_price_ladder(entry: CatalogEntry, base_demand: float, ed: float,
                       delta_pct: float = 5) -> PriceLadder:
    """Three candidates at base discount minus/plus ``delta_pct`` percentage points.

    Discounts are clamped to [0, 90]; if that collapses two candidates they
    stay duplicated so the ladder always has three slots.
    """
    if delta_pct <= 0:
        raise DomainError("delta_pct must be positive")
    base_demand = max(0.0, float(base_demand))
    base = entry.base_discount_pct
    base_price = discount_to_price(entry.mrp, min(MAX_DISCOUNT, max(0.0, base)))
    entries = []
    for disc in (base - delta_pct, base, base + delta_pct):
        disc = float(min(MAX_DISCOUNT, max(0.0, disc)))
        price = discount_to_price(entry.mrp, disc)
        demand = project_demand(base_price, base_demand, ed, price)
        entries.append(LadderEntry(disc, price, demand))
    return PriceLadder(entry.product_id, tuple(entries))


ELASTICITY_COLUMNS = ["product_id", "ed", "method", "n_points", "updated_on"]


def write_elasticities(estimates: Sequence[ElasticityEstimate], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ELASTICITY_COLUMNS)
        for e in sorted(estimates, key=lambda e: e.product_id):
            w.writerow([e.product_id, repr(e.ed), e.method, e.n_points, e.updated_on.isoformat()])


def read_elasticities(path: str | Path) -> dict[str, ElasticityEstimate]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {r["product_id"]: ElasticityEstimate(r["product_id"], float(r["ed"]), r["method"],
                                                    int(r["n_points"]),
                                                    dt.date.fromisoformat(r["updated_on"]))
                for r in csv.DictReader(fh)}
