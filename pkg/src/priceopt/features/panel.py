"""Dense product × day arrays over a Dataset, plus the per-day feature builders."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from ..core import DomainError
from ..ingest import Dataset

OBSERVED_COLUMNS = ["quantity_sold", "list_count", "pdp_count", "cart_count", "inventory"]
DOW_COLUMNS = [f"dow_{i}" for i in range(7)]
ENGINEERED_COLUMNS = ["sales_7d", "visibility_7d", "bag_ratio", "discount_pct"] + DOW_COLUMNS
WINDOW = 7


@dataclass
class Panel:
    product_ids: list[str]
    dates: list[dt.date]
    quantity: np.ndarray      # (P, T)
    price: np.ndarray         # (P, T) paise, 0 where missing
    discount: np.ndarray      # (P, T)
    inventory: np.ndarray     # (P, T)
    present: np.ndarray       # (P, T) bool, row exists
    events: dict[str, np.ndarray]  # event_type -> (P, T) counts
    bag_index: np.ndarray     # (P,) integer BAG group id
    base_discount: np.ndarray  # (P,)

    @property
    def first(self) -> dt.date:
        return self.dates[0]

    def day_index(self, day: dt.date) -> int:
        return (day - self.dates[0]).days

    def in_range(self, day: dt.date) -> bool:
        return bool(self.dates) and self.dates[0] <= day <= self.dates[-1]


def build_panel(d: Dataset) -> Panel:
    cached = getattr(d, "_panel", None)
    if cached is not None:
        return cached
    pids = d.product_ids
    pix = {p: i for i, p in enumerate(pids)}
    hist_dates = d.history_dates()
    if hist_dates:
        first, last = hist_dates[0], hist_dates[-1]
        dates = [first + dt.timedelta(days=k) for k in range((last - first).days + 1)]
    else:
        first, dates = d.as_of, []
    P, T = len(pids), len(dates)
    qty = np.zeros((P, T))
    price = np.zeros((P, T))
    disc = np.zeros((P, T))
    inv = np.zeros((P, T))
    present = np.zeros((P, T), dtype=bool)
    for o in d.price_history:
        i, t = pix[o.product_id], (o.date - first).days
        qty[i, t] = o.quantity_sold
        price[i, t] = o.price
        disc[i, t] = o.discount_pct
        inv[i, t] = o.inventory
        present[i, t] = True
    events = {k: np.zeros((P, T)) for k in ("list", "pdp", "click", "cart", "order")}
    for ev in d.clickstream:
        t = (ev.timestamp.date() - first).days
        if 0 <= t < T:
            events[ev.event_type][pix[ev.product_id], t] += 1
    bags: dict[tuple, int] = {}
    bag_index = np.array([bags.setdefault(e.bag, len(bags)) for e in d.catalog], dtype=int)
    base = np.array([e.base_discount_pct for e in d.catalog], dtype=float)
    panel = Panel(pids, dates, qty, price, disc, inv, present, events, bag_index, base)
    d._panel = panel
    return panel


def _check_day(panel: Panel, day: dt.date) -> int:
    if not panel.in_range(day):
        raise DomainError(f"{day} outside price history range")
    return panel.day_index(day)


def observed_block(panel: Panel, day: dt.date) -> np.ndarray:
    t = _check_day(panel, day)
    ev = panel.events
    return np.column_stack([
        panel.quantity[:, t], ev["list"][:, t], ev["pdp"][:, t], ev["cart"][:, t],
        panel.inventory[:, t],
    ])


def build_observed_features(d: Dataset, day: dt.date) -> dict[str, dict[str, float]]:
    """Counts for ``day`` only: sales, list views, product-page views, carts, stock."""
    panel = build_panel(d)
    block = observed_block(panel, day)
    return {pid: dict(zip(OBSERVED_COLUMNS, map(float, row)))
            for pid, row in zip(panel.product_ids, block)}


def engineered_block(panel: Panel, day: dt.date, discount: np.ndarray | None = None) -> np.ndarray:
    """Trailing-window features for ``day`` using days ``day-7 .. day-1``.

    ``day`` may be one past the last history day (the prediction day); its
    discount then defaults to each product's base discount.
    """
    t = panel.day_index(day)
    if t < WINDOW:
        raise DomainError(f"{day}: need {WINDOW} prior days of history, have {max(t, 0)}")
    if t > len(panel.dates):
        raise DomainError(f"{day} is more than one day past the history")
    window = slice(t - WINDOW, t)
    missing = ~panel.present[:, window].all(axis=1)
    if missing.any():
        pid = panel.product_ids[int(np.argmax(missing))]
        raise DomainError(f"insufficient history for product {pid} before {day}")
    sales = panel.quantity[:, window].sum(axis=1)
    vis = (panel.events["list"][:, window] + panel.events["pdp"][:, window]).sum(axis=1)
    group_total = np.bincount(panel.bag_index, weights=sales)[panel.bag_index]
    bag_ratio = np.divide(sales, group_total, out=np.zeros_like(sales), where=group_total > 0)
    if discount is None:
        discount = panel.discount[:, t] if t < len(panel.dates) else panel.base_discount
    dow = np.zeros((len(sales), 7))
    dow[:, day.weekday()] = 1.0
    return np.column_stack([sales, vis, bag_ratio, discount, dow])


def build_engineered_features(d: Dataset, day: dt.date) -> dict[str, dict[str, float]]:
    panel = build_panel(d)
    block = engineered_block(panel, day)
    return {pid: dict(zip(ENGINEERED_COLUMNS, map(float, row)))
            for pid, row in zip(panel.product_ids, block)}


def attach_sort_rank(d: Dataset) -> dict[str, float]:
    """Search score per product; products missing from the snapshot score 0."""
    scores = {pid: 0.0 for pid in d.product_ids}
    seen = set()
    for rec in d.sort_ranks:
        if rec.product_id in seen:
            raise DomainError(f"duplicate rank row for {rec.product_id}")
        seen.add(rec.product_id)
        if rec.product_id in scores:
            scores[rec.product_id] = float(rec.score)
    return scores
