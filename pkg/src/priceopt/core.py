"""Domain types and money arithmetic shared across the package.

Money is carried as integer paise (1 INR = 100 paise) so that sums of prices
are exact. Use :func:`to_paise` / :func:`format_inr` at the I/O boundary.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Union

Paise = int

GENDERS = ("men", "women", "unisex")
EVENT_TYPES = ("list", "pdp", "click", "cart", "order")


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


def to_paise(amount: Union[str, int, float, Decimal]) -> Paise:
    """Convert a rupee amount to integer paise, rounding half up."""
    value = Decimal(str(amount)) * 100
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def format_inr(paise: Paise) -> str:
    sign = "-" if paise < 0 else ""
    whole, frac = divmod(abs(int(paise)), 100)
    return f"{sign}{whole}.{frac:02d}"


def paise_to_float(paise: Paise) -> float:
    return paise / 100.0


def discount_to_price(mrp: Paise, discount_pct: float) -> Paise:
    """Selling price after ``discount_pct`` percent off ``mrp``.

    Both ``mrp`` and the result are in paise; the result is rounded to the
    nearest paisa, halves rounding up.
    """
    if mrp <= 0:
        raise DomainError(f"mrp must be positive, got {mrp}")
    if not 0 <= discount_pct < 100:
        raise DomainError(f"discount out of range: {discount_pct}")
    d = Decimal(repr(float(discount_pct)))
    price = Decimal(int(mrp)) * (100 - d) / 100
    return int(price.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def price_to_discount(mrp: Paise, price: Paise) -> float:
    """Discount percentage that takes ``mrp`` down to ``price``."""
    if mrp <= 0:
        raise DomainError(f"mrp must be positive, got {mrp}")
    if price <= 0 or price > mrp:
        raise DomainError(f"price {price} outside (0, mrp={mrp}]")
    return 100.0 * (1.0 - price / mrp)


@dataclass(frozen=True)
class CatalogEntry:
    product_id: str
    brand: str
    article_type: str
    gender: str
    mrp: Paise
    buying_cost: Paise
    base_discount_pct: float
    color: str = ""

    @property
    def bag(self) -> tuple[str, str, str]:
        """(brand, article_type, gender) grouping key."""
        return (self.brand, self.article_type, self.gender)

    @property
    def base_price(self) -> Paise:
        return discount_to_price(self.mrp, self.base_discount_pct)

    def violations(self) -> list[str]:
        out = []
        if self.mrp <= 0:
            out.append("non-positive MRP")
        if self.buying_cost < 0:
            out.append("negative buying cost")
        if self.buying_cost > self.mrp:
            out.append("cost exceeds MRP")
        if not 0 <= self.base_discount_pct < 100:
            out.append("discount out of range")
        if self.gender not in GENDERS:
            out.append("unknown gender")
        return out


@dataclass(frozen=True)
class DemandObservation:
    """One product-day of sales.

    ``inventory`` is the stock left at the end of the day, so the stock on
    hand at day start was ``inventory + quantity_sold``. Recorded data holds
    integral quantities; noise-free simulations may produce fractional ones.
    """

    product_id: str
    date: dt.date
    price: Paise
    discount_pct: float
    quantity_sold: float
    inventory: int

    def violations(self, mrp: Paise | None = None) -> list[str]:
        out = []
        if not 0 <= self.discount_pct < 100:
            out.append("discount out of range")
        if self.quantity_sold < 0:
            out.append("negative quantity")
        if self.inventory < 0:
            out.append("negative inventory")
        if self.price <= 0:
            out.append("non-positive price")
        if mrp is not None and not out:
            # 1 paisa of slack for the rounding in discount_to_price
            if abs(discount_to_price(mrp, self.discount_pct) - self.price) > 1:
                out.append("price inconsistent with discount")
        return out


@dataclass(frozen=True)
class ClickstreamEvent:
    user_id: str
    product_id: str
    event_type: str
    timestamp: dt.datetime

    def violations(self) -> list[str]:
        if self.event_type not in EVENT_TYPES:
            return ["unknown event type"]
        return []


@dataclass(frozen=True)
class SortRankRecord:
    product_id: str
    rank: int
    score: float

    def violations(self) -> list[str]:
        out = []
        if self.rank < 1:
            out.append("non-positive rank")
        if not self.score >= 0:
            out.append("negative score")
        return out
