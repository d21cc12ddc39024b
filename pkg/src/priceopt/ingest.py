"""Flat-file loading and validation of the four input sources.

Expected files under the data directory (UTF-8 CSV with header, ISO dates)::

    catalog.csv        product_id,brand,article_type,gender,mrp,buying_cost,base_discount_pct,color
    price_history.csv  product_id,date,hour,price,discount_pct,quantity_sold,inventory
    clickstream.csv    user_id,product_id,event_type,timestamp
    sort_rank.csv      product_id,rank,score

Bad rows are rejected into a report instead of aborting the load; the load
only fails when a file's reject share exceeds ``max_reject_fraction``.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .core import (
    CatalogEntry,
    ClickstreamEvent,
    DemandObservation,
    DomainError,
    SortRankRecord,
    format_inr,
    price_to_discount,
    to_paise,
)

log = logging.getLogger(__name__)

CATALOG_COLUMNS = ["product_id", "brand", "article_type", "gender", "mrp",
                   "buying_cost", "base_discount_pct", "color"]
PRICE_COLUMNS = ["product_id", "date", "hour", "price", "discount_pct",
                 "quantity_sold", "inventory"]
CLICK_COLUMNS = ["user_id", "product_id", "event_type", "timestamp"]
RANK_COLUMNS = ["product_id", "rank", "score"]

FILES = {
    "catalog": "catalog.csv",
    "price_history": "price_history.csv",
    "clickstream": "clickstream.csv",
    "sort_ranks": "sort_rank.csv",
}


@dataclass(frozen=True)
class Violation:
    source: str
    row: int
    reason: str
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def add(self, source: str, row: int, reason: str, detail: str = "") -> None:
        self.violations.append(Violation(source, row, reason, detail))

    def counts(self) -> dict[str, int]:
        return dict(Counter(v.reason for v in self.violations))

    def reasons(self) -> list[str]:
        return [v.reason for v in self.violations]


class ValidationError(DomainError):
    def __init__(self, message: str, counts: dict[str, int]):
        super().__init__(f"{message}: {counts}")
        self.counts = counts


@dataclass
class Dataset:
    catalog: list[CatalogEntry]
    price_history: list[DemandObservation]
    clickstream: list[ClickstreamEvent]
    sort_ranks: list[SortRankRecord]
    as_of: dt.date
    rejects: ValidationReport = field(default_factory=ValidationReport)

    def __post_init__(self):
        self._by_id = {e.product_id: e for e in self.catalog}
        self._history_index = None

    @property
    def product_ids(self) -> list[str]:
        return [e.product_id for e in self.catalog]

    def entry(self, product_id: str) -> CatalogEntry:
        return self._by_id[product_id]

    def has_product(self, product_id: str) -> bool:
        return product_id in self._by_id

    def history_dates(self) -> list[dt.date]:
        return sorted({o.date for o in self.price_history})

    def history_for(self, product_id: str) -> list[DemandObservation]:
        if self._history_index is None or self._history_index[0] != len(self.price_history):
            index = defaultdict(list)
            for o in self.price_history:
                index[o.product_id].append(o)
            for rows in index.values():
                rows.sort(key=lambda o: o.date)
            self._history_index = (len(self.price_history), index)
        return list(self._history_index[1].get(product_id, []))


def _read_rows(path: Path, columns: list[str]) -> Iterator[tuple[int, dict]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path.name} missing columns", {"missing column": len(missing)})
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _check_fraction(name: str, n_rows: int, report: ValidationReport, limit: float) -> None:
    bad = [v for v in report.violations if v.source == name]
    if n_rows and len(bad) / n_rows > limit:
        counts = dict(Counter(v.reason for v in bad))
        raise ValidationError(f"{name}: {len(bad)}/{n_rows} rows rejected", counts)


def _parse_catalog(path: Path, report: ValidationReport) -> tuple[list[CatalogEntry], int]:
    name, seen, out, n = path.name, set(), [], 0
    for lineno, row in _read_rows(path, CATALOG_COLUMNS):
        n += 1
        try:
            entry = CatalogEntry(
                product_id=row["product_id"].strip(),
                brand=row["brand"],
                article_type=row["article_type"],
                gender=row["gender"],
                mrp=to_paise(row["mrp"]),
                buying_cost=to_paise(row["buying_cost"]),
                base_discount_pct=float(row["base_discount_pct"]),
                color=row.get("color") or "",
            )
        except (ValueError, ArithmeticError, TypeError) as exc:
            report.add(name, lineno, "malformed row", str(exc))
            continue
        problems = entry.violations()
        if entry.product_id in seen:
            problems.append("duplicate product")
        if problems:
            for p in problems:
                report.add(name, lineno, p, entry.product_id)
            continue
        seen.add(entry.product_id)
        out.append(entry)
    return out, n


def aggregate_hours(rows: Iterable[tuple[CatalogEntry, dt.date, int, int, float, int, int]]
                    ) -> list[DemandObservation]:
    """Collapse hour-level rows to one observation per product-day.

    Quantities are summed; price is the quantity-weighted mean (plain mean
    when nothing sold); inventory is the end-of-day value from the latest hour.
    """
    groups = defaultdict(list)
    for entry, date, hour, price, disc, qty, inv in rows:
        groups[(entry.product_id, date)].append((hour, price, disc, qty, inv, entry))
    out = []
    for (pid, date), items in groups.items():
        items.sort(key=lambda t: t[0])
        entry = items[0][5]
        qty = sum(t[3] for t in items)
        discounts = {t[2] for t in items}
        if len(items) == 1 or len(discounts) == 1:
            price, disc = items[0][1], items[0][2]
        else:
            if qty > 0:
                mean = sum(t[1] * t[3] for t in items) / qty
            else:
                mean = sum(t[1] for t in items) / len(items)
            price = int(round(mean))
            disc = price_to_discount(entry.mrp, price)
        out.append(DemandObservation(pid, date, price, disc, qty, items[-1][4]))
    out.sort(key=lambda o: (o.product_id, o.date))
    return out


def _parse_prices(path: Path, catalog: dict[str, CatalogEntry], as_of: dt.date,
                  report: ValidationReport) -> tuple[list[DemandObservation], int]:
    name, kept, n = path.name, [], 0
    for lineno, row in _read_rows(path, PRICE_COLUMNS):
        n += 1
        try:
            pid = row["product_id"].strip()
            date = dt.date.fromisoformat(row["date"])
            hour = int(row["hour"]) if row["hour"] not in ("", None) else 0
            price = to_paise(row["price"])
            disc = float(row["discount_pct"])
            qty = int(row["quantity_sold"])
            inv = int(row["inventory"])
        except (ValueError, ArithmeticError, TypeError) as exc:
            report.add(name, lineno, "malformed row", str(exc))
            continue
        entry = catalog.get(pid)
        if entry is None:
            report.add(name, lineno, "unknown product", pid)
            continue
        if date >= as_of:
            report.add(name, lineno, "date not before as_of", row["date"])
            continue
        problems = DemandObservation(pid, date, price, disc, qty, inv).violations(entry.mrp)
        if problems:
            for p in problems:
                report.add(name, lineno, p, pid)
            continue
        kept.append((entry, date, hour, price, disc, qty, inv))
    return aggregate_hours(kept), n


def _parse_clicks(path: Path, catalog: dict[str, CatalogEntry],
                  report: ValidationReport) -> tuple[list[ClickstreamEvent], int]:
    name, out, n = path.name, [], 0
    for lineno, row in _read_rows(path, CLICK_COLUMNS):
        n += 1
        try:
            ev = ClickstreamEvent(row["user_id"], row["product_id"].strip(),
                                  row["event_type"], dt.datetime.fromisoformat(row["timestamp"]))
        except (ValueError, TypeError) as exc:
            report.add(name, lineno, "malformed row", str(exc))
            continue
        if ev.product_id not in catalog:
            report.add(name, lineno, "unknown product", ev.product_id)
            continue
        problems = ev.violations()
        if problems:
            for p in problems:
                report.add(name, lineno, p, ev.event_type)
            continue
        out.append(ev)
    out.sort(key=lambda e: (e.timestamp, e.user_id, e.product_id, e.event_type))
    return out, n


def _parse_ranks(path: Path, catalog: dict[str, CatalogEntry],
                 report: ValidationReport) -> tuple[list[SortRankRecord], int]:
    name, seen, out, n = path.name, set(), [], 0
    for lineno, row in _read_rows(path, RANK_COLUMNS):
        n += 1
        try:
            rec = SortRankRecord(row["product_id"].strip(), int(row["rank"]), float(row["score"]))
        except (ValueError, TypeError) as exc:
            report.add(name, lineno, "malformed row", str(exc))
            continue
        if rec.product_id not in catalog:
            report.add(name, lineno, "unknown product", rec.product_id)
            continue
        problems = rec.violations()
        if rec.product_id in seen:
            problems.append("duplicate rank row")
        if problems:
            for p in problems:
                report.add(name, lineno, p, rec.product_id)
            continue
        seen.add(rec.product_id)
        out.append(rec)
    out.sort(key=lambda r: (r.rank, r.product_id))
    return out, n


def load_dataset(root: str | Path, as_of: dt.date, max_reject_fraction: float = 0.01) -> Dataset:
    """Load and validate a data directory into a :class:`Dataset`.

    Raises ``FileNotFoundError`` for a missing input file and
    :class:`ValidationError` when more than ``max_reject_fraction`` of any
    file's rows are rejected. Otherwise rejects are kept on ``Dataset.rejects``.
    """
    root = Path(root)
    paths = {k: root / v for k, v in FILES.items()}
    for key, p in paths.items():
        if not p.is_file():
            raise FileNotFoundError(f"missing input file {p}")

    report = ValidationReport()
    catalog, n_cat = _parse_catalog(paths["catalog"], report)
    _check_fraction(paths["catalog"].name, n_cat, report, max_reject_fraction)
    catalog.sort(key=lambda e: e.product_id)
    by_id = {e.product_id: e for e in catalog}

    history, n_hist = _parse_prices(paths["price_history"], by_id, as_of, report)
    clicks, n_click = _parse_clicks(paths["clickstream"], by_id, report)
    ranks, n_rank = _parse_ranks(paths["sort_ranks"], by_id, report)
    for key, n in (("price_history", n_hist), ("clickstream", n_click), ("sort_ranks", n_rank)):
        _check_fraction(paths[key].name, n, report, max_reject_fraction)

    if report:
        log.warning("rejected %d rows: %s", len(report), report.counts())
    return Dataset(catalog, history, clicks, ranks, as_of, report)


def validate_dataset(d: Dataset) -> ValidationReport:
    """Check every dataset invariant; an empty report means the dataset is valid.

    Row provenance is ``(collection name, index within the collection)``.
    """
    report = ValidationReport()
    seen = set()
    for i, e in enumerate(d.catalog):
        for p in e.violations():
            report.add("catalog", i, p, e.product_id)
        if e.product_id in seen:
            report.add("catalog", i, "duplicate product", e.product_id)
        seen.add(e.product_id)
    mrp = {e.product_id: e.mrp for e in d.catalog}

    days = set()
    pairs = set()
    for i, o in enumerate(d.price_history):
        if o.product_id not in mrp:
            report.add("price_history", i, "unknown product", o.product_id)
            problems = o.violations()
        else:
            problems = o.violations(mrp[o.product_id])
        for p in problems:
            report.add("price_history", i, p, o.product_id)
        if (o.product_id, o.date) in pairs:
            report.add("price_history", i, "duplicate product-day", f"{o.product_id} {o.date}")
        pairs.add((o.product_id, o.date))
        days.add(o.date)
    if days:
        first, last = min(days), max(days)
        if len(days) != (last - first).days + 1:
            report.add("price_history", -1, "history not contiguous", f"{first}..{last}")
        if last != d.as_of - dt.timedelta(days=1):
            report.add("price_history", -1, "history does not end at as_of - 1", str(last))

    for i, ev in enumerate(d.clickstream):
        if ev.product_id not in mrp:
            report.add("clickstream", i, "unknown product", ev.product_id)
        for p in ev.violations():
            report.add("clickstream", i, p, ev.event_type)

    ranked = set()
    for i, r in enumerate(d.sort_ranks):
        if r.product_id not in mrp:
            report.add("sort_ranks", i, "unknown product", r.product_id)
        for p in r.violations():
            report.add("sort_ranks", i, p, r.product_id)
        if r.product_id in ranked:
            report.add("sort_ranks", i, "duplicate rank row", r.product_id)
        ranked.add(r.product_id)
    return report


def _fmt_float(x: float) -> str:
    return repr(float(x))


def dataset_tables(d: Dataset) -> dict[str, tuple[list[str], list[list[str]]]]:
    """Canonical row tables for each file, sorted for stable output."""
    cat = [[e.product_id, e.brand, e.article_type, e.gender, format_inr(e.mrp),
            format_inr(e.buying_cost), _fmt_float(e.base_discount_pct), e.color]
           for e in sorted(d.catalog, key=lambda e: e.product_id)]
    hist = [[o.product_id, o.date.isoformat(), "0", format_inr(o.price), _fmt_float(o.discount_pct),
             str(int(o.quantity_sold)), str(o.inventory)]
            for o in sorted(d.price_history, key=lambda o: (o.product_id, o.date))]
    clicks = [[e.user_id, e.product_id, e.event_type, e.timestamp.isoformat()]
              for e in sorted(d.clickstream,
                              key=lambda e: (e.timestamp, e.user_id, e.product_id, e.event_type))]
    ranks = [[r.product_id, str(r.rank), _fmt_float(r.score)]
             for r in sorted(d.sort_ranks, key=lambda r: (r.rank, r.product_id))]
    return {
        "catalog": (CATALOG_COLUMNS, cat),
        "price_history": (PRICE_COLUMNS, hist),
        "clickstream": (CLICK_COLUMNS, clicks),
        "sort_ranks": (RANK_COLUMNS, ranks),
    }


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def serialize_dataset(d: Dataset) -> bytes:
    """Deterministic byte serialization (concatenated canonical CSVs)."""
    parts = []
    for key, (header, rows) in dataset_tables(d).items():
        parts.append(f"## {FILES[key]}\n")
        parts.append(_csv_text(header, rows))
    return "".join(parts).encode("utf-8")


def write_dataset(d: Dataset, root: str | Path) -> Path:
    """Write ``d`` as the four input CSVs under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for key, (header, rows) in dataset_tables(d).items():
        (root / FILES[key]).write_text(_csv_text(header, rows), encoding="utf-8")
    return root


def write_rejects(report: ValidationReport, path: str | Path) -> None:
    rows = [[v.source, str(v.row), v.reason, v.detail] for v in report.violations]
    Path(path).write_text(_csv_text(["source", "row", "reason", "detail"], rows), encoding="utf-8")


__all__ = [
    "Dataset", "ValidationReport", "ValidationError", "Violation",
    "load_dataset", "validate_dataset", "write_dataset", "serialize_dataset",
    "aggregate_hours", "write_rejects",
]
