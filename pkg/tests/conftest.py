import csv
import datetime as dt
from pathlib import Path

import pytest

from priceopt.core import discount_to_price, format_inr
from priceopt.elasticity import LadderEntry, PriceLadder
from priceopt.ingest import CATALOG_COLUMNS, CLICK_COLUMNS, PRICE_COLUMNS, RANK_COLUMNS

START = dt.date(2024, 3, 1)

CATALOG = [
    # product_id, brand, article_type, gender, mrp, buying_cost, base_discount_pct, color
    ["A1", "acme", "tshirts", "men", "2000.00", "800.00", "30", "black"],
    ["A2", "acme", "tshirts", "men", "1000.00", "400.00", "20", "white"],
    ["B1", "zeta", "jeans", "women", "3000.00", "1500.00", "10", "blue"],
]


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_fixture(root, n_days=40, extra_prices=(), extra_clicks=(), ranks=None, catalog=None):
    """Three-product data directory; returns the as_of day."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    catalog = catalog or CATALOG
    _write(root / "catalog.csv", CATALOG_COLUMNS, catalog)
    prices = []
    for row in catalog:
        pid, mrp, base = row[0], int(float(row[4]) * 100), float(row[6])
        for k in range(n_days):
            day = START + dt.timedelta(days=k)
            disc = base + (5 if k % 10 == 3 else 0)
            qty = 1 + (k + len(pid)) % 4
            prices.append([pid, day.isoformat(), 0, format_inr(discount_to_price(mrp, disc)), disc, qty, 50])
    prices.extend(extra_prices)
    _write(root / "price_history.csv", PRICE_COLUMNS, prices)
    clicks = []
    for u in range(6):
        t = dt.datetime.combine(START, dt.time(10, u))
        for j, (pid, ev) in enumerate([("A1", "list"), ("A1", "pdp"), ("A2", "click"), ("A1", "cart"),
                                       ("B1", "order")]):
            clicks.append([f"u{u}", pid, ev, (t + dt.timedelta(seconds=j)).isoformat()])
    clicks.extend(extra_clicks)
    _write(root / "clickstream.csv", CLICK_COLUMNS, clicks)
    if ranks is None:
        ranks = [["A1", 1, 3.5], ["B1", 2, 1.25]]
    _write(root / "sort_rank.csv", RANK_COLUMNS, ranks)
    return START + dt.timedelta(days=n_days)


@pytest.fixture
def fixture_dir(tmp_path):
    as_of = write_fixture(tmp_path / "data")
    return tmp_path / "data", as_of


def ladder(pid, pairs, discounts=(25.0, 30.0, 35.0)):
    """PriceLadder from (price in rupees, demand) pairs in slot order."""
    return PriceLadder(pid, tuple(LadderEntry(d, int(round(p * 100)), float(q))
                                  for d, (p, q) in zip(discounts, pairs)))


@pytest.fixture
def two_product_ladders():
    # slot order is ascending discount, so the highest price comes first
    p1 = ladder("P1", [(105, 9), (100, 10), (95, 12)])
    p2 = ladder("P2", [(210, 4), (200, 5), (190, 6)])
    return [p1, p2]


def random_ladders(rng, n):
    """Ladders with distinct, strictly decreasing prices and random demands."""
    out = []
    for i in range(n):
        base = int(rng.integers(200, 5000))
        step = int(rng.integers(5, 40)) * base // 100 + 1
        prices = [(base + step) / 100, base / 100, (base - step) / 100]
        demands = rng.uniform(0, 50, 3)
        out.append(ladder(f"R{i}", list(zip(prices, demands))))
    return out


def random_budget(rng, ladders):
    lo = sum(min(l.prices) for l in ladders)
    hi = sum(max(l.prices) for l in ladders)
    return float(rng.uniform(lo, hi))


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    outcome = "PASS" if report.passed else "FAIL"
    _CRITERIA[props["criterion"]] = (props.get("title", ""), outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        title, outcome, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d} {outcome}  {title}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def criterion(request, record_property):
    """Tag a test with its acceptance criterion; call ``.detail(text)`` to attach measurements."""
    mark = request.node.get_closest_marker("criterion")
    number, title = mark.args
    record_property("criterion", number)
    record_property("title", title)

    class Recorder:
        def detail(self, text):
            record_property("detail", text)
            print(f"criterion {number}: {text}")

    return Recorder()
