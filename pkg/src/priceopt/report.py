"""Human-readable summary of a finished run."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import DomainError, to_paise

SECTIONS = ("products", "models", "elasticity_histogram", "chosen_distribution", "revenue")
ED_BUCKETS = np.arange(-5, 6)                 # unit-width bins over [-5, 5]
SLOT_LABELS = ("-delta", "base", "+delta")    # discount offset of each ladder slot


def _read_csv(path: Path) -> list[dict]:
    if not path.is_file():
        return []
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def elasticity_histogram(eds) -> list[dict]:
    eds = np.clip(np.asarray(eds, dtype=float), -5, 5)
    counts, _ = np.histogram(eds, bins=ED_BUCKETS)
    total = max(1, len(eds))
    return [{"low": int(lo), "high": int(hi), "count": int(c), "share": c / total}
            for lo, hi, c in zip(ED_BUCKETS[:-1], ED_BUCKETS[1:], counts)]


def emit_report(run_dir: str | Path) -> dict:
    """Collect the five report sections from a run directory's output files."""
    run_dir = Path(run_dir)
    assignment = _read_csv(run_dir / "assignment.csv")
    if not assignment:
        raise DomainError("nothing to report")
    ladders = _read_csv(run_dir / "ladders.csv")
    eds = _read_csv(run_dir / "elasticities.csv")
    evals = {}
    if (run_dir / "eval.json").is_file():
        evals = json.loads((run_dir / "eval.json").read_text(encoding="utf-8"))

    slots: dict[str, dict[int, dict]] = {}
    for r in ladders:
        slots.setdefault(r["product_id"], {})[int(r["slot"])] = r
    dist = dict.fromkeys(SLOT_LABELS, 0)
    expected = baseline = 0.0
    for r in assignment:
        expected += float(r["expected_revenue"])
        lad = slots.get(r["product_id"])
        if not lad:
            continue
        price = to_paise(r["chosen_price"])
        disc = float(r["chosen_discount_pct"])
        # match on discount first so clamped duplicates resolve to the base slot
        slot = next((s for s in (1, 0, 2) if s in lad and float(lad[s]["discount_pct"]) == disc
                     and to_paise(lad[s]["price"]) == price), None)
        if slot is not None:
            dist[SLOT_LABELS[slot]] += 1
        base = lad.get(1)
        if base is not None:
            baseline += to_paise(base["price"]) / 100.0 * float(base["projected_demand"])

    models = {}
    for part, info in sorted(evals.items()):
        for kind, m in info.get("models", {}).items():
            models.setdefault(kind, []).append((m["n"], m["mae"], m["rmse"]))
    model_rows = {}
    for kind, rows in sorted(models.items()):
        n = np.array([r[0] for r in rows], dtype=float)
        mae = float(np.average([r[1] for r in rows], weights=n))
        rmse = float(np.sqrt(np.average([r[2] ** 2 for r in rows], weights=n)))
        model_rows[kind] = {"mae": mae, "rmse": rmse, "n": int(n.sum())}

    return {
        "products": {"count": len(assignment)},
        "models": model_rows,
        "elasticity_histogram": elasticity_histogram([float(r["ed"]) for r in eds]),
        "chosen_distribution": dist,
        "revenue": {"expected": expected, "baseline": baseline,
                    "uplift_pct": 100.0 * (expected - baseline) / baseline if baseline > 0 else None},
    }


def format_report(rep: dict) -> str:
    lines = [f"Products: {rep['products']['count']}", "", "Demand models (holdout)"]
    for kind, m in rep["models"].items():
        lines.append(f"  {kind:<20} mae {m['mae']:10.3f}  rmse {m['rmse']:10.3f}  n {m['n']}")
    lines += ["", "Elasticity distribution"]
    for b in rep["elasticity_histogram"]:
        lines.append(f"  [{b['low']:+d}, {b['high']:+d})  {b['count']:6d}  {b['share']:6.1%}")
    lines += ["", "Chosen ladder slot"]
    for label, n in rep["chosen_distribution"].items():
        lines.append(f"  {label:<7} {n}")
    rev = rep["revenue"]
    lines += ["", "Expected revenue",
              f"  recommended {rev['expected']:,.2f}",
              f"  baseline    {rev['baseline']:,.2f}"]
    if rev["uplift_pct"] is not None:
        lines.append(f"  uplift      {rev['uplift_pct']:+.2f}%")
    return "\n".join(lines) + "\n"
