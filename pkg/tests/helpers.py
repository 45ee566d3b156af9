"""Test-only helpers: manifest writer for round-trips, and independent
oracles kept deliberately separate from the implementations they check."""

from __future__ import annotations

import base64
import csv
import json
from fractions import Fraction
from pathlib import Path

from chartbench.corpus import Sample

TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJ"
    "AAAACklEQVR4nGMAAQAABQABDQottAAAAABJRU5ErkJggg=="
)


def write_manifest(samples: list[Sample], directory: Path) -> Path:
    """Serialize samples back into manifest + CSV + image files."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "csv").mkdir(exist_ok=True)
    (directory / "images").mkdir(exist_ok=True)
    entries = []
    for sample in samples:
        csv_rel = f"csv/{sample.id}.csv"
        with open(directory / csv_rel, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(sample.table.headers)
            for row in sample.table.rows:
                writer.writerow([cell.raw for cell in row])
        entry = {
            "id": sample.id,
            "title": sample.title,
            "chart_type": sample.chart_type.label,
            "csv": csv_rel,
            "family": sample.dataset_family,
            "qa": [
                {
                    "qa_id": q.qa_id,
                    "question": q.question,
                    "gold": q.gold,
                    "category": q.category,
                }
                for q in sample.qa
            ],
        }
        if sample.original_image is not None:
            image_rel = f"images/{sample.id}.png"
            (directory / image_rel).write_bytes(TINY_PNG)
            entry["image"] = image_rel
        entries.append(entry)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"samples": entries}, indent=2), encoding="utf-8")
    return manifest


# ---- independent relaxed-match oracle ------------------------------------
#
# Judges from the generated ground values, never by re-parsing the strings
# the implementation sees, and does its tolerance comparison in exact
# rational arithmetic derived separately (interval form, Fraction(1, 20)).

FIVE_PERCENT = Fraction(1, 20)


def oracle_relaxed_correct(predicted_value: float, gold_value: float) -> bool:
    g = Fraction(gold_value)
    if g == 0:
        return Fraction(predicted_value) == 0
    p = Fraction(predicted_value)
    half_width = FIVE_PERCENT * abs(g)
    return g - half_width <= p <= g + half_width


def oracle_judgement(
    predicted_value: float | None,
    predicted_text: str | None,
    gold_value: float | None,
    gold_text: str | None,
) -> tuple[str, bool]:
    """(mode, correct) from the generator's ground truth for one pair."""
    if gold_value is not None:
        if predicted_value is None:
            return "relaxed", False
        return "relaxed", oracle_relaxed_correct(predicted_value, gold_value)
    assert gold_text is not None
    return "strict", (predicted_text or "") == gold_text


# ---- independent Pearson oracle -------------------------------------------


def oracle_pearson(xs: list[float], ys: list[float]) -> float:
    """Closed-form Pearson r in exact rational arithmetic (then one sqrt)."""
    assert len(xs) == len(ys) and xs
    n = len(xs)
    fx = [Fraction(x) for x in xs]
    fy = [Fraction(y) for y in ys]
    mean_x = sum(fx) / n
    mean_y = sum(fy) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(fx, fy))
    var_x = sum((a - mean_x) ** 2 for a in fx)
    var_y = sum((b - mean_y) ** 2 for b in fy)
    assert var_x > 0 and var_y > 0, "oracle undefined at zero variance"
    return float(cov) / (float(var_x) ** 0.5 * float(var_y) ** 0.5)


# ---- table-row count derivation (published percentage -> integer counts) --


def counts_matching_percent(percent_1dp: float, n: int) -> list[int]:
    """All integer counts c with round-half-away(100*c/n, 1) == percent_1dp."""
    matches = []
    target = round(percent_1dp * 10)
    for c in range(n + 1):
        q, r = divmod(1000 * c, n)
        if 2 * r >= n:
            q += 1
        if q == target:
            matches.append(c)
    return matches
