"""Rendering of run results into the published table shapes.

The renderer is formatting only: every number it prints is already present
in the run summary (a plain JSON-able dict, schema `summary-v1`), so two
summaries are comparable exactly when their config digests match. Plain
text, Markdown, and CSV variants; the CSV carries raw (unrounded) values
for downstream analysis while the tables round to the conventional one
decimal (accuracies, extraction) or two decimals (error percentages,
survey means).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .erranalysis import ERROR_CODES, TallyCell
from .rounding import round_half_away

SUMMARY_SCHEMA = "summary-v1"

CATEGORY_ORDER = {
    "chartqa": ("human", "augmented"),
    "plotqa": (
        "arithmetic",
        "comparison",
        "compound",
        "data_retrieval",
        "min_max",
        "structural",
    ),
}

CATEGORY_LABELS = {
    "human": "Human",
    "augmented": "Augmented",
    "arithmetic": "Arithmetic",
    "comparison": "Comparison",
    "compound": "Compound",
    "data_retrieval": "Data-Retrieval",
    "min_max": "Min-Max",
    "structural": "Structural",
}

ERROR_LABELS = {
    "vqa_model_error": "VQA Model Error",
    "actually_correct": "Actually Correct",
    "bar_boundaries": "Bar Boundaries",
    "category_ambiguous": "Category Ambiguous",
    "colors_not_matching": "Colors Not Matching",
    "dates_errors": "Dates Errors",
    "labels_overlapping": "Labels Overlapping",
    "wrong_type_of_bars": "Wrong Type of Bars",
    "chart_not_displaying": "Chart Not Displaying",
}

ORIGINAL_CONDITION = "original"
ORIGINAL_DISPLAY = "Original Charts"


class ReportError(Exception):
    pass


def condition_display(label: str) -> str:
    return ORIGINAL_DISPLAY if label == ORIGINAL_CONDITION else label


def _benchmark_cells(family: str, cond_data: dict) -> tuple[list[str], list[str]]:
    """(header cells, value cells) for one condition row; '-' for absent data."""
    accuracy = cond_data.get("accuracy")
    extraction = cond_data.get("extraction")
    headers = ["Overall"]
    values: list[str] = []
    if accuracy is None:
        values.append("-")
    else:
        values.append(f"{accuracy['overall']['accuracy']:.1f}")
    for category in CATEGORY_ORDER[family]:
        stat = (accuracy or {}).get("by_category", {}).get(category)
        if stat is None:
            headers.append(CATEGORY_LABELS[category])
            values.append("-")
        else:
            headers.append(f"{CATEGORY_LABELS[category]} (n={stat['n']})")
            values.append(f"{stat['accuracy']:.1f}")
    headers.extend(["Sim. Score", "Exact Match"])
    if extraction is None:
        values.extend(["-", "-"])
    else:
        values.append(f"{round_half_away(extraction['mean_similarity'], 1):.1f}")
        values.append(f"{round_half_away(100.0 * extraction['exact_fraction'], 1):.1f}")
    return headers, values


def _family_rows(summary: dict, family: str) -> tuple[list[str], list[tuple[str, list[str]]]]:
    families = summary.get("families", {})
    if family not in families:
        raise ReportError(f"summary has no data for family {family!r}")
    conditions = families[family]["conditions"]
    order = [c for c in summary["conditions"] if c in conditions]
    if not order:
        raise ReportError(f"no conditions recorded for family {family!r}")
    header_cells: list[str] | None = None
    rows = []
    for label in order:
        cells_h, cells_v = _benchmark_cells(family, conditions[label])
        if header_cells is None:
            header_cells = cells_h
        rows.append((condition_display(label), cells_v))
    return ["Model"] + (header_cells or []), rows


def render_benchmark(summary: dict, family: str) -> str:
    """Plain-text benchmark table; cells joined by two spaces, byte-stable."""
    header, rows = _family_rows(summary, family)
    lines = ["  ".join(header)]
    lines.extend("  ".join([label] + values) for label, values in rows)
    return "\n".join(lines)


def render_benchmark_markdown(summary: dict, family: str) -> str:
    header, rows = _family_rows(summary, family)
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    lines.extend(
        "| " + " | ".join([label] + values) + " |" for label, values in rows
    )
    return "\n".join(lines)


def _tally_cells(tallies: dict) -> tuple[list[str], list[tuple[str, list[str]]]]:
    models = sorted(tallies)
    if not models:
        raise ReportError("no error tallies to render")
    rows = []
    for code in ERROR_CODES:
        cells = []
        for model in models:
            cell = tallies[model].get(code)
            if cell is None:
                raise ReportError(f"tally for {model!r} is missing code {code!r}")
            if isinstance(cell, dict):
                cell = TallyCell(count=cell["count"], percent=cell["percent"])
            cells.append(cell.format())
        rows.append((ERROR_LABELS[code], cells))
    return ["Error Type"] + models, rows


def render_errors(tallies: dict) -> str:
    """Fixed nine-row error table in the published row order."""
    header, rows = _tally_cells(tallies)
    lines = ["  ".join(header)]
    lines.extend("  ".join([label] + cells) for label, cells in rows)
    return "\n".join(lines)


def render_errors_markdown(tallies: dict) -> str:
    header, rows = _tally_cells(tallies)
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    lines.extend("| " + " | ".join([label] + cells) + " |" for label, cells in rows)
    return "\n".join(lines)


def render_survey(survey: dict) -> str:
    """Per-item means by condition, two decimals, plus mapped-type means."""
    conditions = sorted(survey["conditions"])
    lines = ["  ".join(["Item"] + [condition_display(c) for c in conditions])]
    item_texts = survey["item_texts"]
    for item_id in sorted(item_texts, key=int):
        cells = [
            f"{survey['conditions'][c]['item_means'][item_id]:.2f}" for c in conditions
        ]
        lines.append("  ".join([item_texts[item_id]] + cells))
    lines.append("")
    lines.append("  ".join(["Question Type"] + [condition_display(c) for c in conditions]))
    types = sorted(
        {t for c in conditions for t in survey["conditions"][c]["type_means"]}
    )
    for qtype in types:
        cells = [f"{survey['conditions'][c]['type_means'][qtype]:.2f}" for c in conditions]
        lines.append("  ".join([qtype] + cells))
    return "\n".join(lines)


def summary_json_bytes(summary: dict) -> bytes:
    """Canonical bytes for summary.json; digests are taken over these."""
    return (json.dumps(summary, sort_keys=True, indent=2) + "\n").encode("utf-8")


def render_csv(summary: dict) -> str:
    """Raw-value CSV: one row per (family, condition, metric)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "condition", "metric", "value"])
    for family in sorted(summary.get("families", {})):
        conditions = summary["families"][family]["conditions"]
        for label in [c for c in summary["conditions"] if c in conditions]:
            data = conditions[label]
            accuracy = data.get("accuracy")
            if accuracy is not None:
                overall = accuracy["overall"]
                writer.writerow([family, label, "overall_n", overall["n"]])
                writer.writerow([family, label, "overall_correct", overall["correct"]])
                writer.writerow(
                    [family, label, "overall_accuracy_raw",
                     repr(100.0 * overall["correct"] / overall["n"])]
                )
                for category in sorted(accuracy["by_category"]):
                    stat = accuracy["by_category"][category]
                    writer.writerow([family, label, f"{category}_n", stat["n"]])
                    writer.writerow([family, label, f"{category}_correct", stat["correct"]])
                    writer.writerow(
                        [family, label, f"{category}_accuracy_raw",
                         repr(100.0 * stat["correct"] / stat["n"])]
                    )
            extraction = data.get("extraction")
            if extraction is not None:
                writer.writerow(
                    [family, label, "mean_similarity_raw", repr(extraction["mean_similarity"])]
                )
                writer.writerow(
                    [family, label, "exact_fraction_raw", repr(extraction["exact_fraction"])]
                )
                writer.writerow([family, label, "extraction_n", extraction["n_charts"]])
    return buf.getvalue()


def render_markdown_report(summary: dict) -> str:
    sections = [f"# Benchmark report `{summary['run_id']}`", ""]
    sections.append(f"- config digest: `{summary['config_digest']}`")
    sections.append(f"- data digest: `{summary['data_digest']}`")
    sections.append(f"- code version: `{summary['code_version']}`")
    sections.append("")
    for family in sorted(summary.get("families", {})):
        sections.append(f"## {family} results")
        sections.append("")
        sections.append(render_benchmark_markdown(summary, family))
        sections.append("")
    if summary.get("errors"):
        sections.append("## Contrastive error tallies")
        sections.append("")
        sections.append(render_errors_markdown(summary["errors"]))
        sections.append("")
    if summary.get("survey"):
        sections.append("## Survey results")
        sections.append("")
        sections.append("```")
        sections.append(render_survey(summary["survey"]))
        sections.append("```")
        sections.append("")
    return "\n".join(sections)


def write_report_files(summary: dict, out_dir: str | Path) -> dict[str, Path]:
    """Write summary.json, report.md, and report.csv; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out / "summary.json",
        "markdown": out / "report.md",
        "csv": out / "report.csv",
    }
    paths["summary"].write_bytes(summary_json_bytes(summary))
    paths["markdown"].write_text(render_markdown_report(summary), encoding="utf-8")
    paths["csv"].write_text(render_csv(summary), encoding="utf-8")
    return paths


def load_summary(path: str | Path) -> dict:
    summary = json.loads(Path(path).read_text(encoding="utf-8"))
    if summary.get("schema_version") != SUMMARY_SCHEMA:
        raise ReportError(
            f"unsupported summary schema {summary.get('schema_version')!r}"
        )
    return summary
