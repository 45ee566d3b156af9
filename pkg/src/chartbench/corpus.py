"""Benchmark corpus: samples, data tables, QA pairs, and the manifest loader.

A corpus is described by a single JSON manifest (the only source of truth;
no directory scanning). Each sample points at an RFC-4180 CSV holding its
data table, optionally at the original chart image, and carries its
question-answer pairs inline.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

TABLE_FORMAT_VERSION = "table-v1"

KNOWN_CHART_TYPES = ("bar", "grouped_bar", "stacked_bar", "line", "pie", "scatter")

CHARTQA_CATEGORIES = frozenset({"human", "augmented"})
PLOTQA_CATEGORIES = frozenset(
    {"structural", "data_retrieval", "arithmetic", "comparison", "compound", "min_max"}
)
ALL_CATEGORIES = CHARTQA_CATEGORIES | PLOTQA_CATEGORIES

FAMILIES = ("chartqa", "plotqa")

CATEGORIES_BY_FAMILY = {
    "chartqa": CHARTQA_CATEGORIES,
    "plotqa": PLOTQA_CATEGORIES,
}


class ManifestError(Exception):
    """Malformed manifest or referenced file; message names the offending field."""


def parse_decimal(text: str) -> float | None:
    """Parse a plain decimal number, else None.

    Accepts optional sign, decimal point and exponent; rejects inf/nan
    spellings so words like "Infinity" stay text cells.
    """
    s = text.strip()
    if not s:
        return None
    try:
        value = float(s)
    except ValueError:
        return None
    if math.isnan(value) or math.isinf(value):
        return None
    return value


@dataclass(frozen=True)
class Cell:
    """One table cell: the raw text plus its parsed magnitude when numeric."""

    raw: str
    value: float | None = None

    @classmethod
    def of(cls, raw: str) -> "Cell":
        return cls(raw=raw, value=parse_decimal(raw))

    @property
    def is_numeric(self) -> bool:
        return self.value is not None

    def render(self) -> str:
        """Text form used in prompt serialization.

        Numeric cells keep their decimal spelling with trailing zeros
        stripped ("52.40" -> "52.4", "29.0" -> "29"); text cells pass
        through untouched.
        """
        if self.value is None:
            return self.raw
        s = self.raw.strip()
        if "e" in s.lower():
            return repr(self.value)
        if "." in s:
            s = s.rstrip("0").rstrip(".")
        return s or "0"


def canonical_header(name: str) -> str:
    return name.strip().casefold()


@dataclass(frozen=True)
class DataTable:
    """Rectangular table: ordered headers and rows of tagged cells.

    Invariants enforced at construction: at least one column, each header
    non-empty, headers unique after trim+casefold, and every row exactly
    |headers| cells wide.
    """

    headers: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        if not self.headers:
            raise ValueError("table has no columns")
        canon = [canonical_header(h) for h in self.headers]
        if any(not c for c in canon):
            raise ValueError("empty header name")
        if len(set(canon)) != len(canon):
            raise ValueError(f"duplicate headers after normalization: {self.headers}")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise ValueError(
                    f"row {i} has {len(row)} cells, expected {len(self.headers)}"
                )

    @classmethod
    def from_strings(cls, headers: list[str], rows: list[list[str]]) -> "DataTable":
        return cls(
            headers=tuple(headers),
            rows=tuple(tuple(Cell.of(c) for c in row) for row in rows),
        )

    def numeric_cell_count(self) -> int:
        return sum(1 for row in self.rows for cell in row if cell.is_numeric)

    def column(self, index: int) -> list[Cell]:
        return [row[index] for row in self.rows]


@dataclass(frozen=True)
class ChartType:
    """Chart-type tag with an `other` escape for unanticipated vocabulary.

    `label` is the text passed through to prompts verbatim; `name` is the
    canonical tag ("other" when the label is outside the known set).
    """

    name: str
    label: str

    @classmethod
    def parse(cls, text: str) -> "ChartType":
        tag = text.strip()
        if tag in KNOWN_CHART_TYPES:
            return cls(name=tag, label=tag)
        return cls(name="other", label=tag)


@dataclass(frozen=True)
class QAPair:
    qa_id: str
    question: str
    gold: str
    category: str

    def __post_init__(self) -> None:
        if not self.gold:
            raise ValueError(f"qa {self.qa_id}: empty gold answer")
        if self.category not in ALL_CATEGORIES:
            raise ValueError(f"qa {self.qa_id}: unknown category {self.category!r}")


@dataclass(frozen=True)
class Sample:
    """One benchmark unit: table, title, chart type, original image, QA pairs."""

    id: str
    title: str
    chart_type: ChartType
    table: DataTable
    original_image: Path | None
    qa: tuple[QAPair, ...]
    dataset_family: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if self.dataset_family not in FAMILIES:
            raise ValueError(f"sample {self.id}: unknown family {self.dataset_family!r}")
        if not self.qa:
            raise ValueError(f"sample {self.id}: qa list is empty")

    def qa_by_id(self, qa_id: str) -> QAPair:
        for pair in self.qa:
            if pair.qa_id == qa_id:
                return pair
        raise KeyError(f"sample {self.id} has no qa {qa_id!r}")


@dataclass(frozen=True)
class CategoryViolation:
    sample_id: str
    qa_id: str
    category: str
    family: str


def validate_category(sample: Sample) -> list[CategoryViolation]:
    """Cross-check every QA category against the sample's dataset family.

    Returns violations instead of raising so callers can batch-report.
    """
    allowed = CATEGORIES_BY_FAMILY[sample.dataset_family]
    return [
        CategoryViolation(sample.id, pair.qa_id, pair.category, sample.dataset_family)
        for pair in sample.qa
        if pair.category not in allowed
    ]


def serialize_table(table: DataTable) -> str:
    """Flatten a table into the prompt's data string.

    Format (versioned as TABLE_FORMAT_VERSION): header names joined by
    ", ", then each row's rendered cells joined by ", ", with the header
    block and each row separated by " | ". Deterministic by construction.
    """
    parts = [", ".join(table.headers)]
    parts.extend(", ".join(cell.render() for cell in row) for row in table.rows)
    return " | ".join(parts)


def load_csv_table(path: Path) -> DataTable:
    """Read an RFC-4180 CSV (UTF-8, header row required) into a DataTable."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ManifestError(f"cannot read CSV {path}: {exc}") from exc
    if not rows:
        raise ManifestError(f"CSV {path} is empty (header row required)")
    headers, data = rows[0], rows[1:]
    try:
        return DataTable.from_strings(headers, data)
    except ValueError as exc:
        raise ManifestError(f"CSV {path}: {exc}") from exc


def _expect(obj: dict, key: str, kind: type, where: str):
    if key not in obj:
        raise ManifestError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise ManifestError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_manifest(path: str | Path) -> list[Sample]:
    """Load and validate the full corpus manifest.

    Referenced CSV and image paths resolve relative to the manifest's
    directory. Raises ManifestError naming the field (and the JSON line for
    syntax errors) on any violation: duplicate ids, missing files, empty QA
    lists, arity mismatches, or cross-family categories.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be an object")
    entries = _expect(doc, "samples", list, str(path))
    if not entries:
        raise ManifestError(f"{path}: no samples")

    base = path.parent
    samples: list[Sample] = []
    seen_ids: set[str] = set()
    seen_qa_ids: set[str] = set()
    for i, entry in enumerate(entries):
        where = f"samples[{i}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: expected object")
        sample_id = _expect(entry, "id", str, where)
        if sample_id in seen_ids:
            raise ManifestError(f"{where}.id: duplicate sample id {sample_id!r}")
        seen_ids.add(sample_id)

        title = _expect(entry, "title", str, where)
        chart_type = ChartType.parse(_expect(entry, "chart_type", str, where))
        family = _expect(entry, "family", str, where)
        if family not in FAMILIES:
            raise ManifestError(f"{where}.family: unknown family {family!r}")

        csv_rel = _expect(entry, "csv", str, where)
        csv_path = base / csv_rel
        if not csv_path.is_file():
            raise ManifestError(f"{where}.csv: missing referenced file {csv_path}")
        table = load_csv_table(csv_path)

        image_path: Path | None = None
        if entry.get("image") is not None:
            image_rel = _expect(entry, "image", str, where)
            image_path = base / image_rel
            if not image_path.is_file():
                raise ManifestError(f"{where}.image: missing referenced file {image_path}")

        qa_entries = _expect(entry, "qa", list, where)
        if not qa_entries:
            raise ManifestError(f"{where}.qa: empty qa list")
        pairs: list[QAPair] = []
        for j, q in enumerate(qa_entries):
            qwhere = f"{where}.qa[{j}]"
            if not isinstance(q, dict):
                raise ManifestError(f"{qwhere}: expected object")
            qa_id = _expect(q, "qa_id", str, qwhere)
            if qa_id in seen_qa_ids:
                raise ManifestError(
                    f"{qwhere}.qa_id: duplicate qa id {qa_id!r} (qa ids are"
                    " manifest-wide so verdicts can be joined across samples)"
                )
            seen_qa_ids.add(qa_id)
            try:
                pairs.append(
                    QAPair(
                        qa_id=qa_id,
                        question=_expect(q, "question", str, qwhere),
                        gold=_expect(q, "gold", str, qwhere),
                        category=_expect(q, "category", str, qwhere),
                    )
                )
            except ValueError as exc:
                raise ManifestError(f"{qwhere}: {exc}") from exc

        try:
            sample = Sample(
                id=sample_id,
                title=title,
                chart_type=chart_type,
                table=table,
                original_image=image_path,
                qa=tuple(pairs),
                dataset_family=family,
            )
        except ValueError as exc:
            raise ManifestError(f"{where}: {exc}") from exc

        violations = validate_category(sample)
        if violations:
            v = violations[0]
            raise ManifestError(
                f"{where}.qa: category {v.category!r} (qa {v.qa_id}) not valid for"
                f" family {v.family!r}"
            )
        samples.append(sample)
    return samples


@dataclass(frozen=True)
class Corpus:
    """Loaded manifest plus id-indexed access."""

    samples: tuple[Sample, ...]
    root: Path
    by_id: dict[str, Sample] = field(default_factory=dict, compare=False)

    @classmethod
    def load(cls, manifest_path: str | Path) -> "Corpus":
        samples = load_manifest(manifest_path)
        corpus = cls(samples=tuple(samples), root=Path(manifest_path).parent)
        corpus.by_id.update({s.id: s for s in samples})
        return corpus

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)
