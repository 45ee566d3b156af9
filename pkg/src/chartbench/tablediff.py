"""Extraction-fidelity metrics between a ground-truth and an extracted table.

Two views, deliberately different in strictness:

* similarity score: alignment-tolerant. Columns pair up by canonical
  header equality (order fallback for leftovers), rows by canonical
  first-column label (same fallback). Each aligned numeric cell
  contributes a normalized distance |x1 - x2| / (|x1| + 1e-15) clipped at
  1, with x1 the ground-truth value; unmatched ground-truth numeric cells
  count as distance 1. Score = 100 * (1 - mean distance). Metric version
  METRIC_VERSION; the aggregation convention is ours, so published
  corpus-level values are not comparison targets.

* exact match: order-sensitive and tolerance-free. Headers, row count,
  and every cell must agree in sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import DataTable, canonical_header
from .rounding import round_half_away
from .scoring import canonical_text

METRIC_VERSION = "extraction-v1"
EXTRACTION_EPSILON = 1e-15


@dataclass(frozen=True)
class Alignment:
    """Injective column/row pairings plus the count of orphaned gt numeric cells."""

    column_pairs: tuple[tuple[int, int], ...]
    row_pairs: tuple[tuple[int, int], ...]
    unmatched_gt_cells: int


def _pair_by_key(gt_keys: list[str], ex_keys: list[str]) -> list[tuple[int, int]]:
    """Pair gt indices with ex indices: key equality first, order for leftovers."""
    pairs: list[tuple[int, int]] = []
    used_ex: set[int] = set()
    unmatched_gt: list[int] = []
    for gi, key in enumerate(gt_keys):
        hit = next(
            (ei for ei, other in enumerate(ex_keys) if ei not in used_ex and other == key),
            None,
        )
        if hit is None:
            unmatched_gt.append(gi)
        else:
            pairs.append((gi, hit))
            used_ex.add(hit)
    leftovers_ex = [ei for ei in range(len(ex_keys)) if ei not in used_ex]
    pairs.extend(zip(unmatched_gt, leftovers_ex))
    return sorted(pairs)


def align(gt: DataTable, ex: DataTable) -> Alignment:
    """Best-effort structural alignment; never fails (worst case: nothing pairs)."""
    col_pairs = _pair_by_key(
        [canonical_header(h) for h in gt.headers],
        [canonical_header(h) for h in ex.headers],
    )
    row_pairs = _pair_by_key(
        [canonical_text(row[0].raw) for row in gt.rows],
        [canonical_text(row[0].raw) for row in ex.rows],
    )
    paired_cols = {g for g, _ in col_pairs}
    paired_rows = {g for g, _ in row_pairs}
    unmatched = sum(
        1
        for ri, row in enumerate(gt.rows)
        for ci, cell in enumerate(row)
        if cell.is_numeric and (ri not in paired_rows or ci not in paired_cols)
    )
    return Alignment(
        column_pairs=tuple(col_pairs),
        row_pairs=tuple(row_pairs),
        unmatched_gt_cells=unmatched,
    )


def similarity_score(gt: DataTable, ex: DataTable) -> float:
    """Chart-level similarity in [0, 100]; identical tables score 100."""
    if gt.numeric_cell_count() == 0:
        raise ValueError("ground-truth table has no numeric cells")
    alignment = align(gt, ex)
    col_map = dict(alignment.column_pairs)
    row_map = dict(alignment.row_pairs)
    distances: list[float] = []
    for ri, row in enumerate(gt.rows):
        for ci, cell in enumerate(row):
            if not cell.is_numeric:
                continue
            if ri not in row_map or ci not in col_map:
                distances.append(1.0)
                continue
            other = ex.rows[row_map[ri]][col_map[ci]]
            if not other.is_numeric:
                distances.append(1.0)
                continue
            x1, x2 = cell.value, other.value
            d = abs(x1 - x2) / (abs(x1) + EXTRACTION_EPSILON)
            distances.append(min(1.0, d))
    return 100.0 * (1.0 - sum(distances) / len(distances))


def exact_match(gt: DataTable, ex: DataTable) -> bool:
    """Whole-table equality, order-sensitive, no numeric tolerance."""
    if len(gt.headers) != len(ex.headers) or len(gt.rows) != len(ex.rows):
        return False
    if any(
        canonical_header(a) != canonical_header(b)
        for a, b in zip(gt.headers, ex.headers)
    ):
        return False
    for gt_row, ex_row in zip(gt.rows, ex.rows):
        for a, b in zip(gt_row, ex_row):
            if a.is_numeric != b.is_numeric:
                return False
            if a.is_numeric:
                if a.value != b.value:
                    return False
            elif canonical_text(a.raw) != canonical_text(b.raw):
                return False
    return True


@dataclass(frozen=True)
class ExtractionScore:
    similarity: float
    exact: bool
    unmatched_cells: int

    def to_record(self) -> dict:
        return {
            "similarity": self.similarity,
            "exact": self.exact,
            "unmatched_cells": self.unmatched_cells,
        }


def score_extraction(gt: DataTable, ex: DataTable) -> ExtractionScore:
    return ExtractionScore(
        similarity=similarity_score(gt, ex),
        exact=exact_match(gt, ex),
        unmatched_cells=align(gt, ex).unmatched_gt_cells,
    )


def failed_extraction_score(gt: DataTable) -> ExtractionScore:
    """Score recorded when extraction produced no parseable table at all."""
    return ExtractionScore(
        similarity=0.0, exact=False, unmatched_cells=gt.numeric_cell_count()
    )


def corpus_extraction_report(
    pairs: list[tuple[DataTable, DataTable]],
) -> tuple[float, float]:
    """(mean similarity, exact-match percentage), both to one decimal.

    Chart-level scores weigh equally regardless of table size.
    """
    if not pairs:
        raise ValueError("no table pairs to score")
    sims = [similarity_score(gt, ex) for gt, ex in pairs]
    exact_count = sum(1 for gt, ex in pairs if exact_match(gt, ex))
    mean_sim = round_half_away(sum(sims) / len(sims), 1)
    exact_pct = round_half_away(100.0 * exact_count / len(pairs), 1)
    return mean_sim, exact_pct
