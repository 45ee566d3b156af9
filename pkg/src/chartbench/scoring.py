"""Answer normalization, strict/relaxed matching, and accuracy aggregation.

The gold answer's type picks the mode: numeric golds are judged with a
relative tolerance anchored on the gold value (default 5%, inclusive),
text golds with exact canonical string equality. The tolerance comparison
runs in exact rational arithmetic so the +/-5% boundary is a mathematical
statement, immune to float rounding drift.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .rounding import ratio_percent

# Characters stripped before attempting a numeric parse of an answer:
# currency symbols, thousands separators, percent signs.
_NUMERIC_STRIP_RE = re.compile(r"[$€£¥,%]")
_WHITESPACE_RE = re.compile(r"\s+")


def canonical_text(text: str) -> str:
    """Trim, case-fold, and collapse internal whitespace."""
    return _WHITESPACE_RE.sub(" ", text.strip()).casefold()


@dataclass(frozen=True)
class NormalizedAnswer:
    """An answer string tagged numeric (with magnitude) or text (canonical)."""

    raw: str
    value: float | None
    canonical: str

    @property
    def is_numeric(self) -> bool:
        return self.value is not None


def normalize(raw: str) -> NormalizedAnswer:
    """Normalize an answer string; every input normalizes to something.

    "12%" -> numeric 12; "$1,200" -> numeric 1200; "Texas " -> text "texas".
    Year-like labels ("2019") do parse numeric; that is an accepted
    consequence of letting the gold type drive the match mode.
    """
    stripped = _NUMERIC_STRIP_RE.sub("", raw).strip()
    value: float | None = None
    if stripped:
        try:
            candidate = float(stripped)
        except ValueError:
            candidate = None
        if candidate is not None and candidate == candidate and abs(candidate) != float("inf"):
            value = candidate
    return NormalizedAnswer(raw=raw, value=value, canonical=canonical_text(raw))


@dataclass(frozen=True)
class RelaxedTolerance:
    """Gold-anchored relative tolerance for numeric answers.

    The float is read through its decimal spelling (0.05 means exactly
    1/20) so the inclusive boundary is stable.
    """

    rel_tol: float = 0.05

    def __post_init__(self) -> None:
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must be in (0, 1)")

    def as_fraction(self) -> Fraction:
        return Fraction(repr(self.rel_tol))


DEFAULT_TOLERANCE = RelaxedTolerance()


def match(
    predicted: NormalizedAnswer,
    gold: NormalizedAnswer,
    tol: RelaxedTolerance = DEFAULT_TOLERANCE,
) -> tuple[str, bool]:
    """Judge one (predicted, gold) pair; returns (mode, correct).

    Numeric gold -> relaxed: correct iff |p - g| <= tol * |g|, inclusive,
    evaluated exactly; gold of 0 demands p == 0. A text-typed prediction
    against a numeric gold is incorrect (its numeric re-parse already
    happened in normalize). Text gold -> strict canonical equality.
    """
    if gold.is_numeric:
        if not predicted.is_numeric:
            return "relaxed", False
        g = Fraction(gold.value)
        if g == 0:
            return "relaxed", predicted.value == 0
        p = Fraction(predicted.value)
        return "relaxed", abs(p - g) <= tol.as_fraction() * abs(g)
    return "strict", predicted.canonical == gold.canonical


@dataclass(frozen=True)
class Verdict:
    qa_id: str
    model_id: str
    strategy: str
    category: str
    predicted: NormalizedAnswer
    gold: NormalizedAnswer
    mode: str
    correct: bool

    def to_record(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "model_id": self.model_id,
            "strategy": self.strategy,
            "category": self.category,
            "predicted_raw": self.predicted.raw,
            "gold_raw": self.gold.raw,
            "mode": self.mode,
            "correct": self.correct,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Verdict":
        predicted = normalize(record["predicted_raw"])
        gold = normalize(record["gold_raw"])
        return cls(
            qa_id=record["qa_id"],
            model_id=record["model_id"],
            strategy=record["strategy"],
            category=record["category"],
            predicted=predicted,
            gold=gold,
            mode=record["mode"],
            correct=record["correct"],
        )


def judge(
    sample,
    answers: list[tuple[str, str]],
    model_id: str,
    strategy: str,
    tol: RelaxedTolerance = DEFAULT_TOLERANCE,
) -> list[Verdict]:
    """Judge raw VQA answers against a sample's gold QA pairs.

    `answers` pairs qa_id with the model's raw answer string; every qa_id
    must exist on the sample.
    """
    verdicts = []
    for qa_id, raw in answers:
        try:
            pair = sample.qa_by_id(qa_id)
        except KeyError:
            raise KeyError(f"unknown qa_id {qa_id!r} for sample {sample.id}") from None
        predicted = normalize(raw)
        gold = normalize(pair.gold)
        mode, correct = match(predicted, gold, tol)
        verdicts.append(
            Verdict(
                qa_id=qa_id,
                model_id=model_id,
                strategy=strategy,
                category=pair.category,
                predicted=predicted,
                gold=gold,
                mode=mode,
                correct=correct,
            )
        )
    return verdicts


@dataclass(frozen=True)
class CategoryStat:
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        """Percentage to one decimal, rounded half away from zero."""
        return ratio_percent(self.correct, self.n, decimals=1)


@dataclass(frozen=True)
class AccuracyReport:
    overall: CategoryStat
    by_category: dict[str, CategoryStat]

    def to_record(self) -> dict:
        return {
            "overall": {"n": self.overall.n, "correct": self.overall.correct,
                        "accuracy": self.overall.accuracy},
            "by_category": {
                cat: {"n": st.n, "correct": st.correct, "accuracy": st.accuracy}
                for cat, st in sorted(self.by_category.items())
            },
        }


def aggregate(verdicts: list[Verdict]) -> AccuracyReport:
    """Overall and per-category accuracy; permutation-invariant."""
    if not verdicts:
        raise ValueError("cannot aggregate an empty verdict list")
    counts: dict[str, list[int]] = {}
    total_n = 0
    total_correct = 0
    for v in verdicts:
        n_correct = counts.setdefault(v.category, [0, 0])
        n_correct[0] += 1
        n_correct[1] += int(v.correct)
        total_n += 1
        total_correct += int(v.correct)
    return AccuracyReport(
        overall=CategoryStat(n=total_n, correct=total_correct),
        by_category={
            cat: CategoryStat(n=n, correct=c) for cat, (n, c) in counts.items()
        },
    )


def write_verdicts(path: str | Path, verdicts: list[Verdict]) -> None:
    """Persist verdicts as line-delimited JSON."""
    lines = [json.dumps(v.to_record(), sort_keys=True) for v in verdicts]
    Path(path).write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")


def read_verdicts(path: str | Path) -> list[Verdict]:
    verdicts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            verdicts.append(Verdict.from_record(json.loads(line)))
    return verdicts
