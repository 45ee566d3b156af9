"""Contrastive error selection and the manual coding workflow.

A contrast case is a QA pair judged wrong on one generator's chart but
right on the other's; these are the units humans code against a closed
nine-way error taxonomy. Coding is deliberately manual: this module only
queues cases, persists codes append-only, and tallies.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .rounding import ratio_percent
from .scoring import Verdict

ERROR_CODES = (
    "vqa_model_error",
    "actually_correct",
    "bar_boundaries",
    "category_ambiguous",
    "colors_not_matching",
    "dates_errors",
    "labels_overlapping",
    "wrong_type_of_bars",
    "chart_not_displaying",
)


class CoverageError(Exception):
    """The two verdict sets do not cover the same qa_id set."""


class CodingError(Exception):
    """Unknown case, invalid code token, or unflagged recode."""


@dataclass(frozen=True)
class ContrastCase:
    qa_id: str
    sample_id: str
    loser_model: str
    winner_model: str
    loser_image: str | None
    winner_image: str | None
    question: str
    gold: str
    code: str | None = None
    coder: str | None = None

    def __post_init__(self) -> None:
        if self.loser_model == self.winner_model:
            raise ValueError("loser and winner must differ")

    @property
    def case_id(self) -> str:
        return f"{self.qa_id}:{self.loser_model}"

    def to_record(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "sample_id": self.sample_id,
            "loser_model": self.loser_model,
            "winner_model": self.winner_model,
            "loser_image": self.loser_image,
            "winner_image": self.winner_image,
            "question": self.question,
            "gold": self.gold,
            "code": self.code,
            "coder": self.coder,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ContrastCase":
        return cls(**record)


def select_contrastive(
    verdicts_a: list[Verdict],
    verdicts_b: list[Verdict],
    context: dict[str, dict] | None = None,
) -> tuple[list[ContrastCase], list[ContrastCase]]:
    """Split disagreements into (a-only errors, b-only errors).

    Both verdict lists must cover the same qa_ids. `context` optionally maps
    qa_id to {sample_id, question, gold, images: {model_id: path}} so cases
    carry what coders need; without it the case records are skeletal.
    """
    by_a = {v.qa_id: v for v in verdicts_a}
    by_b = {v.qa_id: v for v in verdicts_b}
    if set(by_a) != set(by_b):
        only_a = sorted(set(by_a) - set(by_b))
        only_b = sorted(set(by_b) - set(by_a))
        raise CoverageError(
            f"qa coverage mismatch: only in a={only_a}, only in b={only_b}"
        )

    def make_case(loser: Verdict, winner: Verdict) -> ContrastCase:
        ctx = (context or {}).get(loser.qa_id, {})
        images = ctx.get("images", {})
        return ContrastCase(
            qa_id=loser.qa_id,
            sample_id=ctx.get("sample_id", ""),
            loser_model=loser.model_id,
            winner_model=winner.model_id,
            loser_image=images.get(loser.model_id),
            winner_image=images.get(winner.model_id),
            question=ctx.get("question", ""),
            gold=loser.gold.raw,
        )

    a_only = []
    b_only = []
    for qa_id in sorted(by_a):
        va, vb = by_a[qa_id], by_b[qa_id]
        if not va.correct and vb.correct:
            a_only.append(make_case(va, vb))
        elif va.correct and not vb.correct:
            b_only.append(make_case(vb, va))
    return a_only, b_only


class CodingStore:
    """Append-only code log over a fixed case queue; latest code wins.

    The queue (cases) and the log (codes) are separate line-delimited JSON
    files so recodes never rewrite history. Writes are serialized.
    """

    def __init__(self, queue_path: str | Path, log_path: str | Path):
        self.queue_path = Path(queue_path)
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self._cases: dict[str, ContrastCase] = {}
        if self.queue_path.exists():
            for line in self.queue_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    case = ContrastCase.from_record(json.loads(line))
                    self._cases[case.case_id] = case
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._apply(json.loads(line))

    def _apply(self, entry: dict) -> None:
        case = self._cases.get(entry["case_id"])
        if case is not None:
            self._cases[case.case_id] = replace(
                case, code=entry["code"], coder=entry["coder"]
            )

    def enqueue(self, cases: list[ContrastCase]) -> None:
        with self._lock:
            lines = []
            for case in cases:
                if case.case_id in self._cases:
                    continue
                self._cases[case.case_id] = case
                lines.append(json.dumps(case.to_record(), sort_keys=True))
            if lines:
                with open(self.queue_path, "a", encoding="utf-8") as fh:
                    fh.write("\n".join(lines) + "\n")

    def cases(self) -> list[ContrastCase]:
        return sorted(self._cases.values(), key=lambda c: c.case_id)

    def pending(self) -> list[ContrastCase]:
        return [c for c in self.cases() if c.code is None]

    def record_code(
        self, case_id: str, code: str, coder: str, recode: bool = False
    ) -> ContrastCase:
        """Persist one coding decision; recoding must be explicitly flagged."""
        if code not in ERROR_CODES:
            raise CodingError(f"invalid code token {code!r}")
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise CodingError(f"unknown case id {case_id!r}")
            if case.code is not None and not recode:
                raise CodingError(
                    f"case {case_id} already coded {case.code!r}; pass recode to replace"
                )
            entry = {
                "case_id": case_id,
                "code": code,
                "coder": coder,
                "recode": recode,
                "ts": time.time(),
            }
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._apply(entry)
            return self._cases[case_id]


@dataclass(frozen=True)
class TallyCell:
    count: int
    percent: float | None  # None when the model has zero coded cases

    def format(self) -> str:
        if self.percent is None:
            return f"{self.count} (—)"
        return f"{self.count} ({self.percent:.2f}%)"


def tally(
    cases: list[ContrastCase], models: list[str] | None = None
) -> dict[str, dict[str, TallyCell]]:
    """Per-loser-model counts and percentages by error code.

    All cases must be coded; percentages use two decimals of the model's
    case total, so each model's column sums to 100 up to rounding slack.
    `models` forces columns for models with no cases (all cells 0 with
    undefined percentage).
    """
    uncoded = [c.case_id for c in cases if c.code is None]
    if uncoded:
        raise CodingError(f"uncoded cases present: {uncoded}")
    totals: dict[str, int] = {m: 0 for m in models or []}
    counts: dict[str, dict[str, int]] = {}
    for case in cases:
        totals[case.loser_model] = totals.get(case.loser_model, 0) + 1
        model_counts = counts.setdefault(case.loser_model, {})
        model_counts[case.code] = model_counts.get(case.code, 0) + 1
    result: dict[str, dict[str, TallyCell]] = {}
    for model in sorted(totals):
        total = totals[model]
        model_counts = counts.get(model, {})
        result[model] = {
            code: TallyCell(
                count=model_counts.get(code, 0),
                percent=(
                    ratio_percent(model_counts.get(code, 0), total, decimals=2)
                    if total > 0
                    else None
                ),
            )
            for code in ERROR_CODES
        }
    return result
