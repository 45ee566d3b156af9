"""Human rating study: assignments, Likert responses, statistics, HTTP API.

Raters work blind: the API never exposes which model or strategy produced
a chart (chart ids are opaque digests, conditions live server-side only).
Each chart gets seven 1-5 agreement ratings; because the items ask raters
to compare the chart against the original data file, the API serves the
ground-truth table beside each image.
"""

from __future__ import annotations

import hashlib
import json
import random
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DataTable
from .rounding import ratio_mean

LIKERT_MIN = 1
LIKERT_MAX = 5
SCALE_LABELS = {1: "Strongly Disagree", 5: "Strongly Agree"}


@dataclass(frozen=True)
class SurveyItem:
    item_id: int
    text: str
    mapped_type: str


SURVEY_ITEMS: tuple[SurveyItem, ...] = (
    SurveyItem(
        1,
        "The LLM-generated chart accurately displays a title reflecting the data"
        " depicted in the original CSV data file.",
        "structural_understanding",
    ),
    SurveyItem(
        2,
        "The X-axis labels on the LLM-generated chart accurately displays the labels"
        " depicted in the original CSV data file.",
        "structural_understanding",
    ),
    SurveyItem(
        3,
        "The Y-axis labels on the LLM-generated chart accurately displays the labels"
        " depicted in the original CSV data file.",
        "structural_understanding",
    ),
    SurveyItem(
        4,
        "The data points on the LLM-generated chart accurately displays the values"
        " depicted in the original CSV data file.",
        "data_retrieval",
    ),
    SurveyItem(5, "The LLM-generated chart is easy to read and understand.", "reasoning"),
    SurveyItem(6, "The LLM-generated chart is visually appealing.", "reasoning"),
    SurveyItem(
        7,
        "Overall, the LLM-generated chart serves its intended purpose in a"
        " satisfactory manner.",
        "comprehensive",
    ),
)

ITEM_IDS = tuple(item.item_id for item in SURVEY_ITEMS)


class SurveyError(Exception):
    pass


class NotAssignedError(SurveyError):
    pass


class DuplicateResponseError(SurveyError):
    pass


class RatingValidationError(SurveyError):
    pass


class ZeroVarianceError(SurveyError):
    """Pearson correlation undefined: one rater's vector is constant."""


def pearson(xs: list[float], ys: list[float]) -> float:
    """Pearson r between two equal-length vectors.

    Raises ZeroVarianceError when either vector is constant (undefined
    correlation is reported, never silently coerced).
    """
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("pearson needs two equal-length vectors of >= 2 points")
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError as exc:
        raise ZeroVarianceError(str(exc)) from exc


@dataclass(frozen=True)
class ChartRef:
    """Server-side record tying an opaque chart id to its provenance."""

    chart_id: str
    sample_id: str
    condition: str
    image_path: str

    @staticmethod
    def make_id(sample_id: str, condition: str) -> str:
        return hashlib.sha256(f"{sample_id}|{condition}".encode()).hexdigest()[:12]

    def to_record(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "sample_id": self.sample_id,
            "condition": self.condition,
            "image_path": self.image_path,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ChartRef":
        return cls(**record)


@dataclass(frozen=True)
class Assignment:
    rater_id: str
    chart_ids: tuple[str, ...]
    seed: int

    def to_record(self) -> dict:
        return {"rater_id": self.rater_id, "chart_ids": list(self.chart_ids), "seed": self.seed}

    @classmethod
    def from_record(cls, record: dict) -> "Assignment":
        return cls(record["rater_id"], tuple(record["chart_ids"]), record["seed"])


def create_assignment(
    raters: list[str],
    charts_by_condition: dict[str, list[ChartRef]],
    per_condition: int,
    seed: int,
) -> list[Assignment]:
    """Give every rater `per_condition` charts from each condition.

    The same seed always produces the same selections and the same
    per-rater shuffled order; the seed is recorded on each assignment.
    """
    if per_condition < 0:
        raise ValueError("per_condition must be >= 0")
    rng = random.Random(seed)
    selected: list[ChartRef] = []
    for condition, pool in charts_by_condition.items():
        if per_condition > len(pool):
            raise SurveyError(
                f"condition {condition!r} has {len(pool)} charts,"
                f" {per_condition} requested"
            )
        selected.extend(rng.sample(pool, per_condition))
    assignments = []
    for rater_id in raters:
        order = list(selected)
        random.Random(f"{seed}:{rater_id}").shuffle(order)
        assignments.append(
            Assignment(rater_id=rater_id, chart_ids=tuple(c.chart_id for c in order), seed=seed)
        )
    return assignments


@dataclass(frozen=True)
class SurveyResponse:
    rater_id: str
    chart_id: str
    ratings: dict[int, int]
    submitted_at: float = field(default_factory=time.time)

    def validate(self) -> None:
        missing = [i for i in ITEM_IDS if i not in self.ratings]
        if missing:
            raise RatingValidationError(f"missing items: {missing}")
        extra = [i for i in self.ratings if i not in ITEM_IDS]
        if extra:
            raise RatingValidationError(f"unknown items: {extra}")
        bad = {i: v for i, v in self.ratings.items() if not LIKERT_MIN <= v <= LIKERT_MAX}
        if bad:
            raise RatingValidationError(f"ratings out of 1..5 range: {bad}")

    def to_record(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "chart_id": self.chart_id,
            "ratings": {str(k): v for k, v in self.ratings.items()},
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "SurveyResponse":
        return cls(
            rater_id=record["rater_id"],
            chart_id=record["chart_id"],
            ratings={int(k): v for k, v in record["ratings"].items()},
            submitted_at=record["submitted_at"],
        )


class SurveyStore:
    """Append-only response log with an in-memory snapshot.

    A single writer lock serializes appends; at most one response may ever
    exist per (rater, chart).
    """

    def __init__(self, log_path: str | Path):
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self._responses: dict[tuple[str, str], SurveyResponse] = {}
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    resp = SurveyResponse.from_record(json.loads(line))
                    self._responses[(resp.rater_id, resp.chart_id)] = resp

    def record_response(self, resp: SurveyResponse) -> None:
        resp.validate()
        key = (resp.rater_id, resp.chart_id)
        with self._lock:
            if key in self._responses:
                raise DuplicateResponseError(
                    f"rater {resp.rater_id} already rated chart {resp.chart_id}"
                )
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(resp.to_record(), sort_keys=True) + "\n")
                fh.flush()
            self._responses[key] = resp

    def responses(self) -> list[SurveyResponse]:
        return sorted(
            self._responses.values(), key=lambda r: (r.rater_id, r.chart_id)
        )

    def completed_for(self, rater_id: str) -> set[str]:
        return {chart for (rater, chart) in self._responses if rater == rater_id}


class SurveyService:
    """Business logic shared by the HTTP API and the CLI stats commands."""

    def __init__(
        self,
        charts: list[ChartRef],
        assignments: list[Assignment],
        store: SurveyStore,
        tables: dict[str, DataTable],
        titles: dict[str, str] | None = None,
    ):
        self.charts = {c.chart_id: c for c in charts}
        self.assignments = {a.rater_id: a for a in assignments}
        self.store = store
        self.tables = tables
        self.titles = titles or {}

    def assignment_view(self, rater_id: str) -> dict:
        """Rater-facing assignment: chart ids only, conditions withheld."""
        assignment = self.assignments.get(rater_id)
        if assignment is None:
            raise NotAssignedError(f"unknown rater {rater_id!r}")
        completed = self.store.completed_for(rater_id)
        return {
            "rater_id": rater_id,
            "chart_ids": list(assignment.chart_ids),
            "completed": [c for c in assignment.chart_ids if c in completed],
            "total": len(assignment.chart_ids),
        }

    def chart_image(self, chart_id: str) -> bytes:
        ref = self.charts.get(chart_id)
        if ref is None:
            raise KeyError(f"unknown chart {chart_id!r}")
        return Path(ref.image_path).read_bytes()

    def chart_table(self, chart_id: str) -> dict:
        ref = self.charts.get(chart_id)
        if ref is None:
            raise KeyError(f"unknown chart {chart_id!r}")
        table = self.tables[ref.sample_id]
        return {
            "title": self.titles.get(ref.sample_id, ""),
            "headers": list(table.headers),
            "rows": [[cell.raw for cell in row] for row in table.rows],
        }

    def submit(self, resp: SurveyResponse) -> dict:
        assignment = self.assignments.get(resp.rater_id)
        if assignment is None:
            raise NotAssignedError(f"unknown rater {resp.rater_id!r}")
        if resp.chart_id not in assignment.chart_ids:
            raise NotAssignedError(
                f"chart {resp.chart_id} is not assigned to rater {resp.rater_id}"
            )
        self.store.record_response(resp)
        return self.assignment_view(resp.rater_id)

    def _condition_responses(self, condition: str) -> list[SurveyResponse]:
        return [
            r
            for r in self.store.responses()
            if self.charts.get(r.chart_id) and self.charts[r.chart_id].condition == condition
        ]

    def item_means(self, condition: str) -> dict[int, float]:
        """Per-item mean rating across raters and charts, two decimals."""
        responses = self._condition_responses(condition)
        if not responses:
            raise SurveyError(f"no responses for condition {condition!r}")
        return {
            item_id: ratio_mean(
                sum(r.ratings[item_id] for r in responses), len(responses), decimals=2
            )
            for item_id in ITEM_IDS
        }

    def type_means(self, condition: str) -> dict[str, float]:
        """Mean rating per mapped question type (the reasoning-gap view)."""
        responses = self._condition_responses(condition)
        if not responses:
            raise SurveyError(f"no responses for condition {condition!r}")
        by_type: dict[str, list[int]] = {}
        for item in SURVEY_ITEMS:
            for r in responses:
                by_type.setdefault(item.mapped_type, []).append(r.ratings[item.item_id])
        return {
            t: ratio_mean(sum(vals), len(vals), decimals=2) for t, vals in by_type.items()
        }

    def response_count(self, condition: str) -> int:
        return len(self._condition_responses(condition))

    def _rater_item_means(self, rater_id: str, condition: str) -> list[float]:
        responses = [
            r for r in self._condition_responses(condition) if r.rater_id == rater_id
        ]
        if not responses:
            raise SurveyError(
                f"rater {rater_id!r} has no responses for condition {condition!r}"
            )
        return [
            sum(r.ratings[item_id] for r in responses) / len(responses)
            for item_id in ITEM_IDS
        ]

    def inter_rater_pearson(self, rater_a: str, rater_b: str, condition: str) -> float:
        """Pearson correlation between two raters' 7-item mean vectors."""
        xs = self._rater_item_means(rater_a, condition)
        ys = self._rater_item_means(rater_b, condition)
        return pearson(xs, ys)

    def per_chart_agreement(
        self, rater_a: str, rater_b: str, condition: str
    ) -> dict[str, float | None]:
        """Per-chart Pearson over the seven items, for charts both rated.

        An extra, unvalidated view beside the headline per-item-mean
        correlation; None marks charts where either rater was constant.
        """
        responses = self._condition_responses(condition)
        by_chart: dict[str, dict[str, SurveyResponse]] = {}
        for resp in responses:
            by_chart.setdefault(resp.chart_id, {})[resp.rater_id] = resp
        result: dict[str, float | None] = {}
        for chart_id in sorted(by_chart):
            pair = by_chart[chart_id]
            if rater_a not in pair or rater_b not in pair:
                continue
            xs = [float(pair[rater_a].ratings[i]) for i in ITEM_IDS]
            ys = [float(pair[rater_b].ratings[i]) for i in ITEM_IDS]
            try:
                result[chart_id] = pearson(xs, ys)
            except ZeroVarianceError:
                result[chart_id] = None
        return result


def create_app(service: SurveyService, ui_dir: str | Path | None = None):
    """FastAPI app exposing the survey API (and optionally the built UI)."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="chartbench survey", docs_url=None, redoc_url=None)

    @app.get("/api/assignment/{rater_id}")
    def get_assignment(rater_id: str):
        try:
            return service.assignment_view(rater_id)
        except NotAssignedError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/api/chart/{chart_id}")
    def get_chart(chart_id: str):
        try:
            return Response(content=service.chart_image(chart_id), media_type="image/png")
        except (KeyError, OSError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/api/chart/{chart_id}/table")
    def get_chart_table(chart_id: str):
        try:
            return service.chart_table(chart_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/api/response")
    def post_response(body: dict):
        try:
            resp = SurveyResponse(
                rater_id=body["rater_id"],
                chart_id=body["chart_id"],
                ratings={int(k): int(v) for k, v in body["ratings"].items()},
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed response: {exc}") from exc
        try:
            view = service.submit(resp)
        except DuplicateResponseError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except NotAssignedError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from exc
        except RatingValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"status": "ok", "completed": len(view["completed"]), "total": view["total"]}

    @app.get("/api/stats")
    def get_stats(condition: str):
        try:
            return {
                "condition": condition,
                "n": service.response_count(condition),
                "item_means": {str(k): v for k, v in service.item_means(condition).items()},
                "type_means": service.type_means(condition),
            }
        except SurveyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/api/irr")
    def get_irr(a: str, b: str, condition: str):
        try:
            value = service.inter_rater_pearson(a, b, condition)
            return {"a": a, "b": b, "condition": condition, "pearson": value}
        except ZeroVarianceError as exc:
            return {
                "a": a,
                "b": b,
                "condition": condition,
                "pearson": None,
                "reason": f"undefined: {exc}",
            }
        except SurveyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
