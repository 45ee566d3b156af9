#!/usr/bin/env python3
"""Serve the survey API over the fixture corpus for frontend development
and the frontend's scripted-session tests.

Builds a small blind survey from the corpus' original images under two
hidden condition labels, assigns the first three charts of each condition
to raters r1 and r2, and serves on the given port. Responses are stored
under --state-dir (a temp dir by default) so runs are throwaway.

    python3 scripts/serve_survey_fixture.py --port 8750
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

import uvicorn

from chartbench.corpus import Corpus
from chartbench.survey import (
    Assignment,
    ChartRef,
    SurveyService,
    SurveyStore,
    create_app,
)

ROOT = Path(__file__).resolve().parent.parent

# deliberately realistic labels: the blindness tests assert these never
# reach the rater-facing DOM
CONDITIONS = ("mock-gen__zero_shot", "mock-gen__few_shot3")


def build_service(state_dir: Path, per_condition: int = 3) -> SurveyService:
    corpus = Corpus.load(ROOT / "fixtures" / "corpus" / "manifest.json")
    charts = []
    for condition in CONDITIONS:
        for sample in list(corpus)[:per_condition]:
            charts.append(
                ChartRef(
                    chart_id=ChartRef.make_id(sample.id, condition),
                    sample_id=sample.id,
                    condition=condition,
                    image_path=str(sample.original_image),
                )
            )
    # fixed 3-chart assignment per rater: first condition's charts, in order
    first = [c.chart_id for c in charts if c.condition == CONDITIONS[0]]
    assignments = [
        Assignment(rater_id="r1", chart_ids=tuple(first), seed=0),
        Assignment(rater_id="r2", chart_ids=tuple(first), seed=0),
    ]
    return SurveyService(
        charts=charts,
        assignments=assignments,
        store=SurveyStore(state_dir / "responses.ldjson"),
        tables={s.id: s.table for s in corpus},
        titles={s.id: s.title for s in corpus},
    )


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument("--state-dir", type=Path, default=None)
    parser.add_argument("--ui", type=Path, default=None, help="built frontend dir")
    args = parser.parse_args()

    state_dir = args.state_dir or Path(tempfile.mkdtemp(prefix="chartbench_survey_"))
    state_dir.mkdir(parents=True, exist_ok=True)
    service = build_service(state_dir)
    app = create_app(service, ui_dir=args.ui)
    print(f"survey fixture server on http://{args.host}:{args.port} (state: {state_dir})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
