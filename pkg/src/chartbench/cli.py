"""Command-line entry point.

Subcommands: ingest, run, score-original, errors {select,code,tally},
survey {assign,serve,stats}, report. Exit codes: 0 success, 2 config
error, 3 failure budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .corpus import Corpus, load_manifest, validate_category
from .erranalysis import (
    CodingError,
    CodingStore,
    CoverageError,
    select_contrastive,
    tally,
)
from .pipeline import ORIGINAL, FailureBudgetExceeded, Pipeline, PipelineError
from .report import (
    ReportError,
    load_summary,
    render_benchmark,
    render_errors,
    render_survey,
    write_report_files,
)
from .scoring import read_verdicts
from .survey import (
    Assignment,
    ChartRef,
    SurveyError,
    SurveyService,
    SurveyStore,
    ZeroVarianceError,
    create_app,
    create_assignment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chartbench",
        description="Benchmark LLM chart generation with chart-QA scoring.",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--run-dir", type=Path, help="override the run directory")
    parser.add_argument("--mock", action="store_true", help="force mock endpoints")
    parser.add_argument(
        "--replay", action="store_true", help="serve every model call from cache"
    )
    parser.add_argument("--concurrency", type=int, help="parallel sample width")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate a manifest and print counts")
    p_ingest.add_argument("--manifest", type=Path, help="manifest path (else from config)")

    p_run = sub.add_parser("run", help="execute pipeline stages")
    p_run.add_argument(
        "--stages",
        default="generate,render,vqa,extract,score,report",
        help="comma-separated stage list",
    )

    sub.add_parser("score-original", help="baseline VQA accuracy on original charts")

    p_errors = sub.add_parser("errors", help="contrastive error workflow")
    errors_sub = p_errors.add_subparsers(dest="errors_command", required=True)
    p_select = errors_sub.add_parser("select", help="queue contrastive cases")
    p_select.add_argument("--a", required=True, help="first condition label")
    p_select.add_argument("--b", required=True, help="second condition label")
    p_code = errors_sub.add_parser("code", help="record one coding decision")
    p_code.add_argument("--case", required=True)
    p_code.add_argument("--code", required=True, dest="error_code")
    p_code.add_argument("--coder", required=True)
    p_code.add_argument("--recode", action="store_true")
    errors_sub.add_parser("tally", help="render the coded error table")

    p_survey = sub.add_parser("survey", help="human-study workflow")
    survey_sub = p_survey.add_subparsers(dest="survey_command", required=True)
    p_assign = survey_sub.add_parser("assign", help="create rater assignments")
    p_assign.add_argument("--raters", required=True, help="comma-separated rater ids")
    p_assign.add_argument("--per-condition", type=int, required=True)
    p_assign.add_argument("--conditions", help="comma-separated condition labels")
    p_assign.add_argument("--seed", type=int, default=None)
    p_serve = survey_sub.add_parser("serve", help="serve the survey API")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8750)
    p_serve.add_argument("--ui", type=Path, help="built frontend directory to serve at /")
    p_stats = survey_sub.add_parser("stats", help="item means for a condition")
    p_stats.add_argument("--condition", required=True)
    p_stats.add_argument("--irr", help="two rater ids, comma-separated")
    p_stats.add_argument(
        "--per-chart",
        action="store_true",
        help="with --irr, also list per-chart agreement (unvalidated view)",
    )

    p_report = sub.add_parser("report", help="re-render report files from summary.json")
    p_report.add_argument("--summary", type=Path, help="summary.json path")
    p_report.add_argument(
        "--with-survey",
        action="store_true",
        help="embed survey statistics from the run's responses",
    )

    return parser


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required for this command")
    return load_config(args.config, mock=True if args.mock else None)


def _pipeline(args) -> Pipeline:
    config = _load(args)
    return Pipeline(
        config,
        run_dir=args.run_dir,
        replay=args.replay,
        sample_workers=args.concurrency,
    )


def _cmd_ingest(args) -> int:
    if args.manifest is not None:
        manifest = args.manifest
    else:
        manifest = _load(args).manifest
    samples = load_manifest(manifest)
    qa_total = sum(len(s.qa) for s in samples)
    families: dict[str, int] = {}
    for sample in samples:
        families[sample.dataset_family] = families.get(sample.dataset_family, 0) + 1
    print(f"manifest: {manifest}")
    print(f"samples: {len(samples)}")
    print(f"qa pairs: {qa_total}")
    for family in sorted(families):
        print(f"  {family}: {families[family]} samples")
    violations = [v for s in samples for v in validate_category(s)]
    if violations:
        for v in violations:
            print(f"violation: sample {v.sample_id} qa {v.qa_id}: {v.category} vs {v.family}")
        return EXIT_CONFIG
    return EXIT_OK


def _cmd_run(args) -> int:
    pipeline = _pipeline(args)
    stages = {s.strip() for s in args.stages.split(",") if s.strip()}
    summary = pipeline.run(stages=stages)
    print(f"run dir: {pipeline.run_dir}")
    for family in sorted(summary["families"]):
        print()
        print(render_benchmark(summary, family))
    return EXIT_OK


def _cmd_score_original(args) -> int:
    pipeline = _pipeline(args)
    summary = pipeline.score_original()
    for family in sorted(summary["families"]):
        print()
        print(render_benchmark(summary, family))
    return EXIT_OK


def _coding_store(run_dir: Path) -> CodingStore:
    coding_dir = run_dir / "coding"
    coding_dir.mkdir(parents=True, exist_ok=True)
    return CodingStore(coding_dir / "queue.ldjson", coding_dir / "codes.ldjson")


def _run_dir(args, config) -> Path:
    if args.run_dir is not None:
        return args.run_dir
    return config.out_dir / config.run_id()


def _cmd_errors_select(args) -> int:
    config = _load(args)
    run_dir = _run_dir(args, config)
    corpus = Corpus.load(config.manifest)

    def load_condition(label: str):
        verdicts = []
        for sample in corpus:
            for path in sorted((run_dir / "verdicts" / label).glob(f"{sample.id}.*.jsonl")):
                verdicts.extend(read_verdicts(path))
        if not verdicts:
            raise PipelineError(f"no verdicts for condition {label!r} in {run_dir}")
        return verdicts

    def image_for(label: str, sample_id: str) -> str | None:
        matches = sorted((run_dir / "images" / label).glob(f"{sample_id}.*.png"))
        if matches:
            return str(matches[-1])
        sample = corpus.by_id[sample_id]
        if label == ORIGINAL and sample.original_image:
            return str(sample.original_image)
        return None

    verdicts_a = load_condition(args.a)
    verdicts_b = load_condition(args.b)
    context = {}
    for sample in corpus:
        for pair in sample.qa:
            context[pair.qa_id] = {
                "sample_id": sample.id,
                "question": pair.question,
                "images": {
                    args.a: image_for(args.a, sample.id),
                    args.b: image_for(args.b, sample.id),
                },
            }
    a_only, b_only = select_contrastive(verdicts_a, verdicts_b, context)
    store = _coding_store(run_dir)
    store.enqueue(a_only + b_only)
    print(f"{args.a} only errors: {len(a_only)}")
    print(f"{args.b} only errors: {len(b_only)}")
    print(f"queued cases: {len(store.cases())} ({len(store.pending())} pending)")
    return EXIT_OK


def _cmd_errors_code(args) -> int:
    config = _load(args)
    store = _coding_store(_run_dir(args, config))
    case = store.record_code(args.case, args.error_code, args.coder, recode=args.recode)
    print(f"coded {case.case_id} as {case.code} (coder {case.coder})")
    return EXIT_OK


def _cmd_errors_tally(args) -> int:
    config = _load(args)
    store = _coding_store(_run_dir(args, config))
    cells = tally(store.cases())
    print(render_errors(cells))
    return EXIT_OK


def _survey_paths(run_dir: Path) -> dict[str, Path]:
    survey_dir = run_dir / "survey"
    return {
        "dir": survey_dir,
        "charts": survey_dir / "chart_map.json",
        "assignments": survey_dir / "assignments.json",
        "responses": survey_dir / "responses.ldjson",
    }


def _cmd_survey_assign(args) -> int:
    config = _load(args)
    run_dir = _run_dir(args, config)
    corpus = Corpus.load(config.manifest)
    labels = (
        [label.strip() for label in args.conditions.split(",")]
        if args.conditions
        else [c.label for c in config.conditions]
    )
    charts_by_condition: dict[str, list[ChartRef]] = {}
    for label in labels:
        refs = []
        for sample in corpus:
            matches = sorted((run_dir / "images" / label).glob(f"{sample.id}.*.png"))
            if matches:
                refs.append(
                    ChartRef(
                        chart_id=ChartRef.make_id(sample.id, label),
                        sample_id=sample.id,
                        condition=label,
                        image_path=str(matches[-1]),
                    )
                )
        if not refs:
            raise PipelineError(f"no rendered charts for condition {label!r} in {run_dir}")
        charts_by_condition[label] = refs
    seed = args.seed if args.seed is not None else config.seed
    raters = [r.strip() for r in args.raters.split(",") if r.strip()]
    assignments = create_assignment(
        raters, charts_by_condition, args.per_condition, seed
    )
    paths = _survey_paths(run_dir)
    paths["dir"].mkdir(parents=True, exist_ok=True)
    all_refs = [ref for refs in charts_by_condition.values() for ref in refs]
    paths["charts"].write_text(
        json.dumps([ref.to_record() for ref in all_refs], indent=2, sort_keys=True),
        encoding="utf-8",
    )
    paths["assignments"].write_text(
        json.dumps([a.to_record() for a in assignments], indent=2, sort_keys=True),
        encoding="utf-8",
    )
    for assignment in assignments:
        print(f"rater {assignment.rater_id}: {len(assignment.chart_ids)} charts")
    return EXIT_OK


def _survey_service(args, config) -> SurveyService:
    run_dir = _run_dir(args, config)
    paths = _survey_paths(run_dir)
    if not paths["charts"].is_file() or not paths["assignments"].is_file():
        raise PipelineError(
            f"survey not initialized under {run_dir}; run `survey assign` first"
        )
    charts = [
        ChartRef.from_record(r)
        for r in json.loads(paths["charts"].read_text(encoding="utf-8"))
    ]
    assignments = [
        Assignment.from_record(r)
        for r in json.loads(paths["assignments"].read_text(encoding="utf-8"))
    ]
    corpus = Corpus.load(config.manifest)
    return SurveyService(
        charts=charts,
        assignments=assignments,
        store=SurveyStore(paths["responses"]),
        tables={s.id: s.table for s in corpus},
        titles={s.id: s.title for s in corpus},
    )


def _cmd_survey_serve(args) -> int:
    import uvicorn

    config = _load(args)
    service = _survey_service(args, config)
    app = create_app(service, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_survey_stats(args) -> int:
    config = _load(args)
    service = _survey_service(args, config)
    means = service.item_means(args.condition)
    print(f"condition: {args.condition} (n={service.response_count(args.condition)})")
    for item_id, mean in sorted(means.items()):
        print(f"  item {item_id}: {mean:.2f}")
    for qtype, mean in sorted(service.type_means(args.condition).items()):
        print(f"  {qtype}: {mean:.2f}")
    if args.irr:
        a, b = [r.strip() for r in args.irr.split(",")]
        try:
            value = service.inter_rater_pearson(a, b, args.condition)
            print(f"  pearson({a}, {b}): {value:.3f}")
        except ZeroVarianceError as exc:
            print(f"  pearson({a}, {b}): undefined ({exc})")
        if args.per_chart:
            for chart_id, r in service.per_chart_agreement(a, b, args.condition).items():
                print(f"    {chart_id}: {'undefined' if r is None else f'{r:.3f}'}")
    return EXIT_OK


def _survey_stats_section(service: SurveyService) -> dict | None:
    """Survey block for the run summary: stats per condition with responses."""
    from chartbench.survey import SURVEY_ITEMS

    conditions = {}
    for condition in sorted({c.condition for c in service.charts.values()}):
        if service.response_count(condition) == 0:
            continue
        conditions[condition] = {
            "item_means": {
                str(k): v for k, v in service.item_means(condition).items()
            },
            "type_means": service.type_means(condition),
            "n": service.response_count(condition),
        }
    if not conditions:
        return None
    return {
        "item_texts": {str(item.item_id): item.text for item in SURVEY_ITEMS},
        "conditions": conditions,
    }


def _cmd_report(args) -> int:
    if args.summary is not None:
        summary_path = args.summary
    else:
        config = _load(args)
        summary_path = _run_dir(args, config) / "report" / "summary.json"
    summary = load_summary(summary_path)
    if args.with_survey:
        service = _survey_service(args, _load(args))
        summary["survey"] = _survey_stats_section(service)
    write_report_files(summary, summary_path.parent)
    for family in sorted(summary.get("families", {})):
        print()
        print(render_benchmark(summary, family))
    if summary.get("errors"):
        print()
        print(render_errors(summary["errors"]))
    if summary.get("survey"):
        print()
        print(render_survey(summary["survey"]))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "score-original":
            return _cmd_score_original(args)
        if args.command == "errors":
            if args.errors_command == "select":
                return _cmd_errors_select(args)
            if args.errors_command == "code":
                return _cmd_errors_code(args)
            return _cmd_errors_tally(args)
        if args.command == "survey":
            if args.survey_command == "assign":
                return _cmd_survey_assign(args)
            if args.survey_command == "serve":
                return _cmd_survey_serve(args)
            return _cmd_survey_stats(args)
        if args.command == "report":
            return _cmd_report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FailureBudgetExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (PipelineError, CodingError, CoverageError, SurveyError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
