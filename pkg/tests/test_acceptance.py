"""Acceptance suite: one test per release criterion, at the stated
tolerances and time bounds. The conftest hook prints a PASS/FAIL line per
criterion at the end of the run.

Published inter-rater correlations (0.793 for the first condition, 0.853
for the second) are recorded here as non-reproducible: they depend on the
two participants' raw ratings, which were never released. The Pearson
implementation itself is validated against exact hand computations
instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import time

import pytest

from chartbench.config import load_config
from chartbench.corpus import DataTable
from chartbench.erranalysis import select_contrastive, tally
from chartbench.pipeline import Pipeline
from chartbench.prompts import ZERO_SHOT, build, few_shot, input_query, select_examples
from chartbench.prompts import load_example_bank, system_instructions
from chartbench.rendersandbox import RenderRequest, RenderSupervisor
from chartbench.report import render_benchmark, render_errors
from chartbench.scoring import DEFAULT_TOLERANCE, aggregate, match, normalize
from chartbench.survey import ZeroVarianceError, pearson

from .conftest import FIXTURES, GOLDENS, STUB_WORKER_CMD, TEST_FIXTURES
from .helpers import counts_matching_percent, oracle_judgement, oracle_pearson
from .test_erranalysis import make_case, verdict_set
from .test_scoring import make_verdicts, random_judgement_cases

PUBLISHED_INTER_RATER = {"condition_1": 0.793, "condition_2": 0.853}  # non-reproducible


def test_c1_relaxed_match_oracle():
    """Brute-force oracle agrees on 10,000 randomized pairs in under 5 s."""
    started = time.monotonic()
    cases = random_judgement_cases(10_000, seed=20250809)
    boundary_cases = sum(
        1
        for _, _, (p, _, g, _) in cases
        if p is not None and g not in (None, 0) and abs(p - g) * 20 == abs(g)
    )
    assert boundary_cases > 100, "generator must include exact +/-5% boundaries"
    disagreements = []
    for predicted_raw, gold_raw, ground in cases:
        got = match(normalize(predicted_raw), normalize(gold_raw), DEFAULT_TOLERANCE)
        expected = oracle_judgement(*ground)
        if got != expected:
            disagreements.append((predicted_raw, gold_raw, got, expected))
    elapsed = time.monotonic() - started
    assert not disagreements, disagreements[:5]
    assert elapsed < 5.0, f"oracle comparison took {elapsed:.2f}s"


def test_c2_aggregation_reproduces_published_tables():
    """Count-derived fixtures reproduce the published rows in under 1 s."""
    started = time.monotonic()

    # ChartQA original-charts row: counts are the unique integers
    # reproducing the published percentages at the stated n.
    assert counts_matching_percent(35.4, 390) == [138]
    assert counts_matching_percent(80.1, 723) == [579]
    report = aggregate(make_verdicts([("human", 390, 138), ("augmented", 723, 579)]))
    assert report.overall.n == 1113
    assert report.overall.accuracy == 64.4
    assert report.by_category["human"].accuracy == 35.4
    assert report.by_category["augmented"].accuracy == 80.1

    # PlotQA original-charts row. The published category percentages are
    # reproduced exactly; the published Overall (80.6) is arithmetically
    # unreachable from these category n's (max weighted mean ~80.4; the
    # category n's sum to 14,127, not the stated 14,427 pairs), so the
    # overall is asserted at the value implied by the frozen counts.
    buckets = {
        "arithmetic": (43.6, 1789),
        "comparison": (73.2, 1044),
        "compound": (71.2, 2311),
        "data_retrieval": (88.3, 3352),
        "min_max": (94.1, 1146),
        "structural": (92.0, 4485),
    }
    frozen_counts = {
        "arithmetic": 780,
        "comparison": 764,
        "compound": 1645,
        "data_retrieval": 2959,
        "min_max": 1078,
        "structural": 4124,
    }
    for category, (percent, n) in buckets.items():
        candidates = counts_matching_percent(percent, n)
        assert frozen_counts[category] == candidates[0], category
    plotqa = aggregate(
        make_verdicts([(c, buckets[c][1], frozen_counts[c]) for c in buckets])
    )
    for category, (percent, _) in buckets.items():
        assert plotqa.by_category[category].accuracy == percent, category
    assert plotqa.overall.n == 14127
    assert plotqa.overall.correct == 11350
    assert plotqa.overall.accuracy == 80.3

    elapsed = time.monotonic() - started
    assert elapsed < 1.0, f"aggregation fixtures took {elapsed:.2f}s"


def test_c3_extraction_metric_properties(corpus):
    """Identity, the 100->90 case, order sensitivity, and clipping; < 1 s."""
    from chartbench.tablediff import exact_match, similarity_score

    started = time.monotonic()
    for sample in corpus:
        assert similarity_score(sample.table, sample.table) == 100.0
        assert exact_match(sample.table, sample.table) is True

    single_gt = DataTable.from_strings(["v"], [["100"]])
    single_ex = DataTable.from_strings(["v"], [["90"]])
    assert math.isclose(similarity_score(single_gt, single_ex), 90.0, rel_tol=1e-12)

    base = DataTable.from_strings(
        ["City", "A", "B"], [["Oslo", "763", "790"], ["Cairo", "25", "18"]]
    )
    permuted = DataTable.from_strings(
        ["City", "A", "B"], [["Cairo", "25", "18"], ["Oslo", "763", "790"]]
    )
    assert exact_match(base, permuted) is False
    assert similarity_score(base, permuted) == 100.0

    # per-cell distance clipped at 1: similarity never goes negative
    rng = random.Random(7)
    for _ in range(200):
        gt_value = rng.uniform(-1000, 1000)
        ex_value = rng.uniform(-1e9, 1e9)
        gt = DataTable.from_strings(["v"], [[repr(gt_value)]])
        ex = DataTable.from_strings(["v"], [[repr(ex_value)]])
        score = similarity_score(gt, ex)
        assert 0.0 <= score <= 100.0

    elapsed = time.monotonic() - started
    assert elapsed < 1.0, f"extraction properties took {elapsed:.2f}s"


def test_c4_error_tally_format_and_partition_law():
    """The published cell renders byte-exact; the partition law holds."""
    cases = [
        make_case(f"g{i}", loser="GPT3.5", winner="Llama",
                  code="vqa_model_error" if i < 38 else "labels_overlapping")
        for i in range(166)
    ]
    cells = tally(cases)
    assert cells["GPT3.5"]["vqa_model_error"].format() == "38 (22.89%)"
    rendered = render_errors(cells)
    assert "38 (22.89%)" in rendered.splitlines()[1]

    rng = random.Random(13)
    for trial in range(25):
        qa_ids = [f"q{trial}_{i}" for i in range(rng.randrange(1, 40))]
        truth_a = {q: rng.random() < 0.5 for q in qa_ids}
        truth_b = {q: rng.random() < 0.5 for q in qa_ids}
        a_only, b_only = select_contrastive(
            verdict_set("A", truth_a), verdict_set("B", truth_b)
        )
        both_right = sum(1 for q in qa_ids if truth_a[q] and truth_b[q])
        both_wrong = sum(1 for q in qa_ids if not truth_a[q] and not truth_b[q])
        assert len(a_only) + len(b_only) + both_right + both_wrong == len(qa_ids)


def test_c5_prompt_goldens(corpus):
    """System and query prompts match goldens byte-exactly; few_shot(3) = 8."""
    golden_system = (GOLDENS / "system_instructions.txt").read_bytes()
    assert system_instructions().encode("utf-8") == golden_system

    golden_query = (GOLDENS / "input_query_s1.txt").read_bytes()
    assert input_query(corpus.samples[0], "s1.png").encode("utf-8") == golden_query

    bank = load_example_bank(FIXTURES / "example_bank.json")
    examples = select_examples(bank, corpus.samples[0], 3)
    bundle = build(corpus.samples[0], few_shot(3), examples, "s1.png")
    assert len(bundle.messages) == 8
    assert len(build(corpus.samples[0], ZERO_SHOT, [], "s1.png").messages) == 2


def test_c6_end_to_end_mock_run(run_config_factory, tmp_path):
    """Full mock run matches the recorded digest; resume reproduces it; <60 s."""
    golden_digest = (GOLDENS / "summary_digest.txt").read_text().strip()
    config = load_config(run_config_factory())
    started = time.monotonic()

    clean = Pipeline(config, run_dir=tmp_path / "clean")
    clean.run()
    clean_bytes = (clean.run_dir / "report" / "summary.json").read_bytes()
    assert hashlib.sha256(clean_bytes).hexdigest() == golden_digest

    # interrupted at a stage boundary, then resumed
    resumed = Pipeline(config, run_dir=tmp_path / "resumed")
    resumed.run(stages={"generate", "render"})
    resumed.run()
    resumed_bytes = (resumed.run_dir / "report" / "summary.json").read_bytes()
    assert hashlib.sha256(resumed_bytes).hexdigest() == golden_digest

    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"end-to-end mock run took {elapsed:.1f}s"

    # the rendered original row is present in the benchmark table
    summary = json.loads(clean_bytes)
    table = render_benchmark(summary, "chartqa")
    assert table.splitlines()[1].startswith("Original Charts  66.7")


def test_c7_sandbox_safety(tmp_path):
    """Exception, wrong filename, and infinite loop map to their statuses."""
    programs = TEST_FIXTURES / "programs"
    supervisor = RenderSupervisor(STUB_WORKER_CMD, slots=1)

    def run(name: str, wall: float) -> tuple:
        request = RenderRequest(
            sample_id=name,
            code=(programs / name).read_text(encoding="utf-8"),
            expected_png="chart.png",
            workdir=tmp_path / name,
            wall_limit_s=wall,
        )
        started = time.monotonic()
        outcome = supervisor.submit(request)
        return outcome, time.monotonic() - started

    outcome, _ = run("raises.py", wall=15)
    assert outcome.status == "runtime_error"
    assert "ZeroDivisionError" in outcome.stderr_tail

    outcome, _ = run("wrong_filename.py", wall=15)
    assert outcome.status == "missing_output"

    wall = 1.0
    outcome, elapsed = run("infinite_loop.py", wall=wall)
    assert outcome.status == "timeout"
    assert elapsed < wall + 2.0, f"timeout took {elapsed:.2f}s (wall {wall}s)"


def test_c8_pearson_correctness():
    """Hand-computed vectors to 1e-12; identity 1.0; reversal -1.0."""
    xs = [4.25, 4.0, 4.0, 4.75, 3.0, 2.5, 4.0]
    ys = [3.75, 4.25, 4.5, 4.0, 3.25, 3.0, 3.5]
    assert abs(pearson(xs, ys) - oracle_pearson(xs, ys)) < 1e-12

    ascending = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    descending = list(reversed(ascending))
    assert math.isclose(pearson(ascending, ascending), 1.0, abs_tol=1e-12)
    assert math.isclose(pearson(ascending, descending), -1.0, abs_tol=1e-12)

    with pytest.raises(ZeroVarianceError):
        pearson([3.0] * 7, ys)

    # the published values are recorded but not reproducible without the
    # participants' raw ratings
    assert set(PUBLISHED_INTER_RATER.values()) == {0.793, 0.853}
