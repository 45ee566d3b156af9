"""Run orchestration: corpus -> prompts -> generation -> render -> VQA ->
extraction -> scoring -> report.

Every intermediate is persisted under the run directory with a content
hash in the file name, so an interrupted run resumes by skipping any unit
whose artifact already exists, and a clean rerun makes zero model calls.
Per-unit failures are isolated and recorded; the run only aborts when the
failure fraction exceeds the configured budget.

Run directory layout:

    runs/{run_id}/
      codes/{condition}/{sample}.{prompt_hash}.py     generated programs
      codes/{condition}/{sample}.{prompt_hash}.json   generation records
      work/{condition}/{sample}/                      render scratch dirs
      images/{condition}/{sample}.{code_sha}.png      rendered charts
      renders/{condition}/{sample}.{code_sha}.json    render outcomes
      answers/{condition}/{sample}.{image_sha}.jsonl  raw VQA answers
      extractions/{condition}/{sample}.{image_sha}.json
      verdicts/{condition}/{sample}.{answers_sha}.jsonl
      failures/{condition}/{sample}.{stage}.json
      report/summary.json, report.md, report.csv
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import util as importlib_util
from pathlib import Path

from . import __version__
from .config import ConditionSpec, HarnessConfig, validate_stages
from .corpus import Corpus, Sample
from .mocks import MockTransport
from .modelgate import ExtractionParseError, ModelGate, parse_linearized_table
from .prompts import build, load_example_bank, select_examples
from .rendersandbox import RenderOutcome, RenderRequest, RenderSupervisor
from .report import SUMMARY_SCHEMA, write_report_files
from .scoring import aggregate, judge, read_verdicts, write_verdicts
from .tablediff import failed_extraction_score, score_extraction

logger = logging.getLogger(__name__)

ORIGINAL = "original"


class FailureBudgetExceeded(Exception):
    """Too many per-unit failures; the run result would be meaningless."""


class PipelineError(Exception):
    pass


def _tmp_name(path: Path) -> Path:
    return path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = _tmp_name(path)
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = _tmp_name(path)
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _sha12(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:12]


def render_worker_available() -> bool:
    """True when the render-worker package is actually installed.

    A loaderless namespace hit (e.g. a source checkout directory shadowing
    the name on sys.path) does not count.
    """
    try:
        spec = importlib_util.find_spec("render_worker")
    except (ImportError, ValueError):
        return False
    return spec is not None and spec.loader is not None


def default_worker_cmd() -> list[str] | None:
    """The secondary render-worker package, when installed."""
    if render_worker_available():
        return [sys.executable, "-m", "render_worker"]
    return None


@dataclass
class UnitFailure:
    condition: str
    sample_id: str
    stage: str
    error: str

    def to_record(self) -> dict:
        return {
            "condition": self.condition,
            "sample_id": self.sample_id,
            "stage": self.stage,
            "error": self.error,
        }


class Pipeline:
    def __init__(
        self,
        config: HarnessConfig,
        run_dir: Path | None = None,
        replay: bool = False,
        sample_workers: int | None = None,
    ):
        self.config = config
        self.run_id = config.run_id()
        self.run_dir = Path(run_dir) if run_dir else config.out_dir / self.run_id
        self.sample_workers = sample_workers or config.sample_workers
        transport = None
        if config.mock_enabled:
            transport = (
                MockTransport.from_file(config.mock_fixture)
                if config.mock_fixture
                else MockTransport()
            )
        self.gate = ModelGate(
            cache_dir=config.cache_dir,
            transport=transport,
            retry=config.retry,
            max_in_flight=config.max_in_flight,
            replay=replay,
        )
        self.corpus = Corpus.load(config.manifest)
        self._example_bank = (
            load_example_bank(config.example_bank) if config.example_bank else []
        )
        self._supervisor: RenderSupervisor | None = None
        self.failures: list[UnitFailure] = []

    # ---------- workers ----------

    def _supervisor_or_raise(self) -> RenderSupervisor:
        if self._supervisor is None:
            worker_cmd = self.config.worker_cmd or default_worker_cmd()
            if worker_cmd is None:
                raise PipelineError(
                    "no render worker: set render.worker_cmd or install the"
                    " render-worker package"
                )
            self._supervisor = RenderSupervisor(
                worker_cmd, slots=self.config.render_slots
            )
        return self._supervisor

    # ---------- per-unit stages ----------

    def _png_name(self, sample: Sample) -> str:
        return f"{sample.id}.png"

    def _generate(self, condition: ConditionSpec, sample: Sample) -> str:
        """Produce (or reload) the generated program for one unit."""
        strategy = condition.strategy
        examples = (
            select_examples(self._example_bank, sample, strategy.shots, self.config.seed)
            if strategy.name == "few_shot"
            else []
        )
        bundle = build(sample, strategy, examples, self._png_name(sample))
        code_path = (
            self.run_dir / "codes" / condition.label /
            f"{sample.id}.{bundle.prompt_hash[:12]}.py"
        )
        if code_path.is_file():
            return code_path.read_text(encoding="utf-8")
        endpoint = self.config.endpoints["generation"]
        if condition.model != endpoint.model_name:
            endpoint = type(endpoint)(
                kind=endpoint.kind,
                base_url=endpoint.base_url,
                model_name=condition.model,
                auth_env=endpoint.auth_env,
                timeout_s=endpoint.timeout_s,
            )
        code = self.gate.chat_complete(endpoint, bundle, self.config.sampling)
        record = {
            "sample_id": sample.id,
            "condition": condition.label,
            "model": condition.model,
            "strategy": strategy.label,
            "prompt_hash": bundle.prompt_hash,
            "code_sha": _sha12(code.encode("utf-8")),
        }
        _atomic_write_text(code_path.with_suffix(".json"), json.dumps(record, sort_keys=True))
        _atomic_write_text(code_path, code)
        return code

    def _render(self, condition: ConditionSpec, sample: Sample, code: str) -> Path | None:
        """Render one generated program; returns the image path when ok."""
        code_sha = _sha12(code.encode("utf-8"))
        outcome_path = (
            self.run_dir / "renders" / condition.label / f"{sample.id}.{code_sha}.json"
        )
        image_path = (
            self.run_dir / "images" / condition.label / f"{sample.id}.{code_sha}.png"
        )
        if outcome_path.is_file():
            outcome = json.loads(outcome_path.read_text(encoding="utf-8"))
            if outcome["status"] == "ok" and image_path.is_file():
                return image_path
            return None
        workdir = self.run_dir / "work" / condition.label / sample.id
        if workdir.exists():
            shutil.rmtree(workdir)
        request = RenderRequest(
            sample_id=sample.id,
            code=code,
            expected_png=self._png_name(sample),
            workdir=workdir,
            wall_limit_s=self.config.wall_limit_s,
        )
        outcome: RenderOutcome = self._supervisor_or_raise().submit(request)
        if outcome.status == "ok":
            _atomic_write_bytes(image_path, Path(outcome.image).read_bytes())
        record = outcome.to_record()
        record["code_sha"] = code_sha
        _atomic_write_text(outcome_path, json.dumps(record, sort_keys=True))
        shutil.rmtree(workdir, ignore_errors=True)
        if outcome.status != "ok":
            logger.info(
                "render failed for %s/%s: %s", condition.label, sample.id, outcome.status
            )
            return None
        return image_path

    def _vqa(self, condition_label: str, sample: Sample, image_path: Path) -> Path:
        """Ask every gold question about one image; persist raw answers."""
        image = image_path.read_bytes()
        image_sha = _sha12(image)
        answers_path = (
            self.run_dir / "answers" / condition_label / f"{sample.id}.{image_sha}.jsonl"
        )
        if answers_path.is_file():
            return answers_path
        endpoint = self.config.endpoints["vqa"]
        rows = []
        for pair in sample.qa:
            answer = self.gate.vqa_answer(endpoint, image, pair.question)
            rows.append(
                {
                    "qa_id": pair.qa_id,
                    "question": pair.question,
                    "answer": answer,
                    "image_sha": image_sha,
                }
            )
        _atomic_write_text(
            answers_path,
            "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n",
        )
        return answers_path

    def _extract(self, condition_label: str, sample: Sample, image_path: Path) -> Path:
        """Extract a table from one image and score it against ground truth."""
        image = image_path.read_bytes()
        image_sha = _sha12(image)
        out_path = (
            self.run_dir / "extractions" / condition_label /
            f"{sample.id}.{image_sha}.json"
        )
        if out_path.is_file():
            return out_path
        endpoint = self.config.endpoints["extraction"]
        raw_text = self.gate.extract_table_raw(endpoint, image)
        try:
            extracted = parse_linearized_table(raw_text)
            score = score_extraction(sample.table, extracted)
            error = None
        except ExtractionParseError as exc:
            score = failed_extraction_score(sample.table)
            error = str(exc)
        record = {
            "sample_id": sample.id,
            "model_id": condition_label,
            "similarity": score.similarity,
            "exact": score.exact,
            "unmatched_cells": score.unmatched_cells,
            "raw_extraction_text": raw_text,
            "image_sha": image_sha,
            "error": error,
        }
        _atomic_write_text(out_path, json.dumps(record, sort_keys=True))
        return out_path

    def _score(
        self, condition_label: str, strategy_label: str, sample: Sample, answers_path: Path
    ) -> Path:
        """Judge persisted answers into verdicts (the audit chain's last link)."""
        answers_bytes = answers_path.read_bytes()
        answers_sha = _sha12(answers_bytes)
        verdicts_path = (
            self.run_dir / "verdicts" / condition_label /
            f"{sample.id}.{answers_sha}.jsonl"
        )
        if verdicts_path.is_file():
            return verdicts_path
        answers = [
            (row["qa_id"], row["answer"])
            for row in (
                json.loads(line)
                for line in answers_bytes.decode("utf-8").splitlines()
                if line.strip()
            )
        ]
        verdicts = judge(
            sample,
            answers,
            model_id=condition_label,
            strategy=strategy_label,
            tol=self.config.tolerance,
        )
        verdicts_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = _tmp_name(verdicts_path)
        write_verdicts(tmp, verdicts)
        os.replace(tmp, verdicts_path)
        return verdicts_path

    # ---------- unit driver ----------

    def _run_unit(self, condition: ConditionSpec | None, sample: Sample, stages: set[str]) -> None:
        """All enabled stages for one (condition, sample), sequentially.

        condition=None means the original-charts baseline (no generate or
        render; the dataset image is the chart under test). Each stage's
        failure is recorded in isolation; later stages still run with
        whatever inputs exist, so e.g. a broken extraction never blocks
        scoring.
        """
        label = ORIGINAL if condition is None else condition.label

        def attempt(stage: str, fn):
            try:
                return fn()
            except Exception as exc:  # noqa: BLE001 - unit isolation is the point
                logger.warning(
                    "unit %s/%s failed at %s: %s", label, sample.id, stage, exc
                )
                failure = UnitFailure(
                    label, sample.id, stage, f"{type(exc).__name__}: {exc}"
                )
                self.failures.append(failure)
                _atomic_write_text(
                    self.run_dir / "failures" / label / f"{sample.id}.{stage}.json",
                    json.dumps(failure.to_record(), sort_keys=True),
                )
                return None

        if condition is None:
            def original_image() -> Path:
                if sample.original_image is None:
                    raise PipelineError(f"sample {sample.id} has no original image")
                return Path(sample.original_image)

            image_path = attempt("original_image", original_image)
        else:
            code = (
                attempt("generate", lambda: self._generate(condition, sample))
                if "generate" in stages
                else None
            )
            image_path = (
                attempt("render", lambda: self._render(condition, sample, code))
                if "render" in stages and code is not None
                else None
            )
        answers_path = (
            attempt("vqa", lambda: self._vqa(label, sample, image_path))
            if "vqa" in stages and image_path is not None
            else None
        )
        if "extract" in stages and image_path is not None:
            attempt("extract", lambda: self._extract(label, sample, image_path))
        if "score" in stages and answers_path is not None:
            strategy_label = ORIGINAL if condition is None else condition.strategy.label
            attempt(
                "score",
                lambda: self._score(label, strategy_label, sample, answers_path),
            )

    # ---------- aggregation ----------

    def _load_unit_artifacts(self, label: str, sample: Sample) -> dict:
        unit: dict = {"render": None, "verdicts": None, "extraction": None}
        renders = sorted((self.run_dir / "renders" / label).glob(f"{sample.id}.*.json"))
        if renders:
            unit["render"] = json.loads(renders[-1].read_text(encoding="utf-8"))
        verdicts = sorted((self.run_dir / "verdicts" / label).glob(f"{sample.id}.*.jsonl"))
        if verdicts:
            unit["verdicts"] = read_verdicts(verdicts[-1])
        extractions = sorted(
            (self.run_dir / "extractions" / label).glob(f"{sample.id}.*.json")
        )
        if extractions:
            unit["extraction"] = json.loads(extractions[-1].read_text(encoding="utf-8"))
        return unit

    def _summarize(
        self, stages: set[str], with_original: bool, with_generated: bool
    ) -> dict:
        labels = ([ORIGINAL] if with_original else []) + (
            [c.label for c in self.config.conditions] if with_generated else []
        )
        families = sorted({s.dataset_family for s in self.corpus})
        summary_families: dict = {}
        for family in families:
            samples = [s for s in self.corpus if s.dataset_family == family]
            per_condition: dict = {}
            for label in labels:
                verdicts = []
                sims: list[float] = []
                exact_count = 0
                extraction_n = 0
                render_ok = 0
                render_failed = 0
                for sample in samples:
                    unit = self._load_unit_artifacts(label, sample)
                    if unit["verdicts"]:
                        verdicts.extend(unit["verdicts"])
                    if unit["extraction"]:
                        extraction_n += 1
                        sims.append(unit["extraction"]["similarity"])
                        exact_count += int(unit["extraction"]["exact"])
                    if label != ORIGINAL and unit["render"]:
                        if unit["render"]["status"] == "ok":
                            render_ok += 1
                        else:
                            render_failed += 1
                entry: dict = {"n_samples": len(samples)}
                entry["render"] = (
                    None
                    if label == ORIGINAL
                    else {"ok": render_ok, "failed": render_failed}
                )
                entry["accuracy"] = (
                    aggregate(verdicts).to_record() if verdicts else None
                )
                entry["extraction"] = (
                    {
                        "mean_similarity": sum(sims) / len(sims),
                        "exact_fraction": exact_count / extraction_n,
                        "n_charts": extraction_n,
                    }
                    if extraction_n
                    else None
                )
                per_condition[label] = entry
            summary_families[family] = {"conditions": per_condition}
        return {
            "schema_version": SUMMARY_SCHEMA,
            "run_id": self.run_id,
            "code_version": __version__,
            "config_digest": self.config.config_digest(),
            "data_digest": self.config.data_digest(),
            "stages": sorted(stages),
            "conditions": labels,
            "families": summary_families,
            "failures": sorted(
                (f.to_record() for f in self.failures),
                key=lambda r: (r["condition"], r["sample_id"], r["stage"]),
            ),
            "errors": None,
            "survey": None,
        }

    # ---------- entry points ----------

    def run(self, stages: set[str] | None = None, only_original: bool = False) -> dict:
        """Execute the enabled stages and return the run summary."""
        stages = set(stages) if stages else set(
            ("generate", "render", "vqa", "extract", "score", "report")
        )
        if only_original:
            stages -= {"generate", "render"}
            validate_stages(stages, include_original=True)
        else:
            validate_stages(stages, self.config.include_original)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.failures = []

        units: list[tuple[ConditionSpec | None, Sample]] = []
        if self.config.include_original or only_original:
            units.extend((None, sample) for sample in self.corpus)
        if not only_original:
            for condition in self.config.conditions:
                units.extend((condition, sample) for sample in self.corpus)

        if self.sample_workers <= 1:
            for condition, sample in units:
                self._run_unit(condition, sample, stages)
        else:
            with ThreadPoolExecutor(max_workers=self.sample_workers) as pool:
                futures = [
                    pool.submit(self._run_unit, condition, sample, stages)
                    for condition, sample in units
                ]
                for future in futures:
                    future.result()

        if units:
            failed_units = {(f.condition, f.sample_id) for f in self.failures}
            failure_pct = 100.0 * len(failed_units) / len(units)
            if failure_pct > self.config.failure_budget_pct:
                raise FailureBudgetExceeded(
                    f"{len(failed_units)}/{len(units)} units failed"
                    f" ({failure_pct:.0f}% > budget"
                    f" {self.config.failure_budget_pct:.0f}%)"
                )

        summary = self._summarize(
            stages,
            with_original=self.config.include_original or only_original,
            with_generated=not only_original,
        )
        if "report" in stages:
            write_report_files(summary, self.run_dir / "report")
        return summary

    def score_original(self, extract: bool = True) -> dict:
        """The original-charts baseline row: VQA + judging on dataset images.

        Samples without an original image become per-sample failure records
        rather than aborting the whole baseline.
        """
        stages = {"vqa", "score", "report"} | ({"extract"} if extract else set())
        return self.run(stages=stages, only_original=True)
