from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from chartbench.corpus import Corpus

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
TEST_FIXTURES = Path(__file__).resolve().parent / "fixtures"
GOLDENS = Path(__file__).resolve().parent / "goldens"

STUB_WORKER_CMD = [sys.executable, str(TEST_FIXTURES / "stub_worker.py")]


@pytest.fixture(scope="session")
def corpus_manifest() -> Path:
    return FIXTURES / "corpus" / "manifest.json"


@pytest.fixture(scope="session")
def corpus(corpus_manifest) -> Corpus:
    return Corpus.load(corpus_manifest)


@pytest.fixture(scope="session")
def mock_fixture_path() -> Path:
    return FIXTURES / "mock_fixture.json"


@pytest.fixture
def run_config_factory(tmp_path, corpus_manifest, mock_fixture_path):
    """Write a mock-mode config into tmp_path; overrides merge shallowly
    per dotted section."""

    def make(**overrides) -> Path:
        doc = {
            "corpus": {"manifest": str(corpus_manifest)},
            "endpoints": {
                "generation": {
                    "base_url": "http://mock.invalid/chat",
                    "model": "mock-gen",
                    "timeout_s": 10,
                },
                "vqa": {
                    "base_url": "http://mock.invalid/vqa",
                    "model": "mock-vqa",
                    "timeout_s": 10,
                },
                "extraction": {
                    "base_url": "http://mock.invalid/extract",
                    "model": "mock-extract",
                    "timeout_s": 10,
                },
            },
            "sampling": {"temperature": 0.1, "top_p": 0.9, "max_tokens": 2000},
            "retry": {"max_attempts": 3, "base_backoff_ms": 0},
            "concurrency": {"max_in_flight": 4, "samples": 4},
            "cache": {"dir": str(tmp_path / "cache")},
            "mock": {"enabled": True, "fixture_path": str(mock_fixture_path)},
            "render": {"worker_cmd": STUB_WORKER_CMD, "wall_limit_s": 20},
            "prompts": {"example_bank": str(FIXTURES / "example_bank.json"), "shots": 3},
            "run": {
                "conditions": [
                    {"label": "gen_zero", "model": "mock-gen", "strategy": "zero_shot"},
                    {
                        "label": "gen_few",
                        "model": "mock-gen",
                        "strategy": "few_shot",
                        "shots": 3,
                    },
                ],
                "include_original": True,
                "seed": 7,
                "failure_budget_pct": 20,
                "out_dir": str(tmp_path / "runs"),
            },
        }
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                doc[key].update(value)
            else:
                doc[key] = value
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        return path

    return make


# ---- acceptance criteria reporting: one PASS/FAIL line per criterion ----

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call":
        _acceptance_outcomes[report.nodeid] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper()
        )
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"[{label}] {name}")
