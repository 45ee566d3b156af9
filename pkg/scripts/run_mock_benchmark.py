#!/usr/bin/env python3
"""Run the bundled 5-sample corpus through the full pipeline with mock
endpoints and print the benchmark tables.

Works with the primary package alone: if the render-worker package is not
installed, the protocol-level stub worker from the test tree is used.

    python3 scripts/run_mock_benchmark.py [--run-dir DIR]
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from chartbench.config import load_config
from chartbench.pipeline import Pipeline, render_worker_available
from chartbench.report import render_benchmark

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--run-dir", type=Path, default=None)
    args = parser.parse_args()

    base = json.loads((ROOT / "fixtures" / "run_config.json").read_text())
    workdir = Path(tempfile.mkdtemp(prefix="chartbench_demo_"))
    base["corpus"]["manifest"] = str(ROOT / "fixtures" / "corpus" / "manifest.json")
    base["mock"]["fixture_path"] = str(ROOT / "fixtures" / "mock_fixture.json")
    base["prompts"]["example_bank"] = str(ROOT / "fixtures" / "example_bank.json")
    base["cache"] = {"dir": str(workdir / "cache")}
    base["run"]["out_dir"] = str(workdir / "runs")
    if not render_worker_available():
        stub = ROOT / "tests" / "fixtures" / "stub_worker.py"
        base["render"]["worker_cmd"] = [sys.executable, str(stub)]
        print("render-worker not installed; using the protocol stub worker")

    config_path = workdir / "config.json"
    config_path.write_text(json.dumps(base, indent=2))
    config = load_config(config_path)
    pipeline = Pipeline(config, run_dir=args.run_dir)
    summary = pipeline.run()

    print(f"\nrun directory: {pipeline.run_dir}")
    for family in sorted(summary["families"]):
        print(f"\n== {family} ==")
        print(render_benchmark(summary, family))
    return 0


if __name__ == "__main__":
    sys.exit(main())
