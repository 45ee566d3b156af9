"""Worker protocol tests, run through a real subprocess invocation."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

VALID_PROGRAM = """\
import matplotlib.pyplot as plt

states = ["TX", "AL"]
population = [29, 5]
fig, ax = plt.subplots()
bars = ax.bar(states, population)
ax.bar_label(bars)
ax.set_title("State Populations")
fig.savefig("chart.png", bbox_inches='tight')
fig.clf()
"""

RAISING_PROGRAM = """\
values = [1, 2, 3]
ratio = sum(values) / 0
"""

PRINTING_PROGRAM = """\
print("chatter that must not corrupt the protocol")
print("still no chart")
"""


def invoke(tmp_path: Path, program: str, expected_png: str = "chart.png"):
    code_path = tmp_path / "program.py"
    code_path.write_text(program, encoding="utf-8")
    workdir = tmp_path / "work"
    workdir.mkdir(exist_ok=True)
    proc = subprocess.run(
        [sys.executable, "-m", "render_worker", str(code_path), str(workdir),
         expected_png, "30"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    return proc, workdir


def protocol_result(proc) -> dict:
    lines = [line for line in proc.stdout.splitlines() if line.strip()]
    assert len(lines) == 1, f"expected exactly one stdout line, got {lines!r}"
    return json.loads(lines[0])


class TestProtocol:
    def test_valid_program_ok_with_png(self, tmp_path):
        proc, workdir = invoke(tmp_path, VALID_PROGRAM)
        assert proc.returncode == 0
        result = protocol_result(proc)
        assert result["status"] == "ok"
        png = Path(result["png_path"])
        assert png == workdir / "chart.png"
        assert png.stat().st_size > 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_division_by_zero_is_runtime_error(self, tmp_path):
        proc, _ = invoke(tmp_path, RAISING_PROGRAM)
        assert proc.returncode == 0
        result = protocol_result(proc)
        assert result["status"] == "runtime_error"
        assert "ZeroDivisionError" in result["stderr_tail"]
        assert len(result["stderr_tail"]) <= 2000

    def test_print_only_program_is_missing_output(self, tmp_path):
        proc, _ = invoke(tmp_path, PRINTING_PROGRAM)
        assert proc.returncode == 0
        result = protocol_result(proc)
        assert result == {"status": "missing_output"}

    def test_program_stdout_never_pollutes_protocol(self, tmp_path):
        noisy = PRINTING_PROGRAM + VALID_PROGRAM
        proc, _ = invoke(tmp_path, noisy)
        result = protocol_result(proc)  # asserts single-line stdout
        assert result["status"] == "ok"

    def test_wrong_filename_is_missing_output(self, tmp_path):
        proc, _ = invoke(tmp_path, VALID_PROGRAM, expected_png="other.png")
        assert protocol_result(proc)["status"] == "missing_output"

    def test_bad_argv_stays_on_protocol(self):
        proc = subprocess.run(
            [sys.executable, "-m", "render_worker"],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert proc.returncode == 0
        result = json.loads(proc.stdout.strip())
        assert result["status"] == "runtime_error"

    def test_program_runs_with_workdir_cwd(self, tmp_path):
        program = 'open("chart.png", "wb").write(b"\\x89PNG\\r\\n\\x1a\\n" + b"0" * 16)\n'
        proc, workdir = invoke(tmp_path, program)
        assert protocol_result(proc)["status"] == "ok"
        assert (workdir / "chart.png").exists()


@pytest.mark.parametrize("program", [VALID_PROGRAM, RAISING_PROGRAM])
def test_exit_code_always_zero(tmp_path, program):
    proc, _ = invoke(tmp_path, program)
    assert proc.returncode == 0
