"""Render worker: executes one chart program, reports exactly one JSON line.

Protocol (fixed by the supervising harness):

    argv:   code_path workdir expected_png wall_limit_s
    stdout: one JSON line {"status": "ok"|"runtime_error"|"missing_output",
                           "png_path"?: str, "stderr_tail"?: str}
    exit:   0 for every protocol-conformant result

The program runs with a non-interactive plotting backend, its working
directory set to `workdir`, and its stdout swallowed so the protocol line
stays alone on the wire. Program exceptions never escape: they become
runtime_error results with the traceback tail attached (capped at 2000
characters). Wall-clock enforcement is the supervisor's job; the worker
only runs the program and inspects the output file.
"""

from __future__ import annotations

import io
import json
import os
import sys
import traceback
from contextlib import redirect_stdout

__version__ = "0.1.0"

STDERR_TAIL_CHARS = 2000


def execute(code_path: str, workdir: str, expected_png: str) -> dict:
    """Run one program and build the protocol result dict."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    code_path = os.path.abspath(code_path)
    workdir = os.path.abspath(workdir)
    os.chdir(workdir)
    with open(code_path, encoding="utf-8") as fh:
        source = fh.read()

    result: dict = {"status": "ok"}
    swallowed = io.StringIO()
    try:
        with redirect_stdout(swallowed):
            exec(compile(source, code_path, "exec"), {"__name__": "__main__"})
    except BaseException:
        result = {
            "status": "runtime_error",
            "stderr_tail": traceback.format_exc()[-STDERR_TAIL_CHARS:],
        }
    finally:
        plt.close("all")

    if result["status"] == "ok":
        png = os.path.join(workdir, expected_png)
        if os.path.isfile(png) and os.path.getsize(png) > 0:
            result["png_path"] = png
        else:
            result = {"status": "missing_output"}
    return result


def main(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) < 3:
        print(json.dumps({"status": "runtime_error", "stderr_tail": "bad argv"}))
        return 0
    code_path, workdir, expected_png = argv[0], argv[1], argv[2]
    try:
        result = execute(code_path, workdir, expected_png)
    except Exception:  # worker-side faults also stay on-protocol
        result = {
            "status": "runtime_error",
            "stderr_tail": traceback.format_exc()[-STDERR_TAIL_CHARS:],
        }
    print(json.dumps(result))
    return 0
