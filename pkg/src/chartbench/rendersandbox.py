"""Supervised execution of generated chart programs.

Safety model, stated plainly: a static denylist screen, a subprocess per
program confined to a private working directory, and a hard wall-clock
kill. That is adequate for benign benchmark code and is NOT a sandbox for
adversarial inputs; do not point this at untrusted sources.

The worker is any command speaking the render protocol: it is invoked as
`worker_cmd + [code_path, workdir, expected_png, wall_limit_s]` and must
print exactly one JSON line `{"status", "png_path"?, "stderr_tail"?}` to
stdout, exiting 0 for every protocol-conformant result.
"""

from __future__ import annotations

import json
import logging
import os
import re
import signal
import struct
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

# Best-effort capability screen: each entry is (compiled pattern, matched
# token, reason). Purely static; see module docstring for the threat model.
_DENY_SPECS = [
    ("subprocess", "process spawning"),
    ("os.system", "process spawning"),
    ("os.popen", "process spawning"),
    ("os.exec", "process spawning"),
    ("os.spawn", "process spawning"),
    ("os.fork", "process spawning"),
    ("os.kill", "process control"),
    ("pty", "process spawning"),
    ("multiprocessing", "process spawning"),
    ("socket", "network access"),
    ("urllib", "network access"),
    ("http.client", "network access"),
    ("httpx", "network access"),
    ("requests", "network access"),
    ("ftplib", "network access"),
    ("smtplib", "network access"),
    ("telnetlib", "network access"),
    ("os.environ", "environment mutation"),
    ("os.putenv", "environment mutation"),
    ("os.unsetenv", "environment mutation"),
    ("os.chdir", "filesystem escape"),
    ("os.walk", "filesystem traversal"),
    ("shutil", "filesystem manipulation"),
    ("os.path.expanduser", "filesystem escape"),
    ("Path.home", "filesystem escape"),
    ("../", "filesystem escape"),
    ("__import__", "dynamic import"),
    ("importlib", "dynamic import"),
    ("eval(", "dynamic code execution"),
    ("exec(", "dynamic code execution"),
    ("compile(", "dynamic code execution"),
    ("ctypes", "native code loading"),
]


def _compile_deny(token: str) -> re.Pattern[str]:
    pattern = re.escape(token)
    if token[0].isalpha() or token[0] == "_":
        pattern = r"\b" + pattern
    if token[-1].isalnum() or token[-1] == "_":
        pattern = pattern + r"\b"
    return re.compile(pattern)


_DENYLIST = [(_compile_deny(token), token, reason) for token, reason in _DENY_SPECS]


@dataclass(frozen=True)
class ScreenDecision:
    accepted: bool
    token: str | None = None
    reason: str | None = None


def screen(code: str) -> ScreenDecision:
    """Static denylist check over the program text; reject is a value."""
    for pattern, token, reason in _DENYLIST:
        if pattern.search(code):
            return ScreenDecision(accepted=False, token=token, reason=reason)
    return ScreenDecision(accepted=True)


@dataclass(frozen=True)
class RenderRequest:
    sample_id: str
    code: str
    expected_png: str
    workdir: Path
    wall_limit_s: float = 60.0


@dataclass(frozen=True)
class RenderOutcome:
    status: str  # ok | rejected_by_screen | runtime_error | timeout | missing_output
    image: Path | None
    duration: float
    reason: str | None = None
    stderr_tail: str | None = None

    def to_record(self) -> dict:
        return {
            "status": self.status,
            "image": str(self.image) if self.image else None,
            "duration": self.duration,
            "reason": self.reason,
            "stderr_tail": self.stderr_tail,
        }


class RenderEnvironmentError(Exception):
    """The worker command itself cannot run; not a property of the code."""


def png_dimensions(path: Path) -> tuple[int, int] | None:
    """Width/height from the PNG signature + IHDR, or None if not a PNG."""
    try:
        with open(path, "rb") as fh:
            header = fh.read(24)
    except OSError:
        return None
    if len(header) < 24 or header[:8] != b"\x89PNG\r\n\x1a\n" or header[12:16] != b"IHDR":
        return None
    width, height = struct.unpack(">II", header[16:24])
    return width, height


def valid_png(path: Path) -> bool:
    dims = png_dimensions(path)
    return dims is not None and dims[0] > 0 and dims[1] > 0


_KILL_GRACE_S = 1.0
_STDERR_TAIL = 2000


class RenderSupervisor:
    """Runs screened chart programs through worker subprocesses.

    Bounded to `slots` concurrent workers; each request owns its (empty)
    working directory, and the supervisor enforces the wall-clock limit by
    killing the worker's process group.
    """

    def __init__(self, worker_cmd: list[str], slots: int | None = None):
        if not worker_cmd:
            raise ValueError("worker_cmd must not be empty")
        self.worker_cmd = list(worker_cmd)
        self._slots = threading.BoundedSemaphore(slots or os.cpu_count() or 1)

    def submit(self, req: RenderRequest) -> RenderOutcome:
        """Screen then render; screen rejections come back as outcomes."""
        decision = screen(req.code)
        if not decision.accepted:
            return RenderOutcome(
                status="rejected_by_screen",
                image=None,
                duration=0.0,
                reason=f"{decision.reason}: {decision.token}",
            )
        return self.render(req)

    def render(self, req: RenderRequest) -> RenderOutcome:
        """Execute one already-screened program. Caller guarantees screening."""
        # absolute paths throughout: the worker chdirs into the workdir, so
        # relative argv paths would dangle
        workdir = Path(req.workdir).resolve()
        workdir.mkdir(parents=True, exist_ok=True)
        if any(workdir.iterdir()):
            raise ValueError(f"workdir {workdir} is not empty")
        code_path = workdir / "_program.py"
        code_path.write_text(req.code, encoding="utf-8")

        argv = self.worker_cmd + [
            str(code_path),
            str(workdir),
            req.expected_png,
            str(req.wall_limit_s),
        ]
        start = time.monotonic()
        with self._slots:
            try:
                proc = subprocess.Popen(
                    argv,
                    cwd=workdir,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                    start_new_session=True,
                )
            except FileNotFoundError as exc:
                raise RenderEnvironmentError(
                    f"render worker not found: {self.worker_cmd[0]}"
                ) from exc
            try:
                stdout, stderr = proc.communicate(timeout=req.wall_limit_s + _KILL_GRACE_S)
            except subprocess.TimeoutExpired:
                self._kill(proc)
                duration = time.monotonic() - start
                return RenderOutcome(
                    status="timeout",
                    image=None,
                    duration=duration,
                    reason=f"wall limit {req.wall_limit_s}s exceeded",
                )
        duration = time.monotonic() - start
        return self._interpret(req, workdir, stdout, stderr, duration)

    @staticmethod
    def _kill(proc: subprocess.Popen) -> None:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()
        proc.communicate()

    def _interpret(
        self,
        req: RenderRequest,
        workdir: Path,
        stdout: str,
        stderr: str,
        duration: float,
    ) -> RenderOutcome:
        lines = [line for line in stdout.splitlines() if line.strip()]
        result = None
        if lines:
            try:
                result = json.loads(lines[-1])
            except json.JSONDecodeError:
                result = None
        if not isinstance(result, dict) or "status" not in result:
            tail = (stderr or stdout)[-_STDERR_TAIL:]
            logger.warning("worker protocol violation for %s", req.sample_id)
            return RenderOutcome(
                status="runtime_error",
                image=None,
                duration=duration,
                reason="worker protocol violation",
                stderr_tail=tail,
            )

        status = result["status"]
        if status == "ok":
            image = workdir / req.expected_png
            if image.is_file() and image.stat().st_size > 0 and valid_png(image):
                return RenderOutcome(status="ok", image=image, duration=duration)
            return RenderOutcome(
                status="missing_output",
                image=None,
                duration=duration,
                reason=f"worker claimed ok but {req.expected_png} is absent or invalid",
            )
        if status == "missing_output":
            return RenderOutcome(
                status="missing_output",
                image=None,
                duration=duration,
                reason=f"program did not produce {req.expected_png}",
            )
        return RenderOutcome(
            status="runtime_error",
            image=None,
            duration=duration,
            stderr_tail=result.get("stderr_tail"),
        )
