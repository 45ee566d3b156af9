"""Deterministic stand-in for the three model services.

The mock plugs in below the gate's cache, shaped exactly like the wire
responses, so the full parse/cache/telemetry path is exercised while the
whole pipeline stays bit-reproducible run to run.

Fixture file schema (JSON object, all sections optional):

    chat:       {"<prompt_hash>": "<code>"}, canned programs per exact bundle
    vqa:        {"<image_sha256>|<question>": "<answer>",
                 "*|<question>": "<answer>"}, image-specific keys win
    vqa_default: answer used when no key matches (default "unknown")
    extraction: {"<image_sha256>": "<linearized table>", "*": "<fallback>"}

Chat requests with no canned entry get a synthesized program: a pure
function of the final query, emitting a tiny constant PNG, so corpora
without prebuilt fixtures still run deterministically end to end.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
from pathlib import Path

from .modelgate import ModelEndpoint, TransportError
from .prompts import wire_messages_hash

# 1x1 transparent PNG; the constant image every synthesized program emits.
TINY_PNG_BASE64 = (
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJ"
    "AAAACklEQVR4nGMAAQAABQABDQottAAAAABJRU5ErkJggg=="
)

_FILE_NAME_RE = re.compile(r" / File Name: (?P<name>.+)$")


def synthesize_chart_code(query: str) -> str:
    """Deterministic placeholder program for a data query.

    Writes the constant 1x1 PNG to the file the query names. Not a real
    chart: mock runs assert pipeline behavior, not pixels.
    """
    match = _FILE_NAME_RE.search(query)
    png_name = match.group("name").strip() if match else "chart.png"
    return (
        "import base64\n"
        "\n"
        f"PNG = {TINY_PNG_BASE64!r}\n"
        f"with open({png_name!r}, 'wb') as fh:\n"
        "    fh.write(base64.b64decode(PNG))\n"
    )


def load_mock_fixture(path: str | Path) -> dict:
    fixture = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(fixture, dict):
        raise ValueError(f"mock fixture {path} must be a JSON object")
    return fixture


class MockTransport:
    """Fixture-driven responses with the live endpoints' wire shapes."""

    def __init__(self, fixture: dict | None = None):
        fixture = fixture or {}
        self.chat: dict[str, str] = fixture.get("chat", {})
        self.vqa: dict[str, str] = fixture.get("vqa", {})
        self.vqa_default: str = fixture.get("vqa_default", "unknown")
        self.extraction: dict[str, str] = fixture.get("extraction", {})
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockTransport":
        return cls(load_mock_fixture(path))

    def post(self, endpoint: ModelEndpoint, payload: dict) -> str:
        self.calls.append(endpoint.kind)
        if endpoint.kind == "chat":
            return self._chat(payload)
        if endpoint.kind == "vqa":
            return self._vqa(payload)
        return self._extraction(payload)

    def _chat(self, payload: dict) -> str:
        prompt_hash = wire_messages_hash(payload["messages"])
        code = self.chat.get(prompt_hash)
        if code is None:
            code = synthesize_chart_code(payload["messages"][-1]["content"])
        # Wrapped in fences on purpose: live models do this, and the gate
        # must strip it.
        content = f"```python\n{code}\n```"
        return json.dumps({"choices": [{"message": {"content": content}}]})

    @staticmethod
    def _image_digest(payload: dict) -> str:
        return hashlib.sha256(base64.b64decode(payload["image_base64"])).hexdigest()

    def _vqa(self, payload: dict) -> str:
        digest = self._image_digest(payload)
        question = payload["question"]
        answer = self.vqa.get(f"{digest}|{question}")
        if answer is None:
            answer = self.vqa.get(f"*|{question}")
        if answer is None:
            answer = self.vqa_default
        return json.dumps({"answer": answer})

    def _extraction(self, payload: dict) -> str:
        digest = self._image_digest(payload)
        table = self.extraction.get(digest)
        if table is None:
            table = self.extraction.get("*")
        if table is None:
            raise TransportError(f"mock has no extraction fixture for image {digest[:12]}")
        return json.dumps({"table": table})
