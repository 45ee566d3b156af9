"""Prompt construction for the chart-generation models.

Two strategies: zero-shot (system + one query) and few-shot (system + k
worked query/code pairs + the target query). The system text is a frozen
golden resource; the query template is a byte-literal format. Every bundle
carries a stable content hash so responses can be cached and replayed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Sample, serialize_table

logger = logging.getLogger(__name__)

PROMPT_FORMAT_VERSION = "prompt-v1"

_SYSTEM_TEXT: str | None = None


def system_instructions() -> str:
    """The fixed system prompt, byte-identical on every call."""
    global _SYSTEM_TEXT
    if _SYSTEM_TEXT is None:
        _SYSTEM_TEXT = (
            resources.files("chartbench.resources")
            .joinpath("system_instructions.txt")
            .read_text(encoding="utf-8")
        )
    return _SYSTEM_TEXT


def input_query(sample: Sample, png_file: str) -> str:
    """Render the data query for one sample.

    The template is literal; an empty title yields "Title:  / Data: ..."
    rather than any collapsed form.
    """
    return (
        f"Title: {sample.title}"
        f" / Data: {serialize_table(sample.table)}"
        f" / Chart type: {sample.chart_type.label}"
        f" / File Name: {png_file}"
    )


@dataclass(frozen=True)
class Strategy:
    """zero_shot, or few_shot with a shot count (default 3)."""

    name: str
    shots: int = 0

    def __post_init__(self) -> None:
        if self.name not in ("zero_shot", "few_shot"):
            raise ValueError(f"unknown strategy {self.name!r}")
        if self.name == "few_shot" and self.shots < 1:
            raise ValueError("few_shot needs at least one example")
        if self.name == "zero_shot" and self.shots != 0:
            raise ValueError("zero_shot takes no examples")

    @property
    def label(self) -> str:
        return self.name if self.name == "zero_shot" else f"few_shot{self.shots}"

    @classmethod
    def parse(cls, name: str, shots: int | None = None) -> "Strategy":
        if name == "zero_shot":
            return ZERO_SHOT
        if name == "few_shot":
            return cls("few_shot", shots if shots is not None else DEFAULT_SHOTS)
        raise ValueError(f"unknown strategy {name!r}")


ZERO_SHOT = Strategy("zero_shot")
DEFAULT_SHOTS = 3


def few_shot(k: int = DEFAULT_SHOTS) -> Strategy:
    return Strategy("few_shot", k)


@dataclass(frozen=True)
class FewShotExample:
    """One worked example: a query in the Input Query format plus its code."""

    chart_type: str
    query: str
    code: str

    def __post_init__(self) -> None:
        if not self.query.startswith("Title: "):
            raise ValueError("example query does not follow the query template")
        if not self.code:
            raise ValueError("example code is empty")


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


_ROLE_BYTES = {"system": b"s", "user": b"u", "assistant": b"a"}


def _bundle_hash(messages: tuple[Message, ...]) -> str:
    """Stable digest: role byte + 8-byte big-endian length + UTF-8 content."""
    h = hashlib.sha256()
    for msg in messages:
        payload = msg.content.encode("utf-8")
        h.update(_ROLE_BYTES[msg.role])
        h.update(struct.pack(">Q", len(payload)))
        h.update(payload)
    return h.hexdigest()


def wire_messages_hash(messages: list[dict[str, str]]) -> str:
    """Hash of messages already in wire form; equals the bundle's prompt_hash."""
    return _bundle_hash(tuple(Message(m["role"], m["content"]) for m in messages))


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    strategy: Strategy
    prompt_hash: str

    def __post_init__(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("first message must be the system prompt")
        if sum(1 for m in self.messages if m.role == "system") != 1:
            raise ValueError("exactly one system message allowed")
        expected = 2 if self.strategy.name == "zero_shot" else 2 * self.strategy.shots + 2
        if len(self.messages) != expected:
            raise ValueError(
                f"{self.strategy.label} bundle must have {expected} messages,"
                f" got {len(self.messages)}"
            )

    def as_wire_messages(self) -> list[dict[str, str]]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


def build(
    sample: Sample,
    strategy: Strategy,
    examples: list[FewShotExample],
    png_file: str,
) -> PromptBundle:
    """Compose the full message list for one sample.

    zero_shot -> [system, user]; few_shot(k) -> [system, (user, assistant)*k,
    user]. The caller supplies exactly k examples for few_shot.
    """
    if strategy.name == "few_shot" and len(examples) != strategy.shots:
        raise ValueError(
            f"few_shot({strategy.shots}) requires {strategy.shots} examples,"
            f" got {len(examples)}"
        )
    if strategy.name == "zero_shot" and examples:
        raise ValueError("zero_shot takes no examples")

    messages = [Message("system", system_instructions())]
    for ex in examples:
        messages.append(Message("user", ex.query))
        messages.append(Message("assistant", ex.code))
    messages.append(Message("user", input_query(sample, png_file)))
    bundle_messages = tuple(messages)
    return PromptBundle(
        messages=bundle_messages,
        strategy=strategy,
        prompt_hash=_bundle_hash(bundle_messages),
    )


class ExampleBankError(Exception):
    """Example bank file malformed or too small for the requested shot count."""


def load_example_bank(path: str | Path) -> list[FewShotExample]:
    """Load the few-shot bank: JSON array of {chart_type, query, code}."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ExampleBankError(f"cannot load example bank {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise ExampleBankError(f"{path}: expected a JSON array")
    bank = []
    for i, entry in enumerate(entries):
        try:
            bank.append(
                FewShotExample(
                    chart_type=entry["chart_type"],
                    query=entry["query"],
                    code=entry["code"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ExampleBankError(f"{path}[{i}]: {exc}") from exc
    return bank


def select_examples(
    bank: list[FewShotExample],
    sample: Sample,
    k: int,
    seed: int = 0,
) -> list[FewShotExample]:
    """Pick k examples for a sample: same chart type first, in bank order,
    then seeded round-robin over the rest. Deterministic for a given seed;
    the selection is logged for audit.
    """
    if k > len(bank):
        raise ExampleBankError(
            f"example bank has {len(bank)} entries, {k} requested"
        )
    matching = [ex for ex in bank if ex.chart_type == sample.chart_type.name]
    chosen = matching[:k]
    if len(chosen) < k:
        rest = [ex for ex in bank if ex not in chosen]
        rng = random.Random(seed)
        rng.shuffle(rest)
        chosen = chosen + rest[: k - len(chosen)]
    logger.info(
        "few-shot selection for %s (%s): %s",
        sample.id,
        sample.chart_type.label,
        [ex.chart_type for ex in chosen],
    )
    return chosen
