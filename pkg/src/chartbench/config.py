"""Run configuration: file schema, validation, and the digests that make
two runs comparable.

The config digest pins every knob that can change results (sampling,
tolerance, prompt/table/metric format versions, conditions, seed, the
system prompt and example bank contents); machine-local details like
paths, concurrency, and retry policy are deliberately excluded so the
same experiment hashes identically on different hosts. The data digest
pins the manifest plus every file it references.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import TABLE_FORMAT_VERSION
from .modelgate import ModelEndpoint, RetryPolicy, SamplingParams
from .prompts import DEFAULT_SHOTS, PROMPT_FORMAT_VERSION, Strategy, system_instructions
from .scoring import RelaxedTolerance
from .tablediff import METRIC_VERSION


class ConfigError(Exception):
    """Invalid or incomplete run configuration (CLI exit code 2)."""


STAGES = ("generate", "render", "vqa", "extract", "score", "report")


@dataclass(frozen=True)
class ConditionSpec:
    label: str
    model: str
    strategy: Strategy


@dataclass
class HarnessConfig:
    manifest: Path
    endpoints: dict[str, ModelEndpoint]
    sampling: SamplingParams
    retry: RetryPolicy
    max_in_flight: int
    sample_workers: int
    render_slots: int | None
    cache_dir: Path
    mock_enabled: bool
    mock_fixture: Path | None
    worker_cmd: list[str] | None
    wall_limit_s: float
    conditions: list[ConditionSpec]
    include_original: bool
    seed: int
    failure_budget_pct: float
    example_bank: Path | None
    out_dir: Path
    tolerance: RelaxedTolerance
    shots: int
    source_path: Path | None = None
    raw: dict = field(default_factory=dict)

    def config_digest(self) -> str:
        knobs = {
            "sampling": {
                "temperature": self.sampling.temperature,
                "top_p": self.sampling.top_p,
                "max_tokens": self.sampling.max_tokens,
            },
            "tolerance": repr(self.tolerance.rel_tol),
            "conditions": [
                {
                    "label": c.label,
                    "model": c.model,
                    "strategy": c.strategy.name,
                    "shots": c.strategy.shots,
                }
                for c in self.conditions
            ],
            "include_original": self.include_original,
            "seed": self.seed,
            "shots": self.shots,
            "mock": self.mock_enabled,
            "prompt_format": PROMPT_FORMAT_VERSION,
            "table_format": TABLE_FORMAT_VERSION,
            "metric_version": METRIC_VERSION,
            "system_instructions_sha": hashlib.sha256(
                system_instructions().encode("utf-8")
            ).hexdigest(),
            "example_bank_sha": (
                hashlib.sha256(self.example_bank.read_bytes()).hexdigest()
                if self.example_bank
                else None
            ),
        }
        payload = json.dumps(knobs, sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def data_digest(self) -> str:
        """Digest of the manifest and every file it references."""
        h = hashlib.sha256()
        h.update(self.manifest.read_bytes())
        doc = json.loads(self.manifest.read_text(encoding="utf-8"))
        base = self.manifest.parent
        for entry in doc.get("samples", []):
            for key in ("csv", "image"):
                rel = entry.get(key)
                if rel:
                    ref = base / rel
                    if ref.is_file():
                        h.update(ref.read_bytes())
        return h.hexdigest()

    def run_id(self) -> str:
        return hashlib.sha256(
            (self.config_digest() + self.data_digest()).encode("ascii")
        ).hexdigest()[:16]


def _get(doc: dict, dotted: str, default=None):
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _require(doc: dict, dotted: str):
    sentinel = object()
    value = _get(doc, dotted, sentinel)
    if value is sentinel:
        raise ConfigError(f"config missing required key {dotted!r}")
    return value


def _endpoint(doc: dict, name: str, kind: str) -> ModelEndpoint:
    section = _get(doc, f"endpoints.{name}")
    if section is None:
        raise ConfigError(f"config missing endpoints.{name}")
    try:
        return ModelEndpoint(
            kind=kind,
            base_url=section["base_url"],
            model_name=section["model"],
            auth_env=section.get("auth_env"),
            timeout_s=float(section.get("timeout_s", 60)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"endpoints.{name}: {exc}") from exc


def load_config(path: str | Path, mock: bool | None = None) -> HarnessConfig:
    """Parse and validate a JSON config file.

    Relative paths resolve against the config file's directory. `mock`
    overrides `mock.enabled` (the CLI's --mock flag).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    base = path.parent

    def resolve(p: str | None) -> Path | None:
        return None if p is None else (base / p)

    manifest = resolve(_require(doc, "corpus.manifest"))
    if not manifest.is_file():
        raise ConfigError(f"corpus.manifest: no such file {manifest}")

    try:
        sampling = SamplingParams(
            temperature=float(_get(doc, "sampling.temperature", 0.1)),
            top_p=float(_get(doc, "sampling.top_p", 0.9)),
            max_tokens=int(_get(doc, "sampling.max_tokens", 2000)),
        )
        retry = RetryPolicy(
            max_attempts=int(_get(doc, "retry.max_attempts", 3)),
            base_backoff_ms=int(_get(doc, "retry.base_backoff_ms", 250)),
        )
        tolerance = RelaxedTolerance(rel_tol=float(_get(doc, "scoring.rel_tol", 0.05)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    mock_enabled = bool(_get(doc, "mock.enabled", False)) if mock is None else mock
    mock_fixture = resolve(_get(doc, "mock.fixture_path"))
    if mock_enabled and mock_fixture is not None and not mock_fixture.is_file():
        raise ConfigError(f"mock.fixture_path: no such file {mock_fixture}")

    endpoints = {
        "generation": _endpoint(doc, "generation", "chat"),
        "vqa": _endpoint(doc, "vqa", "vqa"),
        "extraction": _endpoint(doc, "extraction", "extraction"),
    }

    shots = int(_get(doc, "prompts.shots", DEFAULT_SHOTS))
    conditions = []
    raw_conditions = _get(doc, "run.conditions")
    if raw_conditions is None:
        raise ConfigError("config missing run.conditions")
    seen_labels = set()
    for i, entry in enumerate(raw_conditions):
        try:
            strategy = Strategy.parse(entry["strategy"], entry.get("shots", shots))
            model = entry.get("model", endpoints["generation"].model_name)
            label = entry.get("label", f"{model}__{strategy.label}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"run.conditions[{i}]: {exc}") from exc
        if label == "original":
            raise ConfigError(f"run.conditions[{i}]: label 'original' is reserved")
        if label in seen_labels:
            raise ConfigError(f"run.conditions[{i}]: duplicate label {label!r}")
        seen_labels.add(label)
        conditions.append(ConditionSpec(label=label, model=model, strategy=strategy))
    if not conditions:
        raise ConfigError("run.conditions is empty")

    example_bank = resolve(_get(doc, "prompts.example_bank"))
    needs_bank = any(c.strategy.name == "few_shot" for c in conditions)
    if needs_bank and example_bank is None:
        raise ConfigError("few_shot conditions need prompts.example_bank")
    if example_bank is not None and not example_bank.is_file():
        raise ConfigError(f"prompts.example_bank: no such file {example_bank}")

    worker_cmd = _get(doc, "render.worker_cmd")
    if worker_cmd is not None:
        if not isinstance(worker_cmd, list) or not all(isinstance(x, str) for x in worker_cmd):
            raise ConfigError("render.worker_cmd must be a list of strings")

    return HarnessConfig(
        manifest=manifest,
        endpoints=endpoints,
        sampling=sampling,
        retry=retry,
        max_in_flight=int(_get(doc, "concurrency.max_in_flight", 4)),
        sample_workers=int(_get(doc, "concurrency.samples", 4)),
        render_slots=_get(doc, "concurrency.render_slots"),
        cache_dir=resolve(_get(doc, "cache.dir", "cache")),
        mock_enabled=mock_enabled,
        mock_fixture=mock_fixture,
        worker_cmd=list(worker_cmd) if worker_cmd else None,
        wall_limit_s=float(_get(doc, "render.wall_limit_s", 60)),
        conditions=conditions,
        include_original=bool(_get(doc, "run.include_original", True)),
        seed=int(_get(doc, "run.seed", 0)),
        failure_budget_pct=float(_get(doc, "run.failure_budget_pct", 20)),
        example_bank=example_bank,
        out_dir=resolve(_get(doc, "run.out_dir", "runs")),
        tolerance=tolerance,
        shots=shots,
        source_path=path,
        raw=doc,
    )


def validate_stages(stages: set[str], include_original: bool) -> None:
    """Enforce stage dependencies before any work starts."""
    unknown = stages - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages: {sorted(unknown)}")
    if "render" in stages and "generate" not in stages:
        raise ConfigError("render stage requires generate")
    if "vqa" in stages and "render" not in stages and not include_original:
        raise ConfigError("vqa stage requires render or original images")
    if "extract" in stages and "render" not in stages and not include_original:
        raise ConfigError("extract stage requires render or original images")
    if "score" in stages and "vqa" not in stages:
        raise ConfigError("score stage requires vqa")
