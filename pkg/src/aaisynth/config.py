"""Pipeline configuration: JSON file plus command-line overrides, and per-output hashes."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .classifiers import KINDS
from .domain import ValidationError
from .evaluation import DEFAULT_GRID, DEFAULT_REPS, N_SEEDS
from .interview import DIALOGUE_TEMPERATURE
from .personas import GENERATION_TEMPERATURE
from .retrieval import DEFAULT_K

MEMORY_EMBEDDER = "all-MiniLM-L6-v2"
ANSWER_EMBEDDER = "text-embedding-3-small"
MEMORY_EMBED_DIM = 384
ANSWER_EMBED_DIM = 1536


@dataclass(frozen=True)
class PipelineConfig:
    artifacts: str = "artifacts"
    mock: bool = False
    seed: int = 0
    workers: int = 1

    # cohort
    total_agents: int = 60
    generator_model: str = "gpt-4"
    generation_temperature: float = GENERATION_TEMPERATURE
    reference_timestamp: str | None = None

    # interviews
    chat_models: tuple[str, ...] = ("gpt-4", "claude-3-opus-20240229")
    dialogue_temperature: float = DIALOGUE_TEMPERATURE
    max_output_tokens: int = 512
    protocol_path: str | None = None
    retrieval_k: int = DEFAULT_K

    # embeddings
    memory_embedder: str = MEMORY_EMBEDDER
    answer_embedder: str = ANSWER_EMBEDDER
    human_path: str | None = None
    human_labels_path: str | None = None
    embedding_cache: str | None = None

    # evaluation
    classifiers: tuple[str, ...] = KINDS
    n_seeds: int = N_SEEDS
    increment_grid: tuple[int, ...] = DEFAULT_GRID
    increment_reps: int = DEFAULT_REPS

    def __post_init__(self) -> None:
        for name in ("generation_temperature", "dialogue_temperature"):
            t = getattr(self, name)
            if not 0.0 <= t <= 2.0:
                raise ValidationError(f"{name} must lie in [0, 2], got {t}")
        if self.total_agents < 3 or self.total_agents % 3:
            raise ValidationError(f"total_agents must be a positive multiple of 3, got {self.total_agents}")
        if not self.chat_models:
            raise ValidationError("at least one chat model is required")
        unknown = set(self.classifiers) - set(KINDS)
        if unknown:
            raise ValidationError(f"unknown classifier kinds {sorted(unknown)}")
        if self.n_seeds < 2 or self.increment_reps < 2:
            raise ValidationError("seed and repetition counts must be at least 2")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        for name in ("chat_models", "classifiers", "increment_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def artifact_dir(self) -> Path:
        return Path(self.artifacts)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _plain(v: Any) -> Any:
    return list(v) if isinstance(v, tuple) else v


def config_from_mapping(values: Mapping[str, Any], base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown configuration keys {sorted(unknown)}")
    try:
        return base.replace(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def load_config(path: Path | str | None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Defaults, then the JSON file, then explicit overrides (flags)."""
    cfg = PipelineConfig()
    if path is not None:
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"configuration file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"configuration file {path} is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ValidationError("configuration file must hold a JSON object")
        cfg = config_from_mapping(values, cfg)
    if overrides:
        cfg = config_from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)
    return cfg


def digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def file_digest(path: Path | str | None) -> str | None:
    if path is None:
        return None
    p = Path(path)
    if p.is_dir():
        h = hashlib.sha256()
        for child in sorted(p.rglob("*")):
            if child.is_file():
                h.update(str(child.relative_to(p)).encode())
                h.update(child.read_bytes())
        return h.hexdigest()[:16]
    return hashlib.sha256(p.read_bytes()).hexdigest()[:16]


# settings each artifact depends on; upstream hashes are chained in by the CLI


def agents_key(cfg: PipelineConfig) -> dict[str, Any]:
    return {
        "mock": cfg.mock,
        "seed": cfg.seed if cfg.mock else None,
        "total_agents": cfg.total_agents,
        "generator_model": cfg.generator_model,
        "generation_temperature": cfg.generation_temperature,
        "reference_timestamp": cfg.reference_timestamp,
        "max_output_tokens": cfg.max_output_tokens,
    }


def interviews_key(cfg: PipelineConfig, model_tag: str, agents_hash: str) -> dict[str, Any]:
    return {
        "agents": agents_hash,
        "model_tag": model_tag,
        "dialogue_temperature": cfg.dialogue_temperature,
        "max_output_tokens": cfg.max_output_tokens,
        "protocol": file_digest(cfg.protocol_path),
        "retrieval_k": cfg.retrieval_k,
        "memory_embedder": cfg.memory_embedder,
    }


def embeddings_key(cfg: PipelineConfig, upstream: Mapping[str, str]) -> dict[str, Any]:
    return {
        "upstream": dict(upstream),
        "answer_embedder": cfg.answer_embedder,
        "human": file_digest(cfg.human_path),
        "human_labels": file_digest(cfg.human_labels_path),
        "mock_human_seed": cfg.seed if cfg.mock and cfg.human_path is None else None,
    }


def evaluation_key(cfg: PipelineConfig, embeddings_hash: str) -> dict[str, Any]:
    return {
        "embeddings": embeddings_hash,
        "classifiers": list(cfg.classifiers),
        "seed": cfg.seed,
        "n_seeds": cfg.n_seeds,
        "increment_grid": list(cfg.increment_grid),
        "increment_reps": cfg.increment_reps,
    }


__all__ = [
    "ANSWER_EMBEDDER",
    "ANSWER_EMBED_DIM",
    "MEMORY_EMBEDDER",
    "MEMORY_EMBED_DIM",
    "PipelineConfig",
    "agents_key",
    "config_from_mapping",
    "digest",
    "embeddings_key",
    "evaluation_key",
    "file_digest",
    "interviews_key",
    "load_config",
]
