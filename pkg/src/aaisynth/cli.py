"""Command-line pipeline: agents -> interviews -> embeddings -> analyses -> reports.

Every output file is recorded in ``manifest.json`` under the artifact directory
together with the hash of the settings it was produced from. A stage refuses to
overwrite or extend an output made under different settings (unless ``--force``),
and downstream stages refuse inputs whose recorded hash does not match the
current configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Sequence

from . import config as cfgmod
from .alignment import DiversityReport, Projection2D, pairwise_cosine_by_style, project_2d
from .classifiers import ClassifierSpec
from .config import PipelineConfig, digest, load_config
from .domain import (
    STYLES,
    TIMESTAMP_FORMAT,
    EmbeddingDataset,
    InterviewEmbedding,
    InterviewTranscript,
    ValidationError,
    check_synthetic_length,
    synthetic_source,
)
from .embedding import embed_transcripts, read_human_transcripts
from .evaluation import data_increment_curve, evaluate_cvloo, evaluate_transfer
from .gateway import (
    EmbeddingCache,
    Gateway,
    OpenAIEmbedder,
    ProviderError,
    SentenceTransformerEmbedder,
    real_chat_provider,
)
from .interview import InterviewFailed, InterviewProtocol, run_interview
from .io import JsonlAppender, atomic_write_text, read_jsonl, write_json, write_jsonl
from .mock import MockChatProvider, MockEmbedder, mock_human_transcripts
from .personas import CohortGenerationError, CohortSpec, build_cohort, load_agents
from .prompts import load_protocol
from .retrieval import MemoryIndex, index_memories

log = logging.getLogger("aaisynth")

EXIT_OK, EXIT_VALIDATION, EXIT_PROVIDER, EXIT_MISSING = 0, 1, 2, 3
MOCK_REFERENCE = "2024-06-01 12:00:00"
HUMAN_DOMAINS = ("human_labeled", "human_unlabeled")


class MissingArtifact(RuntimeError):
    def __init__(self, path: Path, stage: str, reason: str = "missing"):
        super().__init__(f"{reason} artifact {path}; run `{stage}` first")
        self.path = path
        self.stage = stage


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------


class Manifest:
    def __init__(self, root: Path):
        self.root = root
        self.path = root / "manifest.json"
        self.entries: dict[str, dict[str, Any]] = {}
        if self.path.exists():
            try:
                self.entries = json.loads(self.path.read_text(encoding="utf-8"))["outputs"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ValidationError(f"{self.path} is corrupt") from None

    def _save(self) -> None:
        write_json(self.path, {"outputs": self.entries})

    def claim(self, rel: str, stage: str, key: dict[str, Any], force: bool, resumable: bool = False) -> str:
        """Register ``rel`` as produced from ``key``; returns the hash.

        An existing file made under other settings is an error unless ``force``
        (then it is deleted). With ``resumable`` a matching existing file is kept.
        """
        h = digest(key)
        path = self.root / rel
        prev = self.entries.get(rel)
        if path.exists():
            if prev is None or prev["hash"] != h:
                if not force:
                    raise ValidationError(
                        f"{path} was produced with different settings; pass --force to regenerate "
                        "or choose another --artifacts directory"
                    )
                path.unlink()
            elif not resumable:
                path.unlink()
        self.entries[rel] = {"stage": stage, "hash": h, "complete": False, "settings": key}
        self._save()
        return h

    def complete(self, rel: str) -> None:
        self.entries[rel]["complete"] = True
        self._save()

    def require(self, rel: str, stage: str, key: dict[str, Any]) -> Path:
        path = self.root / rel
        entry = self.entries.get(rel)
        if not path.exists() or entry is None:
            raise MissingArtifact(path, stage)
        if not entry.get("complete"):
            raise MissingArtifact(path, stage, "incomplete")
        if entry["hash"] != digest(key):
            raise MissingArtifact(path, stage, "stale")
        return path


# --------------------------------------------------------------------------
# wiring
# --------------------------------------------------------------------------


def make_gateway(cfg: PipelineConfig) -> Gateway:
    if cfg.mock:
        chat: Any = lambda tag: MockChatProvider(cfg.seed)  # noqa: E731
        embed: Any = {
            cfg.memory_embedder: MockEmbedder(cfgmod.MEMORY_EMBED_DIM, cfg.seed),
            cfg.answer_embedder: MockEmbedder(cfgmod.ANSWER_EMBED_DIM, cfg.seed),
        }
        cache = EmbeddingCache(cfg.embedding_cache)
    else:
        chat = real_chat_provider

        def embed(tag: str) -> Any:
            if tag == cfg.answer_embedder:
                return OpenAIEmbedder(tag)
            return SentenceTransformerEmbedder(tag)

        cache = EmbeddingCache(cfg.embedding_cache or cfg.artifact_dir / "cache" / "embeddings.sqlite")
    return Gateway(chat, embed, cache)


def print_usage(gateway: Gateway, out: Callable[[str], None]) -> None:
    for tag, u in gateway.usage_by_model().items():
        out(f"usage {tag}: input_tokens={u.input_tokens} output_tokens={u.output_tokens}")
    total = gateway.usage_report()
    out(f"usage total: input_tokens={total.input_tokens} output_tokens={total.output_tokens}")


def reference_time(cfg: PipelineConfig) -> datetime | None:
    stamp = cfg.reference_timestamp or (MOCK_REFERENCE if cfg.mock else None)
    if stamp is None:
        return None
    try:
        return datetime.strptime(stamp, TIMESTAMP_FORMAT)
    except ValueError:
        raise ValidationError(f"reference_timestamp must look like YYYY-MM-DD HH:MM:SS, got {stamp!r}") from None


def slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "-" for c in text)


def domain_file(domain: str) -> str:
    return f"embeddings/{slug(domain)}.jsonl"


def agents_hash(cfg: PipelineConfig) -> str:
    return digest(cfgmod.agents_key(cfg))


def interviews_hashes(cfg: PipelineConfig) -> dict[str, str]:
    ah = agents_hash(cfg)
    return {tag: digest(cfgmod.interviews_key(cfg, tag, ah)) for tag in cfg.chat_models}


def embeddings_hash(cfg: PipelineConfig) -> str:
    return digest(cfgmod.embeddings_key(cfg, interviews_hashes(cfg)))


def embedding_files(cfg: PipelineConfig) -> list[tuple[str, str]]:
    domains = [synthetic_source(tag) for tag in cfg.chat_models] + list(HUMAN_DOMAINS)
    return [(d, domain_file(d)) for d in domains]


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def cmd_generate_agents(cfg: PipelineConfig, force: bool = False, out: Callable[[str], None] = print) -> Path:
    root = cfg.artifact_dir
    manifest = Manifest(root)
    manifest.claim("agents.jsonl", "generate-agents", cfgmod.agents_key(cfg), force, resumable=True)
    gateway = make_gateway(cfg)
    spec = CohortSpec.with_total(
        cfg.total_agents,
        generation_temperature=cfg.generation_temperature,
        reference_timestamp=reference_time(cfg),
        model_tag=cfg.generator_model,
    )
    done = [0]

    def progress(rec: Any) -> None:
        done[0] += 1
        out(f"agent {rec.agent_id} ({rec.style.value}) ready [{done[0]} new]")

    try:
        agents = build_cohort(gateway, spec, root / "agents.jsonl", cfg.workers, progress)
    finally:
        print_usage(gateway, out)
    # canonical order regardless of completion order
    write_jsonl(root / "agents.jsonl", [a.to_dict() for a in agents])
    manifest.complete("agents.jsonl")
    counts = {s.value: sum(a.style is s for a in agents) for s in STYLES}
    out(f"{len(agents)} agents written to {root / 'agents.jsonl'} {counts}")
    return root / "agents.jsonl"


def _load_index(path: Path, agent: Any, embedder: Any) -> MemoryIndex:
    if path.exists():
        try:
            idx = MemoryIndex.load(path)
            if idx.agent_id == agent.agent_id and list(idx.contents) == [m.content for m in agent.memories]:
                return idx
        except (OSError, ValueError, KeyError):
            pass
    idx = index_memories(agent, embedder)
    path.parent.mkdir(parents=True, exist_ok=True)
    idx.save(path)
    return idx


def cmd_run_interviews(cfg: PipelineConfig, force: bool = False, out: Callable[[str], None] = print) -> list[Path]:
    root = cfg.artifact_dir
    manifest = Manifest(root)
    agents_path = manifest.require("agents.jsonl", "generate-agents", cfgmod.agents_key(cfg))
    agents = load_agents(agents_path)
    protocol = InterviewProtocol(load_protocol(cfg.protocol_path))
    gateway = make_gateway(cfg)
    memory_embedder = gateway.embedder(cfg.memory_embedder)
    index_dir = root / "memory_index" / slug(cfg.memory_embedder)
    ah = agents_hash(cfg)
    written = []
    try:
        for tag in cfg.chat_models:
            rel = f"interviews/{slug(tag)}.jsonl"
            manifest.claim(rel, "run-interviews", cfgmod.interviews_key(cfg, tag, ah), force, resumable=True)
            path = root / rel
            done = {t.interview_id for t in read_jsonl(path, InterviewTranscript.from_dict)} if path.exists() else set()
            appender = JsonlAppender(path)
            todo = [a for a in agents if f"{a.agent_id}@{tag}" not in done]

            def work(agent: Any, tag: str = tag, appender: JsonlAppender = appender) -> InterviewTranscript:
                index = _load_index(index_dir / f"{agent.agent_id}.npz", agent, memory_embedder)
                t = run_interview(
                    agent,
                    protocol,
                    gateway,
                    model_tag=tag,
                    memory_embedder=memory_embedder,
                    index=index,
                    temperature=cfg.dialogue_temperature,
                    max_output_tokens=cfg.max_output_tokens,
                )
                check_synthetic_length(t, len(protocol))
                appender.append(t.to_dict())
                out(f"interview {t.interview_id} done ({t.n_pairs} pairs)")
                return t

            if cfg.workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    list(pool.map(work, todo))
            else:
                for agent in todo:
                    work(agent)
            # canonical agent order
            by_id = {t.interview_id: t for t in read_jsonl(path, InterviewTranscript.from_dict)}
            ordered = [by_id[f"{a.agent_id}@{tag}"] for a in agents]
            write_jsonl(path, [t.to_dict() for t in ordered])
            manifest.complete(rel)
            out(f"{len(ordered)} transcripts written to {path}")
            written.append(path)
    finally:
        print_usage(gateway, out)
    return written


def human_transcripts(cfg: PipelineConfig, questions: Sequence[str]) -> list[InterviewTranscript]:
    if cfg.human_path is None:
        if cfg.mock:
            return mock_human_transcripts(cfg.seed, questions=questions)
        log.warning("no human transcripts configured; only synthetic embeddings will be produced")
        return []
    labels = None
    if cfg.human_labels_path is not None:
        labels = json.loads(Path(cfg.human_labels_path).read_text(encoding="utf-8"))
    return read_human_transcripts(cfg.human_path, labels)


def cmd_embed(cfg: PipelineConfig, force: bool = False, out: Callable[[str], None] = print) -> list[Path]:
    root = cfg.artifact_dir
    manifest = Manifest(root)
    ah = agents_hash(cfg)
    transcripts: list[InterviewTranscript] = []
    for tag in cfg.chat_models:
        rel = f"interviews/{slug(tag)}.jsonl"
        path = manifest.require(rel, "run-interviews", cfgmod.interviews_key(cfg, tag, ah))
        transcripts.extend(read_jsonl(path, InterviewTranscript.from_dict))
    transcripts.extend(human_transcripts(cfg, load_protocol(cfg.protocol_path)))

    gateway = make_gateway(cfg)
    key = cfgmod.embeddings_key(cfg, interviews_hashes(cfg))
    ds = embed_transcripts(transcripts, gateway.embedder(cfg.answer_embedder))
    written = []
    for domain, rel in embedding_files(cfg):
        manifest.claim(rel, "embed", key, force=True)
        entries = [e for e in ds.entries if e.domain == domain]
        write_jsonl(root / rel, [e.to_dict() for e in entries])
        manifest.complete(rel)
        out(f"{len(entries)} embeddings written to {root / rel}")
        written.append(root / rel)
    return written


def load_embeddings(cfg: PipelineConfig) -> dict[str, EmbeddingDataset]:
    manifest = Manifest(cfg.artifact_dir)
    key = cfgmod.embeddings_key(cfg, interviews_hashes(cfg))
    out = {}
    for domain, rel in embedding_files(cfg):
        path = manifest.require(rel, "embed", key)
        entries = read_jsonl(path, InterviewEmbedding.from_dict)
        out[domain] = EmbeddingDataset.from_entries(entries, None if entries else cfgmod.ANSWER_EMBED_DIM)
    return out


def cmd_diversity(cfg: PipelineConfig, out: Callable[[str], None] = print) -> Path:
    data = load_embeddings(cfg)
    groups = []
    for domain in [synthetic_source(t) for t in cfg.chat_models] + ["human_labeled"]:
        if len(data[domain]):
            groups.extend(pairwise_cosine_by_style(data[domain]).groups)
    report = DiversityReport(tuple(groups))
    path = cfg.artifact_dir / "diversity.json"
    write_json(path, {"embeddings": embeddings_hash(cfg), **report.to_dict()})
    for g in report.groups:
        s = g.summary
        out(f"{g.source:<32} {g.style.value:<12} pairs={s.count:<4} mean={s.mean:.4f} std={s.std:.4f}")
    return path


def cmd_project(cfg: PipelineConfig, out: Callable[[str], None] = print) -> Path:
    """One 2D projection per synthetic dataset, rows concatenated."""
    data = load_embeddings(cfg)
    points = []
    for tag in cfg.chat_models:
        points.extend(project_2d([data[synthetic_source(tag)]]).points)
    path = cfg.artifact_dir / "projection.csv"
    atomic_write_text(path, Projection2D(tuple(points)).to_csv())
    out(f"{len(points)} projected points written to {path}")
    return path


def auc_table_rows(cfg: PipelineConfig) -> list[tuple[str, str | None, bool]]:
    """(row name, synthetic model tag or None for human CVLOO, standardized)."""
    rows: list[tuple[str, str | None, bool]] = [("human", None, False)]
    for tag in cfg.chat_models:
        rows.append((tag, tag, False))
        rows.append((f"{tag} (standardized)", tag, True))
    return rows


def cmd_evaluate(cfg: PipelineConfig, out: Callable[[str], None] = print) -> Path:
    data = load_embeddings(cfg)
    human, unlabeled = data["human_labeled"], data["human_unlabeled"]
    if len(human) < 2:
        raise ValidationError("evaluation needs at least two labeled human interviews")
    reports_dir = cfg.artifact_dir / "reports"
    provenance = {"embeddings": embeddings_hash(cfg), "settings": cfgmod.evaluation_key(cfg, embeddings_hash(cfg))}
    grid: dict[str, dict[str, Any]] = {}
    for row, tag, standardized in auc_table_rows(cfg):
        grid[row] = {}
        for kind in cfg.classifiers:
            spec = ClassifierSpec(kind, seed=cfg.seed)
            if tag is None:
                report = evaluate_cvloo(human, spec, cfg.n_seeds, cfg.workers)
            else:
                report = evaluate_transfer(
                    data[synthetic_source(tag)],
                    human,
                    spec,
                    standardized=standardized,
                    unlabeled=unlabeled if standardized else None,
                    n_seeds=cfg.n_seeds,
                    workers=cfg.workers,
                )
            name = f"auc-{slug(row.replace(' (standardized)', '-standardized'))}-{kind}"
            write_json(reports_dir / f"{name}.json", {**report.to_dict(), "row": row, **provenance})
            grid[row][kind] = {"auc": report.auc, "se": report.se}
            se = "" if report.se is None else f" ({report.se:.2f})"
            out(f"{row:<40} {kind:<12} AUC {report.auc:.3f}{se}")

    curves: dict[str, Any] = {}
    for tag in cfg.chat_models:
        train = data[synthetic_source(tag)]
        available = min(train.style_counts().values()) if len(train) else 0
        ns = [n for n in cfg.increment_grid if n <= available]
        skipped = [n for n in cfg.increment_grid if n > available]
        if skipped:
            out(f"increment grid for {tag}: skipping n={skipped} (only {available} interviews per style)")
        if not ns or not len(unlabeled):
            continue
        for kind in cfg.classifiers:
            spec = ClassifierSpec(kind, seed=cfg.seed)
            curve = data_increment_curve(train, human, spec, ns, cfg.increment_reps, unlabeled, cfg.workers)
            name = f"increment-{slug(tag)}-{kind}"
            write_json(reports_dir / f"{name}.json", {**curve.to_dict(), "model": tag, **provenance})
            curves.setdefault(tag, {})[kind] = [[p.n_per_style, p.mean_auc, p.se] for p in curve.points]
            pts = ", ".join(f"{p.n_per_style}:{p.mean_auc:.2f}" for p in curve.points)
            out(f"increment {tag:<30} {kind:<12} {pts}")

    summary = reports_dir / "auc_table.json"
    write_json(summary, {"rows": grid, "increment": curves, **provenance})
    return summary


def cmd_report(cfg: PipelineConfig, out: Callable[[str], None] = print) -> Path:
    path = cfg.artifact_dir / "reports" / "auc_table.json"
    if not path.exists():
        raise MissingArtifact(path, "evaluate")
    summary = json.loads(path.read_text(encoding="utf-8"))
    if summary.get("embeddings") != embeddings_hash(cfg):
        raise MissingArtifact(path, "evaluate", "stale")
    kinds = list(cfg.classifiers)
    lines = ["| source | " + " | ".join(kinds) + " |", "|---" * (len(kinds) + 1) + "|"]
    for row, _, _ in auc_table_rows(cfg):
        cells = summary["rows"].get(row, {})
        vals = []
        for k in kinds:
            c = cells.get(k)
            if c is None:
                vals.append("")
            else:
                vals.append(f"{c['auc']:.2f}" + ("" if c["se"] is None else f" ({c['se']:.2f})"))
        lines.append(f"| {row} | " + " | ".join(vals) + " |")
    text = "\n".join(lines) + "\n"
    md = cfg.artifact_dir / "reports" / "auc_table.md"
    atomic_write_text(md, text)
    out(text.rstrip())
    return md


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

STAGES = ("generate-agents", "run-interviews", "embed", "diversity", "project", "evaluate", "report")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aaisynth", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=STAGES)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--artifacts", help="artifact directory")
    p.add_argument("--mock", action="store_true", default=None, help="offline deterministic providers")
    p.add_argument("--seed", type=int)
    p.add_argument("--total", dest="total_agents", type=int, help="number of agents (multiple of 3)")
    p.add_argument("--workers", type=int)
    p.add_argument("--models", dest="chat_models", help="comma-separated chat model tags")
    p.add_argument("--classifiers", help="comma-separated classifier kinds")
    p.add_argument("--protocol", dest="protocol_path", help="question file, one per line")
    p.add_argument("--human", dest="human_path", help="human transcript directory or .jsonl file")
    p.add_argument("--human-labels", dest="human_labels_path", help="JSON object interview_id -> style")
    p.add_argument("--force", action="store_true", help="regenerate outputs made under other settings")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    keys = ("artifacts", "mock", "seed", "total_agents", "workers", "protocol_path", "human_path", "human_labels_path")
    ov: dict[str, Any] = {k: getattr(args, k) for k in keys}
    for k in ("chat_models", "classifiers"):
        v = getattr(args, k)
        ov[k] = tuple(x.strip() for x in v.split(",") if x.strip()) if v else None
    return ov


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        cfg.artifact_dir.mkdir(parents=True, exist_ok=True)
        cmd = args.command
        if cmd == "generate-agents":
            cmd_generate_agents(cfg, args.force)
        elif cmd == "run-interviews":
            cmd_run_interviews(cfg, args.force)
        elif cmd == "embed":
            cmd_embed(cfg, args.force)
        elif cmd == "diversity":
            cmd_diversity(cfg)
        elif cmd == "project":
            cmd_project(cfg)
        elif cmd == "evaluate":
            cmd_evaluate(cfg)
        else:
            cmd_report(cfg)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ProviderError, CohortGenerationError, InterviewFailed) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (ValidationError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
