"""Data-increment curve on the mock cohort: AUC versus synthetic interviews per style.

Builds the 60-agent mock cohort in memory, interviews it with one mock model,
and evaluates standardized transfer to the mock human set at each grid size.

    python scripts/increment_curve.py --classifier logreg_l2 --reps 10
"""

from __future__ import annotations

import argparse
from datetime import datetime

from aaisynth.classifiers import ClassifierSpec
from aaisynth.embedding import embed_transcripts, split_by_domain
from aaisynth.evaluation import data_increment_curve
from aaisynth.gateway import Gateway
from aaisynth.interview import InterviewProtocol, run_interview
from aaisynth.mock import MockChatProvider, MockEmbedder, mock_human_transcripts
from aaisynth.personas import CohortSpec, build_cohort

MODEL = "gpt-4"


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--classifier", default="logreg_l2")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--grid", default="2:21", help="start:stop[:step] per-style sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    grid = range(*map(int, args.grid.split(":")))

    gw = Gateway(
        lambda tag: MockChatProvider(args.seed),
        {"memory": MockEmbedder(384, args.seed), "answer": MockEmbedder(1536, args.seed)},
        sleep=lambda s: None,
    )
    agents = build_cohort(gw, CohortSpec(reference_timestamp=datetime(2024, 6, 1, 12)))
    protocol = InterviewProtocol.default()
    transcripts = [run_interview(a, protocol, gw, model_tag=MODEL, memory_embedder=gw.embedder("memory")) for a in agents]
    parts = split_by_domain(embed_transcripts(transcripts + mock_human_transcripts(args.seed), gw.embedder("answer")))

    spec = ClassifierSpec(args.classifier, seed=args.seed)
    curve = data_increment_curve(
        parts[f"synthetic:{MODEL}"], parts["human_labeled"], spec, grid, args.reps, parts["human_unlabeled"]
    )
    print(f"{'n/style':>7}  {'AUC':>6}  {'SE':>6}")
    for p in curve.points:
        print(f"{p.n_per_style:>7}  {p.mean_auc:6.3f}  {p.se:6.3f}")


if __name__ == "__main__":
    main()
