"""Run every CLI stage against the offline mock providers and print the table.

    python scripts/mock_pipeline.py --artifacts /tmp/aaisynth-mock --total 12
"""

from __future__ import annotations

import argparse
import sys
import time

from aaisynth.cli import STAGES, main


def run(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--artifacts", default="artifacts-mock")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--total", type=int, default=60)
    ap.add_argument("--classifiers", default=None, help="comma-separated subset of classifier kinds")
    args = ap.parse_args(argv)
    common = ["--mock", "--seed", str(args.seed), "--total", str(args.total), "--artifacts", args.artifacts]
    if args.classifiers:
        common += ["--classifiers", args.classifiers]
    for stage in STAGES:
        t0 = time.perf_counter()
        rc = main([stage, *common])
        print(f"# {stage}: exit {rc} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
