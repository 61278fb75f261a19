"""Transfer AUC with and without mean-shift standardization on the offset fixture.

Trains on a domain shifted by a fixed offset and tests on the unshifted one,
averaging over fixture seeds. ``--dim`` and ``--offset-ratio`` explore how the
gain depends on the geometry.

    python scripts/transfer_offset.py --seeds 10 --dim 2 --offset-ratio 5
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from aaisynth.classifiers import KINDS, ClassifierSpec
from aaisynth.evaluation import evaluate_transfer
from aaisynth.fixtures import offset_domains


def main(argv: list[str] | None = None) -> dict:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--offset-ratio", type=float, default=5.0)
    ap.add_argument("--classifiers", default=",".join(KINDS))
    ap.add_argument("--json", action="store_true", help="print the result as JSON")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    result = {}
    for kind in args.classifiers.split(","):
        raw, std = [], []
        for seed in range(args.first_seed, args.first_seed + args.seeds):
            f = offset_domains(seed, dim=args.dim, offset_ratio=args.offset_ratio)
            spec = ClassifierSpec(kind, seed=seed)
            raw.append(evaluate_transfer(f.train, f.test, spec, n_seeds=1).auc)
            std.append(evaluate_transfer(f.train, f.test, spec, True, f.unlabeled, n_seeds=1).auc)
        result[kind] = {"raw": float(np.mean(raw)), "standardized": float(np.mean(std))}
        result[kind]["gain"] = result[kind]["standardized"] - result[kind]["raw"]
    if args.json:
        print(json.dumps(result, indent=2))
    else:
        for kind, r in result.items():
            print(f"{kind:<12} raw {r['raw']:.3f}  standardized {r['standardized']:.3f}  gain {r['gain']:+.3f}")
        print(f"{time.perf_counter() - t0:.1f}s")
    return result


if __name__ == "__main__":
    main()
