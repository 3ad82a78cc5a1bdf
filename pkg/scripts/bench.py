#!/usr/bin/env python3
"""Sweep the pipeline over families and sizes; writes one JSON row per instance.

    python3 scripts/bench.py --sizes 2x4 2x6 3x6 3x8 --count 10 --seed 0 --json results/bench.json
"""
import argparse
import sys
import time

import numpy as np

from subnsw.harness.generators import FAMILIES
from subnsw.harness.io import dumps
from subnsw.harness.pipeline import PipelineConfig, bench


def size(text):
    n, m = text.lower().split("x")
    return int(n), int(m)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", nargs="+", choices=FAMILIES, default=list(FAMILIES))
    ap.add_argument("--sizes", nargs="+", type=size, default=[(2, 4), (2, 6), (3, 6), (3, 8)])
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--mode", choices=("exact", "colgen"), default="exact")
    ap.add_argument("--json", metavar="PATH")
    args = ap.parse_args(argv)

    cfg = PipelineConfig(mode=args.mode, trials=args.trials, seed=args.seed)
    out = []
    print(f"{'family':26s} {'n':>2s} {'m':>2s} {'ok':>3s} {'min r':>7s} {'mean r':>7s} {'sec':>6s}")
    for family in args.families:
        for n, m in args.sizes:
            start = time.perf_counter()
            rows = bench(family, n, m, args.count, args.seed, cfg)
            secs = time.perf_counter() - start
            r = np.array([row.ratio_mean for row in rows if row.ratio_mean is not None])
            good = sum(row.status == "ok" for row in rows)
            print(f"{family:26s} {n:2d} {m:2d} {good:3d} {r.min() if len(r) else float('nan'):7.4f} "
                  f"{r.mean() if len(r) else float('nan'):7.4f} {secs:6.2f}")
            out += [row.to_dict() for row in rows]
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps({"mode": args.mode, "trials": args.trials, "seed": args.seed, "rows": out}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
