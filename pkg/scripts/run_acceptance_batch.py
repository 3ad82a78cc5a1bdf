#!/usr/bin/env python3
"""Run the pipeline over the 50-instance acceptance batch and print per-instance ratios.

    python3 scripts/run_acceptance_batch.py --trials 10000 --seed 2024 --json results/batch.json
"""
import argparse
import math
import sys

import numpy as np

from subnsw.conflp import approximation_constant
from subnsw.harness.generators import acceptance_batch
from subnsw.harness.io import dumps
from subnsw.harness.pipeline import PipelineConfig, run_pipeline


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024, help="batch seed (also the rounding seed)")
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--mode", choices=("exact", "colgen"), default="exact")
    ap.add_argument("--json", metavar="PATH")
    args = ap.parse_args(argv)

    cfg = PipelineConfig(mode=args.mode, trials=args.trials, seed=args.seed)
    rows = []
    for inst in acceptance_batch(args.count, seed=args.seed):
        rep = run_pipeline(inst, cfg)
        frac = int(rep.graph.fractional(rep.graph.x).sum()) if rep.graph is not None else 0
        rows.append(dict(rep.to_dict(), n=inst.n, m=inst.m, fractional_edges=frac,
                         lp_gap=rep.lp_objective - math.log(rep.opt)))
        print(f"{inst.name:40s} LP-lnOPT {rows[-1]['lp_gap']:9.2e}  frac {frac:2d}  "
              f"mean/OPT {rep.ratio_mean:.4f}  best/OPT {rep.ratio_best:.4f}")
    ratios = np.array([r["ratio_mean"] for r in rows])
    floor = 1.0 / approximation_constant(0.0)
    print(f"\nmin mean/OPT {ratios.min():.4f}, median {np.median(ratios):.4f}, guarantee {floor:.5f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps({"trials": args.trials, "seed": args.seed, "mode": args.mode, "rows": rows}))
    return 0 if ratios.min() >= floor else 1


if __name__ == "__main__":
    sys.exit(main())
