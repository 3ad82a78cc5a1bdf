#!/usr/bin/env python3
"""Scan generator seeds for instances whose exact LP optimum is fractional, then round them.

Most small generated instances have integral LP optima, where rounding is the
identity; the ones listed here are where the rounding actually does something.
"""
import argparse
import sys

from subnsw.conflp import solve_exact
from subnsw.harness.generators import FAMILIES, generate_instance
from subnsw.harness.pipeline import PipelineConfig, run_pipeline
from subnsw.rounding import build_graph


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--max-m", type=int, default=7)
    ap.add_argument("--trials", type=int, default=10_000)
    args = ap.parse_args(argv)

    cfg = PipelineConfig(trials=args.trials, seed=0)
    for family in FAMILIES:
        for n in (2, 3):
            for m in range(n, args.max_m + 1):
                for seed in range(args.seeds):
                    inst = generate_instance(family, n, m, seed)
                    g = build_graph(inst, solve_exact(inst))
                    frac = int(g.fractional(g.x).sum())
                    if not frac:
                        continue
                    rep = run_pipeline(inst, cfg)
                    print(f'("{family}", {n}, {m}, {seed})  fractional edges {frac:2d}  '
                          f"mean/OPT {rep.ratio_mean:.4f}  best/OPT {rep.ratio_best:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
