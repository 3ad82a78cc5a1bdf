#!/usr/bin/env python3
"""Lower-tail experiment for pipage rounding: empirical Pr[v(U) <= (1 - delta) mu] vs exp(-delta^2 mu / 2).

Runs the ten unit-item additive case and a handful of random coverage
valuations with single-item values capped at 1.
"""
import argparse
import sys

import numpy as np

from subnsw.harness.generators import random_coverage
from subnsw.pipage import concentration_experiment
from subnsw.valuations import Additive


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=808)
    ap.add_argument("--coverage", type=int, default=5, help="number of random coverage cases")
    ap.add_argument("--delta", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cases = [("additive-10-unit", Additive(np.ones(10)), np.full(10, 0.5))]
    for k in range(args.coverage):
        m = int(rng.integers(6, 11))
        cases.append((f"coverage-{k}-m{m}", random_coverage(m, rng, max_single=1.0), rng.uniform(0.2, 0.9, m)))

    print(f"{'case':22s} {'delta':>5s} {'mu':>8s} {'tail':>8s} {'bound':>8s} {'3sigma':>8s} verdict")
    ok = True
    for k, (name, v, x) in enumerate(cases):
        for delta in args.delta:
            rep = concentration_experiment(v, x, delta, args.trials, seed=args.seed + k)
            ok &= rep.passed
            print(f"{name:22s} {delta:5.2f} {rep.mu:8.4f} {rep.empirical:8.5f} {rep.bound:8.5f} "
                  f"{rep.slack:8.5f} {'pass' if rep.passed else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
