"""Command line interface: ``python -m subnsw <command> ...``.

Exit codes: 0 success, 1 validation error, 2 infeasible or optimum 0,
3 capacity error, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from ..conflp import solve_colgen, solve_exact
from ..errors import InfeasibleError, InputError, NSWError
from ..oracles import brute_force_opt
from ..rounding import extract_allocation
from .diagnostics import LAMBDAS, histogram_to_dict, input_histogram, per_agent_gap_check
from .generators import FAMILIES
from .io import dumps, load_instance
from .pipeline import PipelineConfig, bench, run_pipeline

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAPACITY, EXIT_INTERNAL = 0, 1, 2, 3, 4


def _plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _emit(args, report: dict) -> None:
    if getattr(args, "json", None):
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps(_plain(report)))


def _fmt(x, digits=6) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.{digits}g}"
    return str(x)


def _table(rows, headers) -> str:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[k]) for r in cells)) if cells else len(h) for k, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(out)


def _load(args):
    return load_instance(args.file, normalize_weights=args.normalize_weights)


def _solve(inst, args):
    if args.mode == "exact":
        return solve_exact(inst)
    return solve_colgen(inst, eps=args.eps, max_rounds=args.max_rounds)


def cmd_validate(args) -> int:
    inst = _load(args)
    print(f"valid instance {inst.name or args.file}: {inst.n} agents, {inst.m} items")
    print(_table([(a.id, a.weight, a.valuation.kind) for a in inst.agents], ["agent", "weight", "kind"]))
    _emit(args, {"command": "validate", "valid": True, "name": inst.name, "n": inst.n, "m": inst.m,
                 "items": list(inst.item_ids),
                 "agents": [{"id": a.id, "weight": a.weight, "kind": a.valuation.kind} for a in inst.agents],
                 "metadata": inst.metadata})
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args)
    sol = _solve(inst, args)
    print(f"{args.mode} LP objective {sol.objective:.9g} (NSW bound {math.exp(sol.objective):.6g})")
    if sol.warning:
        print(f"warning: {sol.warning}")
    rows = [(inst.agents[i].id, ",".join(inst.item_ids[j] for j in sorted(S)), y)
            for (i, S), y in sol.entries.items()]
    print(_table(rows, ["agent", "items", "y"]))
    rep = sol.to_dict(inst)
    rep.update(command="solve", certified=sol.certified, eps=args.eps if args.mode == "colgen" else None)
    _emit(args, rep)
    return EXIT_OK


def _pipeline_cfg(args) -> PipelineConfig:
    return PipelineConfig(mode=args.mode, trials=args.trials, seed=args.seed, eps=args.eps,
                          max_rounds=args.max_rounds)


def cmd_round(args) -> int:
    inst = _load(args)
    rep = run_pipeline(inst, _pipeline_cfg(args))
    out = rep.to_dict()
    out["command"] = "round"
    if rep.status != "ok":
        print(f"status {rep.status}: {rep.warning}")
        _emit(args, out)
        return EXIT_INFEASIBLE
    X = rep.samples
    out["edge_means"] = [{"agent": inst.agents[e.agent].id, "item": inst.item_ids[e.item],
                          "marked": e.marked, "x": float(x), "mean": float(mu)}
                         for e, x, mu in zip(rep.graph.edges, rep.graph.x, X.mean(axis=0))]
    out["first_allocation"] = extract_allocation(rep.graph, X[0].astype(float)).to_dict(inst)
    rows = [("LP objective", rep.lp_objective), ("exp(LP)", rep.lp_bound), ("mean NSW", rep.nsw_mean),
            ("min NSW", rep.nsw_min), ("max NSW", rep.nsw_max), ("OPT", rep.opt),
            ("mean/OPT", rep.ratio_mean), ("best/OPT", rep.ratio_best), ("guarantee", rep.guarantee)]
    print(f"{args.trials} roundings, seed {args.seed}")
    print(_table(rows, ["quantity", "value"]))
    _emit(args, out)
    return EXIT_OK


def cmd_opt(args) -> int:
    inst = _load(args)
    rep = brute_force_opt(inst)
    out = rep.to_dict(inst)
    out["command"] = "opt"
    print(f"OPT = {rep.value:.9g} over {rep.assignments} assignments ({rep.ties} tied)")
    print(_table([(a, ",".join(items)) for a, items in out["allocation"].items()], ["agent", "items"]))
    _emit(args, out)
    return EXIT_INFEASIBLE if rep.value <= 0 else EXIT_OK


def cmd_diag(args) -> int:
    inst = _load(args)
    lambdas = tuple(float(s) for s in args.lam.split(",")) if args.lam else LAMBDAS
    cfg = _pipeline_cfg(args)
    rep = run_pipeline(inst, cfg)
    if rep.status != "ok":
        print(f"status {rep.status}: {rep.warning}")
        _emit(args, {"command": "diag", "status": rep.status, "warning": rep.warning})
        return EXIT_INFEASIBLE
    agents = [inst.agent_index(args.agent)] if args.agent else list(range(inst.n))
    reports, rows = [], []
    for i in agents:
        gap = per_agent_gap_check(inst, rep.solution, rep.graph, i, args.trials, args.seed,
                                  lambdas=lambdas, X=rep.samples)
        d = gap.to_dict()
        d["histogram"] = histogram_to_dict(inst, input_histogram(inst, rep.solution, i))
        reports.append(d)
        rows.append((gap.agent, gap.gap, gap.gap_bound, gap.mean_log_value, gap.lp_share - gap.log_bound,
                     "pass" if gap.passed else "FAIL"))
    print(_table(rows, ["agent", "gap", "gap bound", "E ln v(T)", "log floor", "verdict"]))
    _emit(args, {"command": "diag", "status": "ok", "trials": args.trials, "seed": args.seed,
                 "lambdas": list(lambdas), "agents": reports})
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_INTERNAL


def cmd_bench(args) -> int:
    cfg = PipelineConfig(mode=args.mode, trials=args.trials, seed=args.seed, eps=args.eps,
                         max_rounds=args.max_rounds)
    rows = bench(args.family, args.n, args.m, args.count, args.seed, cfg)
    print(_table([(r.name, r.status, r.lp_objective, r.nsw_mean, r.opt, r.ratio_mean, round(r.seconds, 3))
                  for r in rows], ["instance", "status", "LP", "mean NSW", "OPT", "mean/OPT", "sec"]))
    _emit(args, {"command": "bench", "family": args.family, "n": args.n, "m": args.m, "count": args.count,
                 "seed": args.seed, "trials": args.trials, "rows": [r.to_dict() for r in rows]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subnsw", description="Weighted Nash social welfare under submodular valuations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def file_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file")
        sp.add_argument("--normalize-weights", action="store_true", help="rescale weights to sum to 1")
        sp.add_argument("--json", metavar="PATH", help="write a machine-readable report")
        return sp

    def lp_opts(sp):
        sp.add_argument("--mode", choices=("exact", "colgen"), default="exact")
        sp.add_argument("--eps", type=float, default=0.05)
        sp.add_argument("--max-rounds", type=int, default=500)

    file_cmd("validate", "check an instance file")
    sp = file_cmd("solve", "solve the configuration LP")
    lp_opts(sp)
    sp = file_cmd("round", "solve and round repeatedly")
    lp_opts(sp)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, required=True)
    file_cmd("opt", "exact optimum by enumeration")
    sp = file_cmd("diag", "per-agent histogram diagnostics")
    lp_opts(sp)
    sp.add_argument("--agent", help="agent id (default: all agents)")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", help="comma-separated tail levels (default 0.5,1,2,3)")
    sp = sub.add_parser("bench", help="pipeline over generated instances")
    sp.add_argument("--family", choices=FAMILIES, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--json", metavar="PATH")
    lp_opts(sp)
    return p


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "round": cmd_round, "opt": cmd_opt,
            "diag": cmd_diag, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NSWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
