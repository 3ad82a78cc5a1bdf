"""End-to-end runs: LP, graph, repeated rounding, comparison against the exact optimum."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..conflp import approximation_constant, solve_colgen, solve_exact
from ..errors import CapacityError, InfeasibleError, InputError
from ..instance import Instance
from ..oracles import agent_tables, brute_force_opt, log_nsw_masks
from ..rounding import AssignmentGraph, build_graph, bundle_masks, round_batch
from .generators import generate_instance

PIPELINE_OPT_LIMIT = 10**6


@dataclass
class PipelineConfig:
    mode: str = "exact"
    trials: int = 1000
    seed: int = 0
    eps: float = 0.05
    max_rounds: int = 500
    opt_limit: int = PIPELINE_OPT_LIMIT

    def __post_init__(self):
        if self.mode not in ("exact", "colgen"):
            raise InputError(f"mode must be 'exact' or 'colgen', got {self.mode!r}")
        if self.trials < 1:
            raise InputError("trials must be positive")


@dataclass
class PipelineReport:
    name: str
    status: str
    mode: str
    trials: int
    seed: int
    lp_objective: Optional[float] = None
    lp_bound: Optional[float] = None
    nsw_mean: Optional[float] = None
    nsw_min: Optional[float] = None
    nsw_max: Optional[float] = None
    nsw_std: Optional[float] = None
    opt: Optional[float] = None
    ratio_mean: Optional[float] = None
    ratio_best: Optional[float] = None
    guarantee: float = field(default_factory=lambda: 1.0 / approximation_constant(0.0))
    warning: str = ""
    nsw: Optional[np.ndarray] = field(default=None, repr=False)
    solution: object = field(default=None, repr=False)
    graph: Optional[AssignmentGraph] = field(default=None, repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        keys = ("name", "status", "mode", "trials", "seed", "lp_objective", "lp_bound", "nsw_mean",
                "nsw_min", "nsw_max", "nsw_std", "opt", "ratio_mean", "ratio_best", "guarantee", "warning")
        return {k: getattr(self, k) for k in keys}


def solve_lp(inst: Instance, cfg: PipelineConfig):
    if cfg.mode == "exact":
        return solve_exact(inst)
    return solve_colgen(inst, eps=cfg.eps, max_rounds=cfg.max_rounds)


def sample_nsw(inst: Instance, g: AssignmentGraph, X: np.ndarray) -> np.ndarray:
    masks = bundle_masks(g, X)
    return np.exp(log_nsw_masks(inst, masks, agent_tables(inst)))


def run_pipeline(inst: Instance, cfg: PipelineConfig | None = None, **kw) -> PipelineReport:
    """LP, graph, ``trials`` roundings, and (when affordable) the brute-force optimum.

    The roundings are drawn as one vectorized batch from a generator seeded
    with ``cfg.seed``; the same seed always reproduces the same report.
    """
    cfg = cfg or PipelineConfig(**kw)
    rep = PipelineReport(inst.name, "ok", cfg.mode, cfg.trials, cfg.seed)
    opt = None
    if inst.n ** inst.m <= cfg.opt_limit:
        opt = brute_force_opt(inst).value
        rep.opt = opt
    try:
        sol = solve_lp(inst, cfg)
    except InfeasibleError as exc:
        rep.status = "infeasible"
        rep.warning = str(exc)
        rep.opt = 0.0 if opt is None else opt
        return rep
    rep.solution = sol
    rep.lp_objective = sol.objective
    rep.lp_bound = math.exp(sol.objective)
    rep.warning = sol.warning
    g = build_graph(inst, sol)
    rep.graph = g
    X = round_batch(g, cfg.trials, np.random.default_rng(cfg.seed))
    rep.samples = X
    vals = sample_nsw(inst, g, X)
    rep.nsw = vals
    rep.nsw_mean = float(vals.mean())
    rep.nsw_min = float(vals.min())
    rep.nsw_max = float(vals.max())
    rep.nsw_std = float(vals.std())
    if opt:
        rep.ratio_mean = rep.nsw_mean / opt
        rep.ratio_best = rep.nsw_max / opt
    return rep


@dataclass
class BenchRow:
    name: str
    n: int
    m: int
    status: str
    lp_objective: Optional[float]
    nsw_mean: Optional[float]
    opt: Optional[float]
    ratio_mean: Optional[float]
    seconds: float = 0.0

    def to_dict(self) -> dict:
        # wall-clock time is left out so reports are reproducible
        return {k: v for k, v in self.__dict__.items() if k != "seconds"}


def bench(family: str, n: int, m: int, count: int, seed: int, cfg: PipelineConfig | None = None) -> list[BenchRow]:
    """Run the pipeline on ``count`` generated instances (instance ``k`` uses seed ``seed + k``)."""
    cfg = cfg or PipelineConfig(seed=seed)
    rows = []
    for k in range(count):
        inst = generate_instance(family, n, m, seed + k)
        start = time.perf_counter()
        try:
            rep = run_pipeline(inst, cfg)
        except CapacityError:
            rep = PipelineReport(inst.name, "capacity", cfg.mode, cfg.trials, cfg.seed)
        rows.append(BenchRow(inst.name, n, m, rep.status, rep.lp_objective, rep.nsw_mean, rep.opt,
                             rep.ratio_mean, time.perf_counter() - start))
    return rows
