"""Per-agent histogram diagnostics for a rounded LP solution.

The input histogram lays an agent's configurations side by side on ``[0, 1]``
(width ``y``), sorted by the value of their large item; at position ``t`` the
dark height ``u_t`` is the large item's value and the light height ``B_t`` the
value of the remaining items. The output histogram replaces ``B_t`` by ``C_t``,
the upper ``t``-quantile of the rounded small-item value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from ..errors import InputError, InvariantError
from ..instance import Instance
from ..rounding import AssignmentGraph, bundle_masks, kappa, round_batch, small_masks
from ..valuations import MAX_TABLE_GROUND, TOL

GAP_BOUND = 3.0 + 26.0 / math.e ** 3
LOG_BOUND = GAP_BOUND + math.log(2.0)
LAMBDAS = (0.5, 1.0, 2.0, 3.0)
WIDTH_TOL = 1e-9


def tail_bound(lam: float) -> float:
    return (6.0 * lam + 1.0) * math.exp(-lam)


@dataclass
class InputHistogram:
    agent: int
    widths: np.ndarray
    u: np.ndarray
    B: np.ndarray
    values: np.ndarray
    large: list
    sets: list

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.widths)])

    @property
    def int_log_uB(self) -> float:
        return float(self.widths @ np.log(self.u + self.B))

    @property
    def lp_share(self) -> float:
        return float(self.widths @ np.log(self.values))

    def segment_slack(self) -> np.ndarray:
        """``ln(u + B) - ln v(S)`` per segment; non-negative by subadditivity."""
        return np.log(self.u + self.B) - np.log(self.values)

    def segment_bound_holds(self, tol: float = TOL) -> bool:
        return bool(np.all(self.segment_slack() >= -tol))

    def at(self, t: np.ndarray):
        """``(u_t, B_t)`` at positions ``t`` in ``(0, 1]`` (segments are left-open)."""
        k = np.searchsorted(self.edges, t, side="left") - 1
        k = np.clip(k, 0, len(self.widths) - 1)
        return self.u[k], self.B[k]


def input_histogram(inst: Instance, sol, agent: int) -> InputHistogram:
    v = inst.valuation(agent)
    cols = [(k, S, y) for k, ((i, S), y) in enumerate(sol.entries.items()) if i == agent]
    if not cols:
        raise InputError(f"agent {inst.agents[agent].id!r} has no configurations")
    rows = []
    single = v.singletons
    for order, S, y in cols:
        k = kappa(v, S)
        rows.append((-single[k], k, order, S, y))
    rows.sort(key=lambda r: r[:3])
    widths = np.array([r[4] for r in rows])
    if abs(widths.sum() - 1.0) > 1e-7:
        raise InputError(f"configuration weights of agent {agent} sum to {widths.sum()!r}")
    u = np.array([-r[0] for r in rows])
    B = np.array([v.value(r[3] - {r[1]}) for r in rows])
    vals = np.array([v.value(r[3]) for r in rows])
    if np.any(u <= 0):
        raise InvariantError("configuration with a worthless large item")
    return InputHistogram(agent, widths, u, B, vals, [r[1] for r in rows], [r[3] for r in rows])


@dataclass
class OutputQuantiles:
    """Empirical quantile function of the rounded small-item value.

    For ``t`` in ``((k-1)/N, k/N]``, ``C_t`` is the ``k``-th largest sample.
    """

    samples: np.ndarray  # sorted descending
    seed: int

    @property
    def count(self) -> int:
        return len(self.samples)

    @property
    def c0(self) -> float:
        return float(self.samples[0])

    def at(self, t, shift: float = 0.0) -> np.ndarray:
        """``C_t``; with ``shift`` > 0 the level is lowered by ``shift`` binomial sigmas."""
        t = np.asarray(t, dtype=float)
        N = self.count
        if shift:
            t = t - shift * np.sqrt(np.clip(t * (1.0 - t), 0.0, None) / N)
        k = np.clip(np.ceil(t * N - 1e-9).astype(np.int64), 1, N)
        return self.samples[k - 1]


def _samples_for(inst: Instance, g: AssignmentGraph, X: np.ndarray, agent: int, masks_fn) -> np.ndarray:
    masks = masks_fn(g, X)[:, agent]
    v = inst.valuation(agent)
    if inst.m <= MAX_TABLE_GROUND:
        return v.table()[masks]
    uniq, inv = np.unique(masks, return_inverse=True)
    return np.array([v.value_mask(int(s)) for s in uniq])[inv]


def output_quantiles(inst: Instance, g: AssignmentGraph, agent: int, trials: int, seed: int,
                     X: np.ndarray | None = None) -> OutputQuantiles:
    if trials < 1000:
        raise InputError("output quantiles need at least 10^3 trials")
    if X is None:
        X = round_batch(g, trials, np.random.default_rng(seed))
    vals = _samples_for(inst, g, X, agent, small_masks)
    return OutputQuantiles(np.sort(vals)[::-1].copy(), seed)


def _merged_pieces(hist: InputHistogram, q: OutputQuantiles):
    """Midpoints and widths of the common refinement of both step functions."""
    grid = np.union1d(hist.edges, np.arange(q.count + 1) / q.count)
    grid = grid[(grid >= 0) & (grid <= 1)]
    widths = np.diff(grid)
    keep = widths > 0
    mids = 0.5 * (grid[:-1] + grid[1:])
    return mids[keep], widths[keep]


@dataclass
class GapReport:
    agent: str
    int_log_uB: float
    int_log_uC: float
    int_log_uC_shifted: float
    gap: float
    gap_shifted: float
    gap_bound: float
    lp_share: float
    mean_log_value: float
    mean_log_se: float
    log_bound: float
    rearrangement_lhs: float
    tails: dict = field(default_factory=dict)
    segment_bound: bool = True
    c0: float = 0.0
    trials: int = 0

    @property
    def gap_ok(self) -> bool:
        return self.gap_shifted <= self.gap_bound + 1e-9

    @property
    def log_ok(self) -> bool:
        return self.mean_log_value + 3.0 * self.mean_log_se >= self.lp_share - self.log_bound - 1e-9

    @property
    def rearrangement_ok(self) -> bool:
        # expected log value vs. the output histogram, less ln 2
        return self.mean_log_value + 3.0 * self.mean_log_se >= self.rearrangement_lhs - math.log(2.0) - 1e-9

    @property
    def tails_ok(self) -> bool:
        return all(t["measure_shifted"] <= t["bound"] + 1e-9 for t in self.tails.values())

    @property
    def passed(self) -> bool:
        return self.segment_bound and self.gap_ok and self.log_ok and self.tails_ok and self.rearrangement_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(gap_ok=self.gap_ok, log_ok=self.log_ok, tails_ok=self.tails_ok,
                 rearrangement_ok=self.rearrangement_ok, passed=self.passed,
                 tails={f"{lam:g}": t for lam, t in self.tails.items()})
        return d


def per_agent_gap_check(inst: Instance, sol, g: AssignmentGraph, agent: int, trials: int, seed: int,
                        lambdas=LAMBDAS, X: np.ndarray | None = None) -> GapReport:
    """Compare the input and output histograms of one agent.

    Sampling noise is absorbed by also evaluating every ``C_t`` quantity at a
    level lowered by three binomial standard deviations (an optimistic
    quantile); the verdicts use that shifted version.
    """
    if X is None:
        X = round_batch(g, trials, np.random.default_rng(seed))
    hist = input_histogram(inst, sol, agent)
    q = output_quantiles(inst, g, agent, trials, seed, X=X)
    mids, widths = _merged_pieces(hist, q)
    u, B = hist.at(mids)
    C = q.at(mids)
    C_hi = q.at(mids, shift=3.0)
    if np.any(u + C <= 0):
        raise InvariantError("output histogram reaches zero height")
    int_uC = float(widths @ np.log(u + C))
    int_uC_hi = float(widths @ np.log(u + C_hi))
    int_uB = float(widths @ np.log(u + B))
    tails = {}
    for lam in lambdas:
        with np.errstate(divide="ignore"):
            over = np.log(B) > np.log(u + C) + lam
            over_hi = np.log(B) > np.log(u + C_hi) + lam
        tails[float(lam)] = {"measure": float(widths @ over), "measure_shifted": float(widths @ over_hi),
                             "bound": tail_bound(lam)}
    full = _samples_for(inst, g, X, agent, bundle_masks)
    logs = np.log(full)
    se = float(logs.std(ddof=1) / math.sqrt(len(logs))) if len(logs) > 1 else 0.0
    return GapReport(
        agent=inst.agents[agent].id,
        int_log_uB=int_uB,
        int_log_uC=int_uC,
        int_log_uC_shifted=int_uC_hi,
        gap=int_uB - int_uC,
        gap_shifted=int_uB - int_uC_hi,
        gap_bound=GAP_BOUND,
        lp_share=hist.lp_share,
        mean_log_value=float(logs.mean()),
        mean_log_se=se,
        log_bound=LOG_BOUND,
        rearrangement_lhs=int_uC,
        tails=tails,
        segment_bound=hist.segment_bound_holds(),
        c0=q.c0,
        trials=len(logs),
    )


@dataclass
class RearrangementVerdict:
    passed: bool
    identity: float
    permuted: float
    witness: tuple = ()


def _check_sequences(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("sequences must be one-dimensional and of equal length")
    for s, name in ((a, "a"), (b, "b")):
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise InputError(f"sequence {name} must be non-negative and non-increasing")
    if np.any(a + b <= 0):
        raise InputError("every a_j + b_j must be positive")
    return a, b


def rearrangement_check(a, b, sigma, tol: float = TOL) -> RearrangementVerdict:
    """Pairing the sorted sequences in the same order minimizes ``sum ln(a_j + b_sigma(j))``."""
    a, b = _check_sequences(a, b)
    sigma = np.asarray(sigma, dtype=np.int64)
    if sorted(sigma.tolist()) != list(range(len(a))):
        raise InputError("sigma must be a permutation")
    ident = float(np.log(a + b).sum())
    perm = float(np.log(a + b[sigma]).sum())
    ok = perm >= ident - tol
    return RearrangementVerdict(ok, ident, perm, () if ok else tuple(sigma.tolist()))


def rearrangement_exhaustive(a, b, tol: float = TOL) -> RearrangementVerdict:
    a, b = _check_sequences(a, b)
    if len(a) > 8:
        raise InputError("exhaustive rearrangement check is limited to length 8")
    ident = float(np.log(a + b).sum())
    worst = math.inf
    for sigma in permutations(range(len(a))):
        val = float(np.log(a + b[list(sigma)]).sum())
        if val < ident - tol:
            return RearrangementVerdict(False, ident, val, sigma)
        worst = min(worst, val)
    return RearrangementVerdict(True, ident, worst)


def histogram_to_dict(inst: Instance, hist: InputHistogram) -> dict:
    return {
        "agent": inst.agents[hist.agent].id,
        "segments": [{"width": float(w), "u": float(u), "B": float(b), "value": float(v),
                      "large": inst.item_ids[k], "items": [inst.item_ids[j] for j in sorted(S)]}
                     for w, u, b, v, k, S in zip(hist.widths, hist.u, hist.B, hist.values,
                                                 hist.large, hist.sets)],
        "int_log_uB": hist.int_log_uB,
        "lp_share": hist.lp_share,
        "segment_bound": hist.segment_bound_holds(),
    }

