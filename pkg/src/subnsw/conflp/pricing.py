"""Submodular knapsack / cover oracles and the dual-separation pricing oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from ..errors import InfeasibleError, InputError
from ..valuations import TOL, MaskOracle, Valuation, from_mask

E_RATIO = math.e / (math.e - 1.0)
GREEDY_FACTOR = 1.0 - 1.0 / math.e
EXACT_BUDGET_ITEMS = 16


@dataclass(frozen=True)
class Configuration:
    agent: int
    items: frozenset
    value: float


@dataclass(frozen=True)
class DualPrices:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).reshape(-1)
        if np.any(a < -1e-7):
            raise InputError("item prices alpha must be non-negative")
        object.__setattr__(self, "alpha", np.maximum(a, 0.0))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))


@dataclass(frozen=True)
class SetResult:
    items: frozenset
    value: float
    cost: float
    feasible: bool = True


def _cost(costs: np.ndarray, mask: int) -> float:
    total = 0.0
    j = 0
    while mask:
        if mask & 1:
            total += costs[j]
        mask >>= 1
        j += 1
    return total


class KnapsackSolver:
    """Partial enumeration (seeds of up to 3 items) plus density greedy.

    Achieves ``(1 - 1/e)`` of the best set within the budget for monotone
    submodular values. Results are memoized per budget, so a cover search or a
    pricing sweep over many value targets re-uses every probe.
    """

    def __init__(self, oracle, costs, forced: Optional[int] = None, allowed: Optional[int] = None):
        self.oracle = oracle
        self.m = oracle.m
        self.costs = np.asarray(costs, dtype=float).reshape(-1)
        if len(self.costs) != self.m or not np.all(np.isfinite(self.costs)):
            raise InputError("costs must be finite, one per item")
        full = (1 << self.m) - 1
        self.allowed = full if allowed is None else allowed
        self.forced = forced
        base = 0
        if forced is not None:
            base |= 1 << forced
        # free items never hurt a monotone objective
        for j in range(self.m):
            if (self.allowed >> j) & 1 and self.costs[j] <= 0:
                base |= 1 << j
        self.base = base
        self.base_cost = _cost(self.costs, base)
        self.items = [j for j in range(self.m)
                      if (self.allowed >> j) & 1 and not (base >> j) & 1]
        self._memo: dict[float, int] = {}

    def solve(self, budget: float) -> int:
        key = float(budget)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._solve(key)
            self._memo[key] = hit
        return hit

    def _solve(self, budget: float) -> int:
        room = budget - self.base_cost
        if room < -TOL * max(1.0, abs(budget)):
            return -1
        f, c = self.oracle, self.costs
        eps = TOL * max(1.0, abs(budget))
        items = [j for j in self.items if c[j] <= room + eps]
        base_val = f(self.base)
        best = (base_val, -self.base_cost, -self.base)

        def consider(mask, val):
            nonlocal best
            key = (val, -_cost(c, mask), -mask)
            if key > best:
                best = key

        for r in (1, 2):
            for seed in combinations(items, r):
                sc = sum(c[j] for j in seed)
                if sc <= room + eps:
                    mask = self.base
                    for j in seed:
                        mask |= 1 << j
                    consider(mask, f(mask))
        for seed in combinations(items, 3):
            sc = sum(c[j] for j in seed)
            if sc > room + eps:
                continue
            mask = self.base
            for j in seed:
                mask |= 1 << j
            val = f(mask)
            left = room - sc
            pool = [j for j in items if j not in seed]
            while pool:
                best_j, best_ratio, best_gain = -1, -1.0, 0.0
                for j in pool:
                    gain = f(mask | (1 << j)) - val
                    ratio = gain / c[j]
                    if ratio > best_ratio:
                        best_j, best_ratio, best_gain = j, ratio, gain
                pool.remove(best_j)
                if best_gain <= 0:
                    break
                if c[best_j] <= left + eps:
                    mask |= 1 << best_j
                    val += best_gain
                    left -= c[best_j]
            consider(mask, f(mask))
        return -best[2]

    def result(self, mask: int) -> SetResult:
        if mask < 0:
            return SetResult(frozenset(), 0.0, 0.0, feasible=False)
        return SetResult(from_mask(mask), self.oracle(mask), _cost(self.costs, mask))

    def candidate_budgets(self) -> Optional[np.ndarray]:
        """Every distinct cost a feasible set can have, or None when too many items."""
        if len(self.items) > EXACT_BUDGET_ITEMS:
            return None
        sums = np.zeros(1)
        for j in self.items:
            sums = np.concatenate([sums, sums + self.costs[j]])
        return np.unique(sums + self.base_cost)

    def cover(self, target: float, eps: float) -> int:
        """Cheapest probed budget whose knapsack value clears ``(1 - 1/e - eps) * target``.

        The knapsack output only changes at budgets equal to a subset sum, and
        every budget at or above the optimal cover cost clears the threshold,
        so a binary search over the sorted subset sums returns a set whose
        cost is at most the optimal cover cost.
        """
        need = (GREEDY_FACTOR - eps) * target
        f = self.oracle

        def clears(budget):
            mask = self.solve(budget)
            return mask >= 0 and f(mask) >= need - TOL * max(1.0, abs(need))

        budgets = self.candidate_budgets()
        if budgets is not None:
            lo, hi = -1, len(budgets) - 1
            if not clears(budgets[hi]):
                raise InfeasibleError("cover target unattainable")
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if clears(budgets[mid]):
                    hi = mid
                else:
                    lo = mid
            return self.solve(budgets[hi])
        lo_b, hi_b = self.base_cost, self.base_cost + float(sum(self.costs[j] for j in self.items))
        if not clears(hi_b):
            raise InfeasibleError("cover target unattainable")
        if clears(lo_b):
            return self.solve(lo_b)
        for _ in range(60):
            mid = 0.5 * (lo_b + hi_b)
            if clears(mid):
                hi_b = mid
            else:
                lo_b = mid
        return self.solve(hi_b)


def submodular_knapsack_max(v: Valuation, costs, budget: float, forced: Optional[int] = None) -> SetResult:
    """Approximately maximize ``v(S)`` subject to ``cost(S) <= budget`` (and ``forced in S``).

    An infeasible request (forced item over budget) yields an empty result with
    ``feasible=False``.
    """
    costs = np.asarray(costs, dtype=float)
    if np.any(costs < 0):
        raise InputError("costs must be non-negative")
    solver = KnapsackSolver(MaskOracle(v), costs, forced=forced)
    return solver.result(solver.solve(budget))


def submodular_cover_min_cost(v: Valuation, costs, target: float, eps: float,
                              forced: Optional[int] = None) -> SetResult:
    """Set with cost at most the cheapest cover of ``target`` and value ``>= (1 - 1/e - eps) target``."""
    if not 0 < eps < GREEDY_FACTOR:
        raise InputError("eps must lie in (0, 1 - 1/e)")
    costs = np.asarray(costs, dtype=float)
    if np.any(costs < 0):
        raise InputError("costs must be non-negative")
    oracle = MaskOracle(v)
    if target <= 0 and forced is None:
        return SetResult(frozenset(), 0.0, 0.0)
    if oracle((1 << v.m) - 1) < target - TOL * max(1.0, target):
        raise InfeasibleError(f"no set reaches the target value {target}")
    solver = KnapsackSolver(oracle, costs, forced=forced)
    return solver.result(solver.cover(target, eps))


def internal_eps(eps: float) -> float:
    """Grid/cover accuracy that makes the combined loss at most ``e/(e-1) + eps``.

    Solves ``(1 + d) / (1 - 1/e - d) <= e/(e-1) + eps`` for ``d``.
    """
    c0 = GREEDY_FACTOR
    return eps * c0 / (1.0 + 1.0 / c0 + eps)


def certificate_slack(eps: float) -> float:
    """Per-unit-weight additive slack of a pricing certificate: ``ln(e/(e-1) + eps)``."""
    return math.log(E_RATIO + eps)


@dataclass
class PricingResult:
    column: Optional[Configuration]
    violation: float
    slack: float
    probes: int

    @property
    def certified(self) -> bool:
        return self.column is None


def _violation_tol(rhs: float) -> float:
    return 1e-9 * max(1.0, abs(rhs))


def pricing_oracle(inst, duals: DualPrices, eps: float, skip=frozenset()) -> PricingResult:
    """Find a configuration whose dual row ``sum alpha + beta_i >= w_i ln v_i(S)`` fails.

    For each agent and each candidate largest item ``j*`` the items worth more
    than ``j*`` are discarded, the value range ``[v(j*), v(allowed)]`` is cut
    into geometric targets, and each target is covered at minimum price with
    ``j*`` forced in. Returns the most violated column found (ties broken by
    agent, then sorted item list) or, when none is violated, a certificate
    that every row holds up to ``w_i * ln(e/(e-1) + eps)``. Columns listed in
    ``skip`` (pairs of agent and bitmask) are ignored.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    d = internal_eps(eps)
    alpha, beta = duals.alpha, duals.beta
    if len(alpha) != inst.m or len(beta) != inst.n:
        raise InputError("dual vector sizes do not match the instance")
    best = None
    probes = 0
    for i in range(inst.n):
        v = inst.valuation(i)
        w = inst.agents[i].weight
        oracle = MaskOracle(v)
        single = v.singletons
        for jstar in range(inst.m):
            fj = single[jstar]
            if fj <= 0:
                continue
            allowed = 0
            for j in range(inst.m):
                if single[j] <= fj:
                    allowed |= 1 << j
            v_top = oracle(allowed)
            if w * math.log(v_top) - (alpha[jstar] + beta[i]) <= _violation_tol(w * math.log(v_top)):
                continue
            solver = KnapsackSolver(oracle, alpha, forced=jstar, allowed=allowed)
            seen = set()
            target = fj
            while target <= v_top * (1.0 + 1e-12):
                mask = solver.cover(target, d)
                probes += 1
                target *= 1.0 + d
                if mask in seen or (i, mask) in skip:
                    continue
                seen.add(mask)
                val = oracle(mask)
                rhs = w * math.log(val)
                gap = rhs - (_cost(alpha, mask) + beta[i])
                if gap > _violation_tol(rhs):
                    col = Configuration(i, from_mask(mask), val)
                    if best is None or _better(gap, col, *best):
                        best = (gap, col)
    slack = certificate_slack(eps)
    if best is None:
        return PricingResult(None, 0.0, slack, probes)
    return PricingResult(best[1], best[0], slack, probes)


def _better(gap, col, best_gap, best_col) -> bool:
    if abs(gap - best_gap) > 1e-12 * max(1.0, abs(best_gap)):
        return gap > best_gap
    return (col.agent, sorted(col.items)) < (best_col.agent, sorted(best_col.items))
