"""Configuration LP: exact enumeration and column generation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import CapacityError, InfeasibleError, InputError, InvariantError
from ..instance import Instance
from ..valuations import MaskOracle, from_mask, to_mask
from .pricing import Configuration, DualPrices, certificate_slack, pricing_oracle
from .simplex import solve_lp

log = logging.getLogger(__name__)

ENUM_MAX_ITEMS = 14
CONSTRAINT_TOL = 1e-7
Y_EPS = 1e-12


@dataclass
class FractionalSolution:
    """Sparse LP solution: ``(agent index, item set) -> y`` plus bookkeeping.

    Entries are kept sorted by agent, then by item bitmask; that order is the
    agent-local column order used for tie-breaking downstream.
    """

    entries: dict
    objective: float
    method: str = "exact"
    alpha: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    rounds: int = 0
    warning: str = ""
    certified: bool = False
    extra: dict = field(default_factory=dict)

    def duals(self) -> DualPrices:
        if self.alpha is None:
            raise InputError("solution carries no dual prices")
        return DualPrices(self.alpha, self.beta)

    def agent_columns(self, i: int) -> list[tuple[frozenset, float]]:
        return [(S, y) for (a, S), y in self.entries.items() if a == i]

    def to_dict(self, inst: Instance) -> dict:
        return {
            "objective": self.objective,
            "method": self.method,
            "rounds": self.rounds,
            "warning": self.warning,
            "entries": [
                {"agent": inst.agents[a].id,
                 "items": [inst.item_ids[j] for j in sorted(S)],
                 "y": y}
                for (a, S), y in self.entries.items()
            ],
        }


def _sorted_entries(entries: dict, m: int) -> dict:
    return dict(sorted(entries.items(), key=lambda kv: (kv[0][0], to_mask(kv[0][1], m))))


def lp_objective(inst: Instance, entries: dict) -> float:
    total = 0.0
    for (i, S), y in entries.items():
        total += inst.agents[i].weight * y * math.log(inst.valuation(i).value(S))
    return total


def constraint_violation(inst: Instance, entries: dict) -> float:
    """Largest deviation from the item-partition and agent-partition equalities."""
    item = np.zeros(inst.m)
    agent = np.zeros(inst.n)
    for (i, S), y in entries.items():
        if y < 0:
            return float("inf")
        agent[i] += y
        for j in S:
            item[j] += y
    return float(max(np.abs(item - 1).max(), np.abs(agent - 1).max()))


def check_solution(inst: Instance, sol: FractionalSolution, tol: float = CONSTRAINT_TOL) -> None:
    viol = constraint_violation(inst, sol.entries)
    if viol > tol:
        raise InvariantError(f"LP constraints violated by {viol:.3g}")


def _columns(inst: Instance):
    """All positive-value configurations as parallel arrays (agent, mask, value)."""
    if inst.m > ENUM_MAX_ITEMS:
        raise CapacityError(f"column enumeration limited to m <= {ENUM_MAX_ITEMS}, got {inst.m}")
    agents, masks, values = [], [], []
    all_masks = np.arange(1, 1 << inst.m)
    for i in range(inst.n):
        table = inst.valuation(i).table()[1:]
        keep = table > 0
        agents.append(np.full(int(keep.sum()), i))
        masks.append(all_masks[keep])
        values.append(table[keep])
    return np.concatenate(agents), np.concatenate(masks), np.concatenate(values)


def enumerate_columns(inst: Instance) -> list[Configuration]:
    agents, masks, values = _columns(inst)
    return [Configuration(int(i), from_mask(int(s)), float(v))
            for i, s, v in zip(agents, masks, values)]


def _constraint_matrix(inst: Instance, agents, masks) -> np.ndarray:
    A = np.zeros((inst.m + inst.n, len(masks)))
    for j in range(inst.m):
        A[j] = (masks >> j) & 1
    A[inst.m + agents, np.arange(len(masks))] = 1.0
    return A


def solve_exact(inst: Instance) -> FractionalSolution:
    """Optimal basic solution of the fully enumerated configuration LP."""
    agents, masks, values = _columns(inst)
    for i in range(inst.n):
        if not np.any(agents == i):
            raise InfeasibleError(f"agent {inst.agents[i].id!r} values every set at 0")
    if inst.m < inst.n:
        raise InfeasibleError("fewer items than agents: some agent must get nothing")
    w = inst.weights
    c = w[agents] * np.log(values)
    A = _constraint_matrix(inst, agents, masks)
    b = np.ones(inst.m + inst.n)
    res = solve_lp(c, A, b)
    if res.status == "infeasible":
        raise InfeasibleError("configuration LP is infeasible")
    if res.status != "optimal":
        raise InvariantError(f"configuration LP solver returned {res.status}")
    entries = {}
    for k in np.nonzero(res.x > Y_EPS)[0]:
        entries[(int(agents[k]), from_mask(int(masks[k])))] = float(res.x[k])
    entries = _sorted_entries(entries, inst.m)
    sol = FractionalSolution(entries, lp_objective(inst, entries), method="exact",
                             alpha=res.duals[: inst.m].copy(), beta=res.duals[inst.m:].copy(),
                             rounds=res.iterations, certified=True)
    check_solution(inst, sol)
    return sol


def _greedy_column(inst: Instance, i: int, oracle: MaskOracle, alpha, beta, jstar: int):
    """Density greedy from ``{j*}`` over items no more valuable than ``j*``; best prefix."""
    v = inst.valuation(i)
    w = inst.agents[i].weight
    single = v.singletons
    mask = 1 << jstar
    val = oracle(mask)
    cost = alpha[jstar]
    best = (w * math.log(val) - cost - beta[i], mask)
    pool = [j for j in range(inst.m) if j != jstar and single[j] <= single[jstar]]
    while pool:
        scored = []
        for j in pool:
            gain = oracle(mask | (1 << j)) - val
            scored.append((gain / alpha[j] if alpha[j] > 0 else math.inf, -j, gain))
        ratio, negj, gain = max(scored)
        j = -negj
        pool.remove(j)
        if gain <= 0:
            continue
        mask |= 1 << j
        val += gain
        cost += alpha[j]
        red = w * math.log(val) - cost - beta[i]
        if red > best[0]:
            best = (red, mask)
    return best


def _repair_slack(inst: Instance, entries: dict) -> dict:
    """Give every partially unassigned item to configurations that lack it.

    Moving weight from ``S`` to ``S + j`` keeps the agent constraint, fills the
    item constraint of ``j`` and cannot lower the objective (monotone values).
    """
    entries = dict(entries)
    for j in range(inst.m):
        load = sum(y for (i, S), y in entries.items() if j in S)
        missing = 1.0 - load
        if missing <= Y_EPS:
            continue
        for key in list(entries):
            if missing <= Y_EPS:
                break
            i, S = key
            y = entries.get(key, 0.0)
            if j in S or y <= 0:
                continue
            move = min(y, missing)
            entries[key] = y - move
            if entries[key] <= Y_EPS:
                del entries[key]
            grown = (i, S | {j})
            entries[grown] = entries.get(grown, 0.0) + move
            missing -= move
        if missing > 1e-9:
            raise InvariantError(f"could not assign item {j}: {missing:.3g} left over")
    return _sorted_entries(entries, inst.m)


def solve_colgen(inst: Instance, eps: float = 0.05, max_rounds: int = 500) -> FractionalSolution:
    """Column generation on the configuration LP.

    The restricted master uses ``<=`` item rows (their duals are the item
    prices, hence non-negative). Cheap greedy pricing runs first; the
    guarantee-bearing :func:`pricing_oracle` runs whenever greedy finds
    nothing, and its certificate ends the loop. Leftover item slack is pushed
    into existing configurations at the end so the returned solution satisfies
    both equality families.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    if inst.m < inst.n:
        raise InfeasibleError("fewer items than agents: some agent must get nothing")
    oracles = [MaskOracle(inst.valuation(i)) for i in range(inst.n)]
    full = (1 << inst.m) - 1
    cols: list[tuple[int, int]] = []
    present = set()

    def add(i, mask):
        if (i, mask) not in present and oracles[i](mask) > 0:
            present.add((i, mask))
            cols.append((i, mask))

    for i in range(inst.n):
        single = inst.valuation(i).singletons
        if not np.any(single > 0):
            raise InfeasibleError(f"agent {inst.agents[i].id!r} values every set at 0")
        for j in range(inst.m):
            if single[j] > 0:
                add(i, 1 << j)
        add(i, full)

    w = inst.weights
    rounds = 0
    warning = ""
    certified = False
    while True:
        rounds += 1
        agents = np.array([c[0] for c in cols])
        masks = np.array([c[1] for c in cols], dtype=np.int64)
        values = np.array([oracles[i](s) for i, s in cols])
        A = np.hstack([_constraint_matrix(inst, agents, masks),
                       np.vstack([np.eye(inst.m), np.zeros((inst.n, inst.m))])])
        c = np.concatenate([w[agents] * np.log(values), np.zeros(inst.m)])
        res = solve_lp(c, A, np.ones(inst.m + inst.n))
        if res.status == "infeasible":
            raise InfeasibleError("configuration LP is infeasible")
        if res.status != "optimal":
            raise InvariantError(f"restricted master returned {res.status}")
        alpha = np.maximum(res.duals[: inst.m], 0.0)
        beta = res.duals[inst.m:]
        if rounds > max_rounds:
            warning = f"round limit {max_rounds} reached; returning best restricted solution"
            log.warning(warning)
            break

        found = []
        for i in range(inst.n):
            single = inst.valuation(i).singletons
            best = None
            for jstar in range(inst.m):
                if single[jstar] <= 0:
                    continue
                red, mask = _greedy_column(inst, i, oracles[i], alpha, beta, jstar)
                if red > 1e-9 and (i, mask) not in present and (best is None or red > best[0]):
                    best = (red, mask)
            if best is not None:
                found.append((i, best[1]))
        if not found:
            priced = pricing_oracle(inst, DualPrices(alpha, beta), eps, skip=frozenset(present))
            if priced.certified:
                certified = True
                break
            col = priced.column
            found.append((col.agent, to_mask(col.items, inst.m)))
        for i, mask in found:
            add(i, mask)

    entries = {}
    for k in np.nonzero(res.x[: len(cols)] > Y_EPS)[0]:
        i, s = cols[k]
        entries[(i, from_mask(s))] = float(res.x[k])
    entries = _repair_slack(inst, entries)
    sol = FractionalSolution(entries, lp_objective(inst, entries), method="colgen",
                             alpha=alpha, beta=beta, rounds=rounds, warning=warning,
                             certified=certified,
                             extra={"master_objective": res.objective,
                                    "columns": len(cols),
                                    "certificate_slack": certificate_slack(eps)})
    check_solution(inst, sol)
    return sol


def approximation_constant(eps: float = 0.0) -> float:
    """``(e/(e-1) + eps) * 2 * exp(3 + 26/e^3)``."""
    if eps < 0:
        raise InputError("eps must be non-negative")
    return (math.e / (math.e - 1.0) + eps) * 2.0 * math.exp(3.0 + 26.0 / math.e ** 3)
