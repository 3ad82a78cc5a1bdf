"""Exhaustive ground truth: NSW evaluation, optimal NSW, exact rounding distributions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InputError
from .instance import Instance
from .rounding import AssignmentGraph, Allocation, apply_move, find_structure, step_sizes, _snap
from .valuations import MAX_TABLE_GROUND

BRUTE_FORCE_LIMIT = 10**7
EXACT_DIST_MAX_FRACTIONAL = 10
CHUNK = 1 << 17
TIE_RTOL = 1e-12


def _bundles(inst: Instance, alloc) -> list[frozenset]:
    if isinstance(alloc, Allocation):
        bundles = list(alloc.bundles)
    else:
        bundles = [frozenset(b) for b in alloc]
    if len(bundles) != inst.n:
        raise InputError(f"allocation has {len(bundles)} shares for {inst.n} agents")
    seen: set = set()
    for b in bundles:
        if seen & b:
            raise InputError("allocation shares overlap")
        seen |= b
    if seen != set(range(inst.m)):
        raise InputError("allocation does not cover every item exactly once")
    return bundles


def nsw(inst: Instance, alloc) -> float:
    """Weighted geometric mean of the agents' values; 0 if any agent gets value 0."""
    total = 0.0
    for i, b in enumerate(_bundles(inst, alloc)):
        val = inst.valuation(i).value(b)
        if val <= 0:
            return 0.0
        total += inst.agents[i].weight * math.log(val)
    return math.exp(total)


def log_nsw_masks(inst: Instance, masks: np.ndarray, tables=None) -> np.ndarray:
    """``sum_i w_i ln v_i(mask_i)`` row-wise for an ``(k, n)`` array of bundle bitmasks."""
    masks = np.atleast_2d(masks)
    out = np.zeros(len(masks))
    with np.errstate(divide="ignore"):
        for i in range(inst.n):
            if tables is not None:
                vals = tables[i][masks[:, i]]
            else:
                v = inst.valuation(i)
                vals = np.array([v.value_mask(int(s)) for s in masks[:, i]])
            out += inst.agents[i].weight * np.log(vals)
    return out


def agent_tables(inst: Instance):
    if inst.m > MAX_TABLE_GROUND:
        return None
    return [inst.valuation(i).table() for i in range(inst.n)]


@dataclass
class OptReport:
    value: float
    log_value: float
    allocation: tuple
    ties: int
    assignments: int

    def to_dict(self, inst: Instance) -> dict:
        return {
            "opt": self.value,
            "log_opt": self.log_value if math.isfinite(self.log_value) else None,
            "ties": self.ties,
            "assignments": self.assignments,
            "allocation": {inst.agents[i].id: [inst.item_ids[j] for j in sorted(b)]
                           for i, b in enumerate(self.allocation)},
        }


def brute_force_opt(inst: Instance) -> OptReport:
    """Maximum NSW over all ``n^m`` assignments of items to agents.

    The reported allocation is the first optimum in enumeration order, where
    the assignment code has item ``j`` as base-``n`` digit ``j``.
    """
    n, m = inst.n, inst.m
    total = n ** m
    if total > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"brute force needs n^m <= {BRUTE_FORCE_LIMIT}, got {total}")
    tables = agent_tables(inst)
    best, best_code, ties = -math.inf, 0, 0
    shifts = np.left_shift(1, np.arange(m, dtype=np.int64))
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        digits = np.empty((len(codes), m), dtype=np.int64)
        rest = codes.copy()
        for j in range(m):
            digits[:, j] = rest % n
            rest //= n
        masks = np.stack([(digits == i).astype(np.int64) @ shifts for i in range(n)], axis=1)
        score = log_nsw_masks(inst, masks, tables)
        top = float(score.max())
        if top == -math.inf:
            if best == -math.inf:
                ties += len(codes)
            continue
        tol = TIE_RTOL * max(1.0, abs(top))
        if top > best + tol:
            best, best_code = top, int(codes[np.argmax(score)])
            ties = int(np.sum(score >= best - tol))
        elif top >= best - tol:
            ties += int(np.sum(score >= best - tol))
    code, bundles = best_code, [set() for _ in range(n)]
    for j in range(m):
        bundles[code % n].add(j)
        code //= n
    value = math.exp(best) if best > -math.inf else 0.0
    return OptReport(value, best, tuple(frozenset(b) for b in bundles), ties, total)


def exact_rounding_distribution(g: AssignmentGraph, max_fractional: int = EXACT_DIST_MAX_FRACTIONAL) -> dict:
    """Every outcome of the rounding (as a 0/1 edge tuple) with its exact probability.

    Both coin branches of each iteration are expanded; since the structure
    search is deterministic the branch tree is well defined.
    """
    x0 = g.x.copy()
    _snap(x0)
    k = int(g.fractional(x0).sum())
    if k > max_fractional:
        raise CapacityError(f"{k} fractional edges exceeds the limit of {max_fractional}")
    out: dict = {}
    stack = [(x0, 1.0)]
    expansions = 0
    while stack:
        x, p = stack.pop()
        if not g.fractional(x).any():
            key = tuple(int(v > 0.5) for v in x)
            out[key] = out.get(key, 0.0) + p
            continue
        expansions += 1
        if expansions > 1 << 16:
            raise CapacityError("rounding branch tree too large")
        s = find_structure(g, x)
        d1, d2 = step_sizes(x, s)
        p_down = d2 / (d1 + d2)
        stack.append((apply_move(x, s, False, d1, d2), p * (1.0 - p_down)))
        stack.append((apply_move(x, s, True, d1, d2), p * p_down))
    return dict(sorted(out.items()))


def distribution_marginals(dist: dict) -> np.ndarray:
    keys = np.array(list(dist.keys()), dtype=float)
    probs = np.array(list(dist.values()))
    return probs @ keys

