"""Seeded random instance families."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ..errors import InputError
from ..instance import Agent, Instance
from ..valuations import Additive, BudgetedAdditive, Coverage, Valuation

FAMILIES = ("additive-uniform", "coverage-random", "budgeted-additive-random")
MAX_ATTEMPTS = 1000


def random_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unequal weights: uniform positives rescaled to sum to one."""
    u = rng.uniform(0.5, 1.5, size=n)
    w = u / u.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return w


def random_additive(m: int, rng: np.random.Generator) -> Additive:
    return Additive(np.round(rng.uniform(0.05, 1.0, size=m), 4))


def random_budgeted(m: int, rng: np.random.Generator) -> BudgetedAdditive:
    vals = np.round(rng.uniform(0.05, 1.0, size=m), 4)
    return BudgetedAdditive(vals, round(float(rng.uniform(0.3, 0.7) * vals.sum()), 4))


def random_coverage(m: int, rng: np.random.Generator, universe: int | None = None,
                    density: float = 0.3, max_single: float | None = None) -> Coverage:
    """Items cover random subsets of a weighted universe.

    With ``max_single`` the universe weights are scaled down so that no single
    item is worth more than that.
    """
    universe = universe or 2 * m
    weights = np.round(rng.uniform(0.5, 1.5, size=universe), 4)
    covers = [tuple(np.flatnonzero(rng.random(universe) < density)) for _ in range(m)]
    if max_single is not None:
        top = max((weights[list(c)].sum() for c in covers), default=0.0)
        if top > max_single:
            weights = weights * (max_single / top)
    return Coverage(tuple(covers), weights)


def _draw(family: str, m: int, rng: np.random.Generator) -> Valuation:
    if family == "additive-uniform":
        return random_additive(m, rng)
    if family == "coverage-random":
        return random_coverage(m, rng)
    if family == "budgeted-additive-random":
        return random_budgeted(m, rng)
    raise InputError(f"unknown family {family!r} (expected one of {', '.join(FAMILIES)})")


def has_saturating_matching(vals: list[Valuation]) -> bool:
    """Every agent can get a distinct item it values positively (LP feasibility)."""
    n, m = len(vals), vals[0].m
    pos = np.array([v.singletons > 0 for v in vals])
    if n > m or not pos.any(axis=1).all():
        return False
    match = maximum_bipartite_matching(csr_matrix(pos.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def generate_instance(family: str, n: int, m: int, seed: int) -> Instance:
    """Reproducible instance; valuations are redrawn until every agent can be matched."""
    if n < 1 or m < 1:
        raise InputError("n and m must be positive")
    if m < n:
        raise InputError(f"need m >= n (got n={n}, m={m}); otherwise the optimum is 0")
    rng = np.random.default_rng(seed)
    weights = random_weights(n, rng)
    for _ in range(MAX_ATTEMPTS):
        vals = [_draw(family, m, rng) for _ in range(n)]
        if has_saturating_matching(vals):
            break
    else:
        raise InputError(f"could not draw a feasible {family} instance")
    agents = tuple(Agent(f"a{i + 1}", float(weights[i]), vals[i]) for i in range(n))
    items = tuple(f"j{j + 1}" for j in range(m))
    return Instance(items, agents, name=f"{family}-n{n}-m{m}-s{seed}",
                    metadata={"family": family, "seed": seed})


def acceptance_batch(count: int = 50, seed: int = 2024) -> list[Instance]:
    """Mixed batch: n in {2, 3}, m in 4..8, the three families in rotation."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        family = FAMILIES[k % len(FAMILIES)]
        n = int(rng.integers(2, 4))
        m = int(rng.integers(4, 9))
        out.append(generate_instance(family, n, m, seed=int(rng.integers(0, 2**31 - 1))))
    return out
