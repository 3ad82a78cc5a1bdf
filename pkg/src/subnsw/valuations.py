"""Value oracles for monotone submodular valuations.

Item sets are handled in two encodings: public functions accept any iterable of
integer item ids, internal hot paths use integer bitmasks (bit ``j`` set means
item ``j`` is in the set).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CapacityError, InputError

TOL = 1e-9
MAX_TABLE_GROUND = 20


def to_mask(items: Iterable[int], m: int) -> int:
    mask = 0
    for j in items:
        j = int(j)
        if j < 0 or j >= m:
            raise InputError(f"unknown item id {j} (ground set has {m} items)")
        mask |= 1 << j
    return mask


def from_mask(mask: int) -> frozenset:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return frozenset(out)


def mask_items(mask: int) -> list[int]:
    return sorted(from_mask(mask))


def _subset_sums(vals: np.ndarray) -> np.ndarray:
    table = np.zeros(1)
    for v in vals:
        table = np.concatenate([table, table + v])
    return table


def _check_params(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what}: parameters must be finite")
    if np.any(arr < 0):
        raise InputError(f"{what}: parameters must be non-negative")


class Valuation:
    """Base class: a set function over items ``0..m-1``.

    Subclasses implement :meth:`value_mask`; everything else is derived.
    """

    kind = "abstract"
    m: int

    def value_mask(self, mask: int) -> float:
        raise NotImplementedError

    def value(self, items: Iterable[int]) -> float:
        return self.value_mask(to_mask(items, self.m))

    def marginal(self, items: Iterable[int], j: int) -> float:
        return marginal(self, items, j)

    @cached_property
    def singletons(self) -> np.ndarray:
        return np.array([self.value_mask(1 << j) for j in range(self.m)], dtype=float)

    def table(self) -> np.ndarray:
        """All ``2**m`` values indexed by bitmask."""
        if self.m > MAX_TABLE_GROUND:
            raise CapacityError(f"value table needs m <= {MAX_TABLE_GROUND}, got {self.m}")
        return np.array([self.value_mask(s) for s in range(1 << self.m)], dtype=float)

    def to_dict(self, item_ids: Sequence[str]) -> dict:
        """Serialize as an explicit table (fallback for derived valuations)."""
        t = self.table()
        out = {}
        for s in range(1 << self.m):
            out[",".join(item_ids[j] for j in mask_items(s))] = float(t[s])
        return {"type": "table", "table": out}


@dataclass(frozen=True, eq=False)
class Additive(Valuation):
    values: np.ndarray
    kind = "additive"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        _check_params(vals, "additive")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.values)

    def value_mask(self, mask: int) -> float:
        total = 0.0
        j = 0
        while mask:
            if mask & 1:
                total += self.values[j]
            mask >>= 1
            j += 1
        return float(total)

    def table(self) -> np.ndarray:
        if self.m > MAX_TABLE_GROUND:
            raise CapacityError(f"value table needs m <= {MAX_TABLE_GROUND}, got {self.m}")
        return _subset_sums(self.values)

    def to_dict(self, item_ids):
        return {"type": "additive",
                "values": {item_ids[j]: float(v) for j, v in enumerate(self.values)}}


@dataclass(frozen=True, eq=False)
class BudgetedAdditive(Valuation):
    """``v(S) = min(budget, sum of values in S)``."""

    values: np.ndarray
    budget: float
    kind = "budgeted-additive"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        _check_params(vals, "budgeted-additive")
        _check_params(np.array([self.budget], dtype=float), "budgeted-additive budget")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def m(self) -> int:
        return len(self.values)

    def value_mask(self, mask: int) -> float:
        total = 0.0
        j = 0
        while mask:
            if mask & 1:
                total += self.values[j]
            mask >>= 1
            j += 1
        return float(min(self.budget, total))

    def table(self) -> np.ndarray:
        if self.m > MAX_TABLE_GROUND:
            raise CapacityError(f"value table needs m <= {MAX_TABLE_GROUND}, got {self.m}")
        return np.minimum(self.budget, _subset_sums(self.values))

    def to_dict(self, item_ids):
        return {"type": "budgeted_additive", "budget": self.budget,
                "values": {item_ids[j]: float(v) for j, v in enumerate(self.values)}}


@dataclass(frozen=True, eq=False)
class Coverage(Valuation):
    """Weighted coverage: each item covers a subset of a weighted universe."""

    covers: tuple
    weights: np.ndarray
    universe_ids: Optional[tuple] = None
    kind = "coverage"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        _check_params(w, "coverage weights")
        covers = tuple(frozenset(int(u) for u in c) for c in self.covers)
        for c in covers:
            if any(u < 0 or u >= len(w) for u in c):
                raise InputError("coverage: cover references unknown universe element")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "covers", covers)

    @property
    def m(self) -> int:
        return len(self.covers)

    @cached_property
    def _cover_bits(self) -> list[int]:
        return [sum(1 << u for u in c) for c in self.covers]

    def value_mask(self, mask: int) -> float:
        union = 0
        j = 0
        bits = self._cover_bits
        while mask:
            if mask & 1:
                union |= bits[j]
            mask >>= 1
            j += 1
        total = 0.0
        u = 0
        while union:
            if union & 1:
                total += self.weights[u]
            union >>= 1
            u += 1
        return float(total)

    def table(self) -> np.ndarray:
        if self.m > MAX_TABLE_GROUND:
            raise CapacityError(f"value table needs m <= {MAX_TABLE_GROUND}, got {self.m}")
        nu = len(self.weights)
        covered = np.zeros((1, nu), dtype=bool)
        for c in self.covers:
            row = np.zeros(nu, dtype=bool)
            row[list(c)] = True
            covered = np.concatenate([covered, covered | row])
        return covered.astype(float) @ self.weights

    def to_dict(self, item_ids):
        uids = self.universe_ids or tuple(f"u{k}" for k in range(len(self.weights)))
        return {
            "type": "coverage",
            "universe_weights": {uids[k]: float(w) for k, w in enumerate(self.weights)},
            "covers": {item_ids[j]: sorted(uids[u] for u in c)
                       for j, c in enumerate(self.covers)},
        }


@dataclass(frozen=True, eq=False)
class Table(Valuation):
    """Explicit value for every subset of a ground set of at most 20 items.

    Validated for finiteness, non-negativity and (when ``m`` is at most
    ``check_limit``) monotone submodularity at construction. ``v(empty) > 0`` is
    only accepted with ``allow_offset``; see :func:`normalize_empty`.
    """

    values: np.ndarray
    allow_offset: bool = False
    check_limit: int = 12
    kind = "table"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        m = int(round(math.log2(len(vals)))) if len(vals) else -1
        if m < 0 or (1 << m) != len(vals):
            raise InputError("table: need exactly 2**m entries")
        if m > MAX_TABLE_GROUND:
            raise CapacityError(f"table valuations are capped at {MAX_TABLE_GROUND} items")
        _check_params(vals, "table")
        if not self.allow_offset and abs(vals[0]) > TOL:
            raise InputError("table: value of the empty set must be 0")
        object.__setattr__(self, "values", vals)
        if m <= self.check_limit:
            verdict = check_monotone_submodular(self, max_ground=self.check_limit)
            if not verdict.passed:
                raise InputError(f"table: not monotone submodular ({verdict.describe()})")

    @property
    def m(self) -> int:
        return int(round(math.log2(len(self.values))))

    def value_mask(self, mask: int) -> float:
        return float(self.values[mask])

    def table(self) -> np.ndarray:
        return self.values.copy()


@dataclass(frozen=True, eq=False)
class Truncated(Valuation):
    """Single-item values capped at ``cap`` through a shared uniform threshold.

    ``value(S) = E_theta[base({j in S : theta <= cap / base(j)})]`` with
    ``theta ~ U[0, 1]``, evaluated exactly. Item ``j`` survives while
    ``theta <= t_j = min(1, cap / base(j))``, so the surviving set is a chain
    that sheds items in descending order of ``base(j)``; the integral is a sum
    over the breakpoints of that chain.
    """

    base: Valuation
    cap: float
    kind = "truncated"

    def __post_init__(self):
        if not (self.cap > 0) or not math.isfinite(self.cap):
            raise InputError(f"truncation cap must be a positive finite number, got {self.cap}")
        object.__setattr__(self, "cap", float(self.cap))

    @property
    def m(self) -> int:
        return self.base.m

    @cached_property
    def thresholds(self) -> np.ndarray:
        f = self.base.singletons
        with np.errstate(divide="ignore", over="ignore"):
            t = np.where(f > 0, self.cap / np.where(f > 0, f, 1.0), 1.0)
        return np.minimum(1.0, t)

    def value_mask(self, mask: int) -> float:
        items = mask_items(mask)
        if not items:
            return 0.0
        t = self.thresholds
        items.sort(key=lambda j: (t[j], j))
        total = 0.0
        prev = 0.0
        current = mask
        for j in items:
            if t[j] > prev:
                total += (t[j] - prev) * self.base.value_mask(current)
                prev = t[j]
            current &= ~(1 << j)
        return float(total)


@dataclass(frozen=True, eq=False)
class Shifted(Valuation):
    """``v'`` from :func:`normalize_empty`: the offset ``v(empty)`` moves onto a private item.

    The private item is the last index ``base.m``.
    """

    base: Valuation
    kind = "shifted"

    @property
    def m(self) -> int:
        return self.base.m + 1

    @cached_property
    def offset(self) -> float:
        return self.base.value_mask(0)

    def value_mask(self, mask: int) -> float:
        private = 1 << self.base.m
        if mask & private:
            return self.base.value_mask(mask & ~private)
        return self.base.value_mask(mask) - self.offset


@dataclass(frozen=True, eq=False)
class Padded(Valuation):
    """Extends ``base`` to a larger ground set; the extra items are worth nothing."""

    base: Valuation
    ground: int
    kind = "padded"

    @property
    def m(self) -> int:
        return self.ground

    def value_mask(self, mask: int) -> float:
        return self.base.value_mask(mask & ((1 << self.base.m) - 1))

    def to_dict(self, item_ids):
        return self.base.to_dict(item_ids[: self.base.m])


def evaluate(v: Valuation, items: Iterable[int]) -> float:
    return v.value(items)


def marginal(v: Valuation, items: Iterable[int], j: int) -> float:
    """``v(S + j) - v(S)``; ``j`` must not already be in ``S``."""
    mask = to_mask(items, v.m)
    bit = to_mask([j], v.m)
    if mask & bit:
        raise InputError(f"item {j} already in the set")
    return v.value_mask(mask | bit) - v.value_mask(mask)


def truncate(v: Valuation, cap: float) -> Truncated:
    if not cap > 0:
        raise InputError(f"truncation cap must be > 0, got {cap}")
    return Truncated(v, cap)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    reason: str = ""
    witness: tuple = ()

    def describe(self) -> str:
        if self.passed:
            return "pass"
        sets = ", ".join("{" + ",".join(map(str, sorted(s))) + "}" for s in self.witness)
        return f"{self.reason}: {sets}"


def check_monotone_submodular(v: Valuation, max_ground: int = 12) -> Verdict:
    """Exhaustive check in marginal form.

    Monotone: ``v(S + j) >= v(S)`` for all ``S`` and ``j``. Submodular:
    ``v(S + j) + v(S + k) >= v(S + j + k) + v(S)``, which is equivalent to the
    lattice inequality over all pairs. A failing submodularity witness is the
    pair ``(S + j, S + k)``.
    """
    if v.m > max_ground:
        raise CapacityError(f"exhaustive check limited to {max_ground} items, got {v.m}")
    t = v.table() if not isinstance(v, Table) else v.values
    tol = TOL * max(1.0, float(np.max(np.abs(t))) if len(t) else 1.0)
    masks = np.arange(1 << v.m)
    for j in range(v.m):
        bit = 1 << j
        s = masks[(masks & bit) == 0]
        bad = np.nonzero(t[s | bit] < t[s] - tol)[0]
        if len(bad):
            s0 = int(s[bad[0]])
            return Verdict(False, "not monotone", (from_mask(s0), from_mask(s0 | bit)))
    for j in range(v.m):
        for k in range(j + 1, v.m):
            bj, bk = 1 << j, 1 << k
            s = masks[(masks & (bj | bk)) == 0]
            gap = t[s | bj] + t[s | bk] - t[s | bj | bk] - t[s]
            bad = np.nonzero(gap < -tol)[0]
            if len(bad):
                s0 = int(s[bad[0]])
                return Verdict(False, "not submodular", (from_mask(s0 | bj), from_mask(s0 | bk)))
    return Verdict(True)


def normalize_empty(v: Valuation, agent=None) -> tuple[Valuation, Optional[int]]:
    """Move a positive ``v(empty)`` onto a fresh private item.

    Returns ``(v, None)`` when ``v(empty) == 0``; otherwise a valuation over
    ``m + 1`` items whose last item is the private one, together with its index.
    Every other agent must value the private item at 0 (see :class:`Padded`).
    """
    if abs(v.value_mask(0)) <= TOL:
        return v, None
    return Shifted(v), v.m


class MaskOracle:
    """Memoized bitmask evaluation; precomputes the full table for small grounds."""

    def __init__(self, v: Valuation, table_limit: int = 16):
        self.v = v
        self.m = v.m
        self._table = v.table() if v.m <= table_limit else None
        self._cache: dict[int, float] = {}

    def __call__(self, mask: int) -> float:
        if self._table is not None:
            return float(self._table[mask])
        val = self._cache.get(mask)
        if val is None:
            val = self.v.value_mask(mask)
            self._cache[mask] = val
        return val
