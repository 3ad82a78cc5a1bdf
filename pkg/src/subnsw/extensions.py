"""Multilinear and concave extensions of a set function."""
from __future__ import annotations

import math

import numpy as np

from .conflp.simplex import solve_lp
from .errors import CapacityError, InputError, InvariantError
from .valuations import MAX_TABLE_GROUND, TOL, Valuation, Verdict

CONCAVE_MAX_GROUND = 12


def as_point(x, m: int | None = None) -> np.ndarray:
    """Validate a fractional point: a vector with every coordinate in [0, 1]."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if m is not None and len(x) != m:
        raise InputError(f"point has {len(x)} coordinates, ground set has {m}")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise InputError("fractional point coordinates must lie in [0, 1]")
    return x


def subset_probabilities(x: np.ndarray) -> np.ndarray:
    """Product-distribution probability of every bitmask, ``Pr[V = S]``."""
    p = np.ones(1)
    for xj in x:
        p = np.concatenate([p * (1.0 - xj), p * xj])
    return p


def multilinear_exact(v: Valuation, x) -> float:
    """``F(x) = sum_S v(S) prod_{j in S} x_j prod_{j not in S} (1 - x_j)``."""
    if v.m > MAX_TABLE_GROUND:
        raise CapacityError(f"exact multilinear extension needs m <= {MAX_TABLE_GROUND}")
    x = as_point(x, v.m)
    return float(subset_probabilities(x) @ v.table())


def sample_sets(x: np.ndarray, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw bitmasks from the product distribution with marginals ``x``."""
    draws = rng.random((samples, len(x))) < x
    weights = (1 << np.arange(len(x), dtype=np.int64))
    return draws.astype(np.int64) @ weights


def multilinear_mc(v: Valuation, x, samples: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of ``F(x)`` and its standard error."""
    if samples < 1:
        raise InputError("samples must be >= 1")
    x = as_point(x, v.m)
    rng = np.random.default_rng(seed)
    if v.m <= 16:
        table = v.table()
        vals = table[sample_sets(x, samples, rng)]
    else:
        draws = rng.random((samples, len(x))) < x
        vals = np.array([v.value(np.nonzero(row)[0]) for row in draws])
    if samples == 1:
        return float(vals[0]), 0.0
    se = float(np.std(vals, ddof=1) / math.sqrt(samples))
    return float(np.mean(vals)), se


def concave_extension(v: Valuation, x) -> float:
    """``f+(x)``: best distribution over sets with marginals exactly ``x``.

    LP over one variable per subset plus a slack for ``sum alpha <= 1``.
    """
    if v.m > CONCAVE_MAX_GROUND:
        raise CapacityError(f"concave extension LP needs m <= {CONCAVE_MAX_GROUND}")
    x = as_point(x, v.m)
    m = v.m
    n_sets = 1 << m
    masks = np.arange(n_sets)
    A = np.zeros((m + 1, n_sets + 1))
    A[0, :] = 1.0
    for j in range(m):
        A[j + 1, :n_sets] = (masks >> j) & 1
    b = np.concatenate([[1.0], x])
    c = np.concatenate([v.table(), [0.0]])
    res = solve_lp(c, A, b)
    if res.status != "optimal":
        raise InvariantError(f"concave extension LP returned {res.status}")
    return res.objective


def check_sandwich(v: Valuation, x, tol: float = TOL) -> tuple[Verdict, float, float]:
    """Check ``f+(x) >= F(x) >= (1 - 1/e) f+(x)``; returns (verdict, f+, F)."""
    fplus = concave_extension(v, x)
    F = multilinear_exact(v, x)
    scale = max(1.0, fplus)
    if fplus < F - tol * scale:
        return Verdict(False, f"concave {fplus} < multilinear {F}"), fplus, F
    if F < (1.0 - 1.0 / math.e) * fplus - tol * scale:
        return Verdict(False, f"multilinear {F} < (1-1/e) * concave {fplus}"), fplus, F
    return Verdict(True), fplus, F
