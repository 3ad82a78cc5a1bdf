"""Dense revised simplex for ``max c.x  s.t.  A x = b, x >= 0``.

Two phases with artificial variables, Bland's rule for both the entering and
the leaving variable (no cycling), and an explicitly maintained basis inverse
that is refactored periodically. Sized for a few dozen rows and tens of
thousands of columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvariantError

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    duals: np.ndarray  # one per original row; 0 for rows dropped as redundant
    basis: np.ndarray  # column indices of the final basis (original columns only)
    iterations: int


class _Tableau:
    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = np.array(basis, dtype=int)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise InvariantError(f"singular basis (cond={np.linalg.cond(B):.3g})") from exc
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < PIVOT_TOL] = 0.0

    def pivot(self, r, col, u):
        Binv = self.Binv
        Binv[r] /= u[r]
        self.xB[r] /= u[r]
        for i in range(len(u)):
            if i != r and u[i] != 0.0:
                Binv[i] -= u[i] * Binv[r]
                self.xB[i] -= u[i] * self.xB[r]
        self.basis[r] = col


def _iterate(tab: _Tableau, c: np.ndarray, allowed: np.ndarray, max_iter: int, tol: float):
    """Run primal simplex iterations to optimality. Returns (status, iterations)."""
    it = 0
    while True:
        if it >= max_iter:
            raise InvariantError(f"simplex iteration limit {max_iter} reached")
        if it and it % REFACTOR_EVERY == 0:
            tab.refactor()
        pi = c[tab.basis] @ tab.Binv
        d = c - pi @ tab.A
        d[tab.basis] = 0.0
        cand = np.nonzero((d > tol) & allowed)[0]
        if len(cand) == 0:
            return "optimal", it
        col = int(cand[0])
        u = tab.Binv @ tab.A[:, col]
        rows = np.nonzero(u > PIVOT_TOL)[0]
        if len(rows) == 0:
            return "unbounded", it
        ratios = np.maximum(tab.xB[rows], 0.0) / u[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, best)]
        r = int(ties[np.argmin(tab.basis[ties])])
        tab.pivot(r, col, u)
        tab.xB[np.abs(tab.xB) < PIVOT_TOL] = 0.0
        it += 1


def solve_lp(c, A, b, *, tol: float = PIVOT_TOL, max_iter: int = 50_000) -> LPResult:
    """Maximize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float).reshape(-1)
    c = np.array(c, dtype=float).reshape(-1)
    k, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    # phase 1: artificial identity block appended after the original columns
    A1 = np.hstack([A, np.eye(k)])
    c1 = np.concatenate([np.zeros(n), -np.ones(k)])
    tab = _Tableau(A1, b, list(range(n, n + k)))
    allowed = np.ones(n + k, dtype=bool)
    status, it1 = _iterate(tab, c1, allowed, max_iter, tol)
    infeas = float(np.sum(tab.xB[tab.basis >= n]))
    if infeas > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LPResult("infeasible", np.zeros(n), float("nan"),
                        np.full(k, np.nan), np.array([], dtype=int), it1)

    # drive zero-level artificials out of the basis; rows where that is
    # impossible are redundant and get dropped
    keep = np.ones(k, dtype=bool)
    for r in range(k):
        if tab.basis[r] < n:
            continue
        row = tab.Binv[r] @ A
        row[tab.basis[tab.basis < n]] = 0.0
        nz = np.nonzero(np.abs(row) > 1e-7)[0]
        if len(nz):
            col = int(nz[0])
            tab.pivot(r, col, tab.Binv @ A1[:, col])
        else:
            keep[r] = False
    rows = np.nonzero(keep)[0]
    basis = tab.basis[keep]

    tab2 = _Tableau(A[rows], b[rows], basis)
    allowed = np.ones(n, dtype=bool)
    status, it2 = _iterate(tab2, c, allowed, max_iter, tol)
    x = np.zeros(n)
    x[tab2.basis] = np.maximum(tab2.xB, 0.0)
    duals = np.zeros(k)
    duals[rows] = c[tab2.basis] @ tab2.Binv
    duals = duals * sign
    if status == "unbounded":
        return LPResult("unbounded", x, float("inf"), duals, tab2.basis.copy(), it1 + it2)
    return LPResult("optimal", x, float(c @ x), duals, tab2.basis.copy(), it1 + it2)
