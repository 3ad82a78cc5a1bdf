"""Randomized pipage rounding with expectation-preserving coin flips.

Each step moves one coordinate (``Operation1``) or trades mass between two
coordinates (``Operation2``). The step lowers the first coordinate by ``d1``
with probability ``d2 / (d1 + d2)`` and raises it by ``d2`` otherwise, so the
conditional expectation of every coordinate is unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import CapacityError, InputError, InvariantError
from .extensions import as_point, multilinear_exact, multilinear_mc, subset_probabilities
from .valuations import MAX_TABLE_GROUND, TOL, Valuation

SNAP = 1e-12
ESTIMATOR_MAX_GROUND = 12


@dataclass(frozen=True)
class Operation1:
    a: int
    d1: float
    d2: float


@dataclass(frozen=True)
class Operation2:
    a: int
    b: int
    d1: float
    d2: float


Move = Union[Operation1, Operation2]


@dataclass
class PipageState:
    x: np.ndarray
    steps: int
    rng: np.random.Generator

    @classmethod
    def start(cls, x0, seed=None, rng=None) -> "PipageState":
        x = as_point(x0).copy()
        return cls(x, 0, rng if rng is not None else np.random.default_rng(seed))

    def is_integral(self) -> bool:
        return bool(np.all((self.x <= SNAP) | (self.x >= 1.0 - SNAP)))


def _snap(x: np.ndarray) -> None:
    x[x <= SNAP] = 0.0
    x[x >= 1.0 - SNAP] = 1.0


def _validate(x: np.ndarray, move: Move) -> None:
    slack = 1e-12
    if not (move.d1 > 0 and move.d2 > 0):
        raise InputError(f"step sizes must be positive, got {move}")
    if isinstance(move, Operation1):
        xa = x[move.a]
        if move.d1 > xa + slack or move.d2 > 1.0 - xa + slack:
            raise InputError(f"Operation1 bounds violated at x_a={xa}: {move}")
    else:
        if move.a == move.b:
            raise InputError("Operation2 needs two distinct coordinates")
        xa, xb = x[move.a], x[move.b]
        if move.d1 > min(xa, 1.0 - xb) + slack or move.d2 > min(1.0 - xa, xb) + slack:
            raise InputError(f"Operation2 bounds violated at x_a={xa}, x_b={xb}: {move}")


def pipage_step(state: PipageState, move: Move) -> PipageState:
    _validate(state.x, move)
    x = state.x.copy()
    down = state.rng.random() < move.d2 / (move.d1 + move.d2)
    if isinstance(move, Operation1):
        x[move.a] += -move.d1 if down else move.d2
    elif down:
        x[move.a] -= move.d1
        x[move.b] += move.d1
    else:
        x[move.a] += move.d2
        x[move.b] -= move.d2
    _snap(x)
    return replace(state, x=x, steps=state.steps + 1)


def default_chooser(x: np.ndarray) -> Optional[Move]:
    """Pair the first two fractional coordinates with maximal step sizes.

    Either outcome of the resulting move makes at least one coordinate
    integral, so a run takes at most ``len(x)`` steps.
    """
    frac = np.nonzero((x > SNAP) & (x < 1.0 - SNAP))[0]
    if len(frac) == 0:
        return None
    a = int(frac[0])
    if len(frac) == 1:
        return Operation1(a, float(x[a]), float(1.0 - x[a]))
    b = int(frac[1])
    return Operation2(a, b, float(min(x[a], 1.0 - x[b])), float(min(1.0 - x[a], x[b])))


def pipage_round(x0, chooser: Callable[[np.ndarray], Optional[Move]] = default_chooser,
                 seed=None, rng=None) -> PipageState:
    """Round ``x0`` to a 0/1 vector; the returned state carries ``x`` and the step count."""
    state = PipageState.start(x0, seed=seed, rng=rng)
    _snap(state.x)
    limit = 10 * max(1, len(state.x))
    while not state.is_integral():
        if state.steps >= limit:
            raise InvariantError(f"pipage rounding did not terminate within {limit} steps")
        move = chooser(state.x)
        if move is None:
            raise InvariantError("chooser returned no move on a fractional point")
        state = pipage_step(state, move)
    return state


def pipage_round_batch(x0, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Run ``trials`` independent roundings with :func:`default_chooser`, vectorized.

    Returns a boolean array of shape ``(trials, len(x0))``.
    """
    x0 = as_point(x0)
    if len(x0) == 0:
        return np.zeros((trials, 0), dtype=bool)
    X = np.tile(x0, (trials, 1))
    _snap(X)
    rows = np.arange(trials)
    for _ in range(len(x0) + 1):
        frac = (X > SNAP) & (X < 1.0 - SNAP)
        count = frac.sum(axis=1)
        active = count > 0
        if not active.any():
            break
        a = np.argmax(frac, axis=1)
        rest = frac.copy()
        rest[rows, a] = False
        b = np.argmax(rest, axis=1)
        coin = rng.random(trials)
        xa = X[rows, a]
        xb = X[rows, b]

        pair = count >= 2
        d1 = np.where(pair, np.minimum(xa, 1.0 - xb), xa)
        d2 = np.where(pair, np.minimum(1.0 - xa, xb), 1.0 - xa)
        with np.errstate(invalid="ignore", divide="ignore"):
            down = coin < d2 / (d1 + d2)
        shift = np.where(down, -d1, d2)
        shift[~active] = 0.0
        X[rows, a] = xa + shift
        pb = pair & active
        X[rows[pb], b[pb]] = xb[pb] - shift[pb]
        _snap(X)
    else:
        raise InvariantError("batched pipage rounding did not terminate")
    return X > 0.5


def pessimistic_estimator(v: Valuation, x, t: float, theta: float) -> float:
    """``exp(-theta t) E_{V ~ D(x)}[exp(theta v(V))]`` by exact enumeration."""
    if not theta < 0:
        raise InputError("theta must be negative")
    if v.m > ESTIMATOR_MAX_GROUND:
        raise CapacityError(f"exact estimator limited to {ESTIMATOR_MAX_GROUND} items")
    x = as_point(x, v.m)
    return float(math.exp(-theta * t) * (subset_probabilities(x) @ np.exp(theta * v.table())))


def move_outcomes(x: np.ndarray, move: Move) -> list[tuple[float, np.ndarray]]:
    """Both outcomes of a move with their probabilities."""
    p_down = move.d2 / (move.d1 + move.d2)
    down, up = x.copy(), x.copy()
    if isinstance(move, Operation1):
        down[move.a] -= move.d1
        up[move.a] += move.d2
    else:
        down[move.a] -= move.d1
        down[move.b] += move.d1
        up[move.a] += move.d2
        up[move.b] -= move.d2
    for y in (down, up):
        np.clip(y, 0.0, 1.0, out=y)
    return [(p_down, down), (1.0 - p_down, up)]


def estimator_after_move(v: Valuation, x, move: Move, t: float, theta: float) -> float:
    """Exact expectation of the estimator after one move."""
    x = as_point(x, v.m)
    _validate(x, move)
    return sum(p * pessimistic_estimator(v, y, t, theta) for p, y in move_outcomes(x, move))


@dataclass
class ConcentrationReport:
    mu: float
    mu_stderr: float
    delta: float
    threshold: float
    trials: int
    empirical: float
    bound: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def concentration_experiment(v: Valuation, x0, delta: float, trials: int, seed) -> ConcentrationReport:
    """Empirical lower tail ``Pr[v(U) <= (1 - delta) mu]`` against ``exp(-delta^2 mu / 2)``.

    ``mu`` is the multilinear extension at ``x0``; ``U`` is the output of
    :func:`pipage_round_batch`. The verdict allows three binomial standard
    deviations of the bound above it.
    """
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    if trials < 10_000:
        raise InputError("concentration experiment needs at least 10^4 trials")
    if v.m and float(np.max(v.singletons)) > 1.0 + TOL:
        raise InputError("marginal values must be at most 1")
    x0 = as_point(x0, v.m)
    if v.m <= MAX_TABLE_GROUND:
        mu, mu_se = multilinear_exact(v, x0), 0.0
    else:
        mu, mu_se = multilinear_mc(v, x0, 100_000, seed)
    rng = np.random.default_rng(seed)
    U = pipage_round_batch(x0, trials, rng)
    if v.m <= MAX_TABLE_GROUND:
        masks = U.astype(np.int64) @ (1 << np.arange(v.m, dtype=np.int64))
        vals = v.table()[masks]
    else:
        vals = np.array([v.value(np.nonzero(row)[0]) for row in U])
    threshold = (1.0 - delta) * mu
    empirical = float(np.mean(vals <= threshold + TOL * max(1.0, mu)))
    bound = math.exp(-delta * delta * mu / 2.0)
    slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
    return ConcentrationReport(mu, mu_se, delta, threshold, trials, empirical, bound,
                               slack, empirical <= bound + slack)
