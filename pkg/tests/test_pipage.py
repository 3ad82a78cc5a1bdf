import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from subnsw.errors import InputError, InvariantError
from subnsw.pipage import (Operation1, Operation2, PipageState, concentration_experiment,
                           default_chooser, estimator_after_move, pessimistic_estimator, pipage_round,
                           pipage_round_batch, pipage_step)
from subnsw.valuations import Additive, Coverage


def replay(x, move, trials, seed=0):
    rng = np.random.default_rng(seed)
    out = np.empty((trials, len(x)))
    for t in range(trials):
        out[t] = pipage_step(PipageState(np.array(x, dtype=float), 0, rng), move).x
    return out


def test_operation1_full_rounding():
    out = replay([0.3], Operation1(0, 0.3, 0.7), 20_000)
    assert set(np.unique(out)) <= {0.0, 1.0}
    assert abs(out.mean() - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / 20_000)


def test_operation2_symmetric_swap():
    out = replay([0.5, 0.5], Operation2(0, 1, 0.5, 0.5), 20_000)
    assert np.all(out.sum(axis=1) == 1.0)
    assert abs(out[:, 0].mean() - 0.5) <= 3 * math.sqrt(0.25 / 20_000)


def test_operation2_uneven():
    # lower x_a by 0.3 with probability 0.6 / 0.9 = 2/3, else raise it by 0.6
    trials = 100_000
    out = replay([0.4, 0.7], Operation2(0, 1, 0.3, 0.6), trials)
    down = np.isclose(out[:, 0], 0.1)
    assert np.all(down | np.isclose(out[:, 0], 1.0))
    assert abs(down.mean() - 2 / 3) <= 3 * math.sqrt(2 / 9 / trials)
    assert np.allclose(out.mean(axis=0), [0.4, 0.7], atol=3 * 0.45 / math.sqrt(trials))


@pytest.mark.parametrize("move", [Operation1(0, 0.5, 0.1), Operation1(0, 0.0, 0.1),
                                  Operation2(0, 1, 0.5, 0.1), Operation2(0, 0, 0.1, 0.1)])
def test_bounds_rejected(move):
    with pytest.raises(InputError):
        pipage_step(PipageState.start([0.4, 0.7], seed=0), move)


def test_integral_input_unchanged():
    st_ = pipage_round([1.0, 0.0, 1.0], seed=0)
    assert st_.steps == 0 and list(st_.x) == [1, 0, 1]


def test_pair_preserves_sum():
    for seed in range(50):
        out = pipage_round([0.5, 0.5], seed=seed)
        assert out.x.sum() == 1.0 and out.steps == 1


def test_single_coordinate_rate():
    trials = 100_000
    X = pipage_round_batch([0.3], trials, np.random.default_rng(2))
    assert abs(X.mean() - 0.3) <= 3 * math.sqrt(0.21 / trials)


def test_bad_chooser_hits_step_limit():
    with pytest.raises(InvariantError):
        pipage_round([0.5], chooser=lambda x: Operation1(0, 1e-9, 1e-9), seed=0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.integers(0, 1000))
def test_default_chooser_step_count(x, seed):
    out = pipage_round(x, seed=seed)
    assert np.all((out.x == 0) | (out.x == 1))
    assert out.steps <= len(x)


def test_batch_marginals():
    x = np.array([0.2, 0.5, 0.9, 0.35, 0.05])
    trials = 100_000
    X = pipage_round_batch(x, trials, np.random.default_rng(4))
    sigma = np.sqrt(x * (1 - x) / trials)
    assert np.all(np.abs(X.mean(axis=0) - x) <= 3 * sigma + 1e-12)


def test_estimator_two_term_example():
    theta = math.log(0.5)
    expected = math.exp(-theta * 0.5) * (0.5 + 0.5 * math.exp(theta))
    assert pessimistic_estimator(Additive([1.0]), [0.5], 0.5, theta) == pytest.approx(expected)
    assert expected == pytest.approx(math.sqrt(2) * 0.75)


def test_estimator_integral_points():
    v = Additive([1.0, 2.0])
    assert pessimistic_estimator(v, [1, 1], 3.0, -0.7) == pytest.approx(1.0)
    g = pessimistic_estimator(v, [1, 1], 2.0, -0.7)
    assert 0 < g < 1


def test_estimator_needs_negative_theta():
    with pytest.raises(InputError):
        pessimistic_estimator(Additive([1.0]), [0.5], 0.5, 0.1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_estimator_never_increases(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 7))
    v = Coverage(tuple(tuple(np.flatnonzero(rng.random(5) < 0.4)) for _ in range(m)), rng.uniform(0, 1, 5))
    x = rng.random(m)
    move = default_chooser(x)
    delta = float(rng.uniform(0.05, 0.95))
    theta, t = math.log(1 - delta), float(rng.uniform(0, 3))
    assert estimator_after_move(v, x, move, t, theta) <= pessimistic_estimator(v, x, t, theta) + 1e-9


def test_concentration_unit_items():
    rep = concentration_experiment(Additive(np.ones(10)), np.full(10, 0.5), 0.5, 20_000, seed=1)
    assert rep.mu == pytest.approx(5.0)
    assert rep.bound == pytest.approx(math.exp(-0.625))
    # the default chooser keeps the sum fixed at 5, so the lower tail is empty
    assert rep.empirical <= binom.cdf(2, 10, 0.5)
    assert rep.passed


def test_concentration_preconditions():
    with pytest.raises(InputError):
        concentration_experiment(Additive([2.0]), [0.5], 0.5, 10_000, seed=0)
    with pytest.raises(InputError):
        concentration_experiment(Additive([1.0]), [0.5], 0.5, 100, seed=0)
