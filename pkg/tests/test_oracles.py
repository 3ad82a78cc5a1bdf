import math
from itertools import product

import numpy as np
import pytest

from subnsw.errors import CapacityError, InputError
from subnsw.instance import make_instance
from subnsw.oracles import brute_force_opt, distribution_marginals, exact_rounding_distribution, nsw
from subnsw.rounding import graph_from_edges, round_batch
from subnsw.valuations import Additive, Coverage


def naive_opt(inst):
    best = 0.0
    for assign in product(range(inst.n), repeat=inst.m):
        bundles = [{j for j in range(inst.m) if assign[j] == i} for i in range(inst.n)]
        best = max(best, nsw(inst, bundles))
    return best


def test_nsw_triad(triad):
    assert nsw(triad, [{0}, {1, 2}]) == pytest.approx(4.0)


def test_nsw_empty_share(triad):
    assert nsw(triad, [set(), {0, 1, 2}]) == 0.0


def test_nsw_single_agent():
    inst = make_instance([Additive([1, 2, 3])])
    assert nsw(inst, [{0, 1, 2}]) == pytest.approx(6.0)


def test_nsw_rejects_non_partition(triad):
    with pytest.raises(InputError):
        nsw(triad, [{0}, {0, 1, 2}])
    with pytest.raises(InputError):
        nsw(triad, [{0}, {1}])


def test_opt_triad(triad):
    rep = brute_force_opt(triad)
    assert rep.value == pytest.approx(4.0)
    assert rep.allocation == (frozenset({0}), frozenset({1, 2}))
    assert rep.ties == 1 and rep.assignments == 8


def test_opt_single_agent():
    inst = make_instance([Additive([1, 2, 3])])
    rep = brute_force_opt(inst)
    assert rep.value == pytest.approx(6.0) and rep.assignments == 1


def test_opt_pigeonhole():
    inst = make_instance([Additive([1.0]), Additive([2.0])])
    assert brute_force_opt(inst).value == 0.0


def test_opt_ties():
    inst = make_instance([Additive([1, 1]), Additive([1, 1])])
    assert brute_force_opt(inst).ties == 2


def test_opt_matches_naive():
    rng = np.random.default_rng(0)
    for _ in range(10):
        vals = [Coverage(tuple(tuple(np.flatnonzero(rng.random(5) < 0.4)) for _ in range(5)),
                         rng.uniform(0.5, 1.5, 5)) for _ in range(3)]
        inst = make_instance(vals, weights=[0.2, 0.3, 0.5])
        assert brute_force_opt(inst).value == pytest.approx(naive_opt(inst), rel=1e-12)


def test_opt_capacity():
    inst = make_instance([Additive(np.ones(24)), Additive(np.ones(24))])
    with pytest.raises(CapacityError):
        brute_force_opt(inst)


def test_distribution_single_pair():
    g = graph_from_edges(2, 3, [(0, 0, True, 1.0), (1, 2, True, 1.0),
                                (0, 1, False, 0.3), (1, 1, False, 0.7)])
    dist = exact_rounding_distribution(g)
    # a1 gets j2 with probability 0.3
    assert dist == pytest.approx({(1, 1, 1, 0): 0.3, (1, 1, 0, 1): 0.7})


def test_distribution_mixed_exact(mixed_graph):
    dist = exact_rounding_distribution(mixed_graph)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(distribution_marginals(dist), mixed_graph.x, atol=1e-9)
    for outcome in dist:
        assert mixed_graph.violation(np.array(outcome, dtype=float)) == 0


def test_distribution_against_monte_carlo(mixed_graph):
    dist = exact_rounding_distribution(mixed_graph)
    trials = 200_000
    X = round_batch(mixed_graph, trials, np.random.default_rng(1))
    rows, counts = np.unique(X.astype(int), axis=0, return_counts=True)
    emp = {tuple(r): c / trials for r, c in zip(rows, counts)}
    assert set(emp) <= set(dist)
    for k, p in dist.items():
        assert abs(emp.get(k, 0.0) - p) <= 4 * math.sqrt(p * (1 - p) / trials)


def test_distribution_capacity():
    edges = []
    for j in range(6):
        edges += [(0, j, False, 0.5), (1, j, False, 0.5)]
    g = graph_from_edges(2, 8, edges + [(0, 6, True, 1.0), (1, 7, True, 1.0)])
    with pytest.raises(CapacityError):
        exact_rounding_distribution(g)
