import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subnsw.conflp import solve_exact
from subnsw.conflp.master import FractionalSolution
from subnsw.errors import InputError, InvariantError
from subnsw.harness.generators import generate_instance
from subnsw.instance import make_instance
from subnsw.oracles import distribution_marginals, exact_rounding_distribution
from subnsw.rounding import (apply_move, build_graph, extract_allocation, find_structure, graph_from_edges,
                             iterative_round, kappa, round_batch, step_sizes)
from subnsw.valuations import Additive


class TestKappa:
    def test_argmax(self):
        assert kappa(Additive([4, 3, 1]), {1, 2}) == 1

    def test_singleton(self):
        assert kappa(Additive([4, 3, 1]), {2}) == 2

    def test_tie_lowest_index(self):
        assert kappa(Additive([2, 2]), {0, 1}) == 0

    def test_empty(self):
        with pytest.raises(InputError):
            kappa(Additive([1]), set())


class TestBuildGraph:
    def test_mixed_endpoints(self, mixed_graph):
        g = mixed_graph
        assert g.large_items(0) == [0, 1] and g.large_items(1) == [0, 2]
        assert g.small_items(0) == [2] and g.small_items(1) == [0, 1]
        parallel = [e for e in g.edges if e.agent == 1 and e.item == 0]
        assert len(parallel) == 2 and {e.marked for e in parallel} == {True, False}

    def test_mixed_values(self, mixed_graph):
        got = {(e.agent, e.item, e.marked): x for e, x in zip(mixed_graph.edges, mixed_graph.x)}
        assert got == pytest.approx({(0, 0, True): 0.3, (0, 1, True): 0.7, (0, 2, False): 0.3,
                                     (1, 0, True): 0.3, (1, 0, False): 0.4, (1, 1, False): 0.3,
                                     (1, 2, True): 0.7})

    def test_integral_solution(self, triad):
        g = build_graph(triad, solve_exact(triad))
        assert set(np.unique(g.x)) <= {0.0, 1.0}

    def test_singleton_solution_has_no_unmarked(self):
        inst = make_instance([Additive([1, 1]), Additive([1, 1])])
        f = frozenset
        sol = FractionalSolution({(0, f({0})): 0.5, (0, f({1})): 0.5, (1, f({0})): 0.5, (1, f({1})): 0.5}, 0.0)
        g = build_graph(inst, sol)
        assert all(e.marked for e in g.edges) and np.allclose(g.x, 0.5)

    def test_rejects_bad_solution(self, triad):
        sol = FractionalSolution({(0, frozenset({0})): 1.0}, 0.0)
        with pytest.raises(InputError):
            build_graph(triad, sol)


class TestFindStructure:
    def test_marked_cycle(self, square_cycle):
        s = find_structure(square_cycle, square_cycle.x)
        assert s.kind == "cycle"
        assert s.vertices == (0, 0, 1, 1)  # a1, j1, a2, j2

    def test_unmarked_pair(self):
        g = graph_from_edges(2, 3, [(0, 0, True, 1.0), (1, 2, True, 1.0),
                                    (0, 1, False, 0.5), (1, 1, False, 0.5)])
        s = find_structure(g, g.x)
        assert s.kind == "path" and s.vertices == (0, 1, 1)

    def test_marked_path_with_unmarked_ends(self):
        # a2 splits its large mass over j1, j2; a1 and a3 take the rest as small items
        g = graph_from_edges(3, 4, [(0, 2, True, 1.0), (0, 0, False, 0.5),
                                    (1, 0, True, 0.5), (1, 1, True, 0.5),
                                    (2, 3, True, 1.0), (2, 1, False, 0.5)])
        s = find_structure(g, g.x)
        assert s.kind == "path"
        assert s.vertices == (0, 0, 1, 1, 2)

    def test_integral_rejected(self, triad):
        g = build_graph(triad, solve_exact(triad))
        with pytest.raises(InputError):
            find_structure(g, g.x)


class TestRound:
    def test_integral_unchanged(self, triad):
        g = build_graph(triad, solve_exact(triad))
        X, trace = iterative_round(g, seed=0)
        assert np.array_equal(X, g.x) and len(trace) == 0

    def test_cycle_is_a_matching(self, square_cycle):
        dist = exact_rounding_distribution(square_cycle)
        assert dist == pytest.approx({(0, 1, 1, 0): 0.5, (1, 0, 0, 1): 0.5})

    def test_trace_and_progress(self, mixed_graph):
        for seed in range(30):
            X, trace = iterative_round(mixed_graph, seed=seed)
            assert len(trace) <= len(mixed_graph)
            assert mixed_graph.violation(X) == 0
            for step in trace.steps:
                assert step.delta1 > 0 and step.delta2 > 0
                for moves in step.agent_moves.values():
                    assert moves[0] in ("op1", "op2")

    def test_agent_moves_follow_template(self, mixed_graph):
        """Per agent, the unmarked coordinates move by a single- or paired-coordinate step."""
        g = mixed_graph
        unmarked = ~g.marked
        for seed in range(40):
            rng = np.random.default_rng(seed)
            x = g.x.copy()
            while g.fractional(x).any():
                s = find_structure(g, x)
                d1, d2 = step_sizes(x, s)
                down = bool(rng.random() < d2 / (d1 + d2))
                y = apply_move(x, s, down, d1, d2)
                moves = s.agent_moves(g)
                for i in range(g.n):
                    changed = np.flatnonzero(unmarked & (g.agent == i) & ~np.isclose(x, y, atol=0, rtol=0))
                    if i not in moves:
                        assert len(changed) == 0
                    elif moves[i][0] == "op1":
                        assert list(changed) == [moves[i][1]]
                        e = changed[0]
                        # the even-side end takes the mirrored step (sizes swapped)
                        step = (-d1 if down else d2) * (1 if e in s.odd else -1)
                        assert y[e] - x[e] == pytest.approx(step)
                    else:
                        assert sorted(changed) == sorted(moves[i][1:])
                        a, b = moves[i][1:]
                        assert y[a] - x[a] == pytest.approx(-d1 if down else d2)
                        assert y[b] - x[b] == pytest.approx(-(y[a] - x[a]))
                x = y

    def test_batch_matches_exact_marginals(self, mixed_graph):
        trials = 100_000
        X = round_batch(mixed_graph, trials, np.random.default_rng(9))
        x = mixed_graph.x
        assert np.all(np.abs(X.mean(axis=0) - x) <= 3 * np.sqrt(x * (1 - x) / trials))

    def test_single_runs_match_exact_marginals(self, mixed_graph):
        trials = 5000
        rng = np.random.default_rng(21)
        X = np.array([iterative_round(mixed_graph, rng=rng)[0] for _ in range(trials)])
        exact = distribution_marginals(exact_rounding_distribution(mixed_graph))
        assert np.all(np.abs(X.mean(axis=0) - exact) <= 3.5 * np.sqrt(exact * (1 - exact) / trials))

    def test_iteration_limit(self, mixed_graph, monkeypatch):
        import subnsw.rounding as r
        monkeypatch.setattr(r, "apply_move", lambda x, s, down, d1, d2: x.copy())
        with pytest.raises(InvariantError):
            iterative_round(mixed_graph, seed=0)


class TestExtract:
    def test_single(self):
        g = graph_from_edges(1, 1, [(0, 0, True, 1.0)])
        alloc = extract_allocation(g, g.x)
        assert alloc.large == (0,) and alloc.small == (frozenset(),)

    def test_large_and_small(self):
        g = graph_from_edges(1, 2, [(0, 0, True, 1.0), (0, 1, False, 1.0)])
        alloc = extract_allocation(g, g.x)
        assert alloc.bundles == (frozenset({0, 1}),) and alloc.large == (0,)

    def test_mixed_partition(self, mixed_graph):
        X, _ = iterative_round(mixed_graph, seed=4)
        alloc = extract_allocation(mixed_graph, X)
        assert sum(len(b) for b in alloc.bundles) == 3

    def test_fractional_rejected(self, mixed_graph):
        with pytest.raises(InvariantError):
            extract_allocation(mixed_graph, mixed_graph.x)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["additive-uniform", "coverage-random", "budgeted-additive-random"]),
       st.integers(2, 3), st.integers(3, 7), st.integers(0, 10**6))
def test_random_instances_round_cleanly(family, n, m, seed):
    if m < n:
        return
    inst = generate_instance(family, n, m, seed)
    g = build_graph(inst, solve_exact(inst))
    X = round_batch(g, 500, np.random.default_rng(seed))
    for row in X:
        assert g.violation(row.astype(float)) == 0
