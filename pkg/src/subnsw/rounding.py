"""Marked/unmarked assignment multigraph and its iterative randomized rounding.

Each LP configuration sends its weight along one *marked* edge (to its most
valuable item) and along *unmarked* edges to the remaining items. Rounding
repeatedly finds either a cycle of fractional marked edges or a marked path
between two items closed off by unmarked edges, and shifts mass alternately
along it with an expectation-preserving coin flip.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapacityError, InputError, InvariantError
from .instance import Instance
from .valuations import Valuation, to_mask

SNAP = 1e-7
GRAPH_TOL = 1e-6
BATCH_MAX_EDGES = 62


def kappa(v: Valuation, S) -> int:
    """Most valuable single item of ``S``; ties go to the lowest index."""
    items = sorted(S)
    if not items:
        raise InputError("kappa needs a nonempty set")
    single = v.singletons
    best = items[0]
    for j in items[1:]:
        if single[j] > single[best]:
            best = j
    return best


@dataclass(frozen=True)
class Edge:
    agent: int
    item: int
    marked: bool


@dataclass(eq=False)
class AssignmentGraph:
    n: int
    m: int
    edges: tuple
    x: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.edges = tuple(self.edges)
        self.x = np.asarray(self.x, dtype=float)
        E = len(self.edges)
        self.agent = np.array([e.agent for e in self.edges], dtype=np.int64)
        self.item = np.array([e.item for e in self.edges], dtype=np.int64)
        self.marked = np.array([e.marked for e in self.edges], dtype=bool)
        self.item_incidence = np.zeros((self.m, E))
        self.item_incidence[self.item, np.arange(E)] = 1.0
        self.marked_incidence = np.zeros((self.n, E))
        self.marked_incidence[self.agent[self.marked], np.nonzero(self.marked)[0]] = 1.0
        self._item_edges = [[e for e in range(E) if self.item[e] == j] for j in range(self.m)]

    def __len__(self):
        return len(self.edges)

    def violation(self, x) -> float:
        """Largest deviation from the per-item and per-agent-marked unit sums."""
        x = np.asarray(x, dtype=float)
        d_item = np.abs(self.item_incidence @ x - 1.0)
        d_agent = np.abs(self.marked_incidence @ x - 1.0)
        return float(max(d_item.max(initial=0.0), d_agent.max(initial=0.0)))

    def fractional(self, x) -> np.ndarray:
        return (x > SNAP) & (x < 1.0 - SNAP)

    def large_items(self, i: int) -> list[int]:
        return sorted({int(self.item[e]) for e in range(len(self)) if self.agent[e] == i and self.marked[e]})

    def small_items(self, i: int) -> list[int]:
        return sorted({int(self.item[e]) for e in range(len(self)) if self.agent[e] == i and not self.marked[e]})

    def to_dict(self, inst: Optional[Instance] = None) -> dict:
        aid = (lambda i: inst.agents[i].id) if inst else (lambda i: i)
        iid = (lambda j: inst.item_ids[j]) if inst else (lambda j: j)
        return {"edges": [{"agent": aid(e.agent), "item": iid(e.item),
                           "marked": e.marked, "x": float(x)}
                          for e, x in zip(self.edges, self.x)]}


def graph_from_edges(n: int, m: int, triples) -> AssignmentGraph:
    """Build a graph directly from ``(agent, item, marked, x)`` tuples (in insertion order)."""
    seen = set()
    edges, xs = [], []
    for a, j, mk, x in triples:
        key = (a, j, bool(mk))
        if key in seen:
            raise InputError(f"duplicate edge {key}")
        seen.add(key)
        edges.append(Edge(int(a), int(j), bool(mk)))
        xs.append(float(x))
    return AssignmentGraph(n, m, edges, np.array(xs))


def build_graph(inst: Instance, sol) -> AssignmentGraph:
    """Marked edge to the large item of every configuration, unmarked edges to the rest.

    Edges are inserted in order of first appearance while walking the
    solution entries (sorted by agent, then item bitmask).
    """
    mass: dict = {}
    for (i, S), y in sol.entries.items():
        if not S:
            raise InputError("empty configuration in LP solution")
        k = kappa(inst.valuation(i), S)
        for j in sorted(S):
            key = (i, j, j == k)
            mass[key] = mass.get(key, 0.0) + y
    g = graph_from_edges(inst.n, inst.m, [(a, j, mk, x) for (a, j, mk), x in mass.items()])
    viol = g.violation(g.x)
    if viol > GRAPH_TOL:
        raise InputError(f"LP solution violates the partition constraints by {viol:.3g}")
    return g


@dataclass(frozen=True)
class Structure:
    """``kind`` is ``"cycle"`` or ``"path"``.

    ``vertices`` alternate agent and item indices, starting with an agent; a
    cycle omits the closing repeat of its first vertex. ``odd`` and ``even``
    are the edge indices that move down and up (respectively) on the first
    coin outcome.
    """

    kind: str
    vertices: tuple
    odd: tuple
    even: tuple

    def agent_moves(self, g: AssignmentGraph) -> dict:
        """Unmarked edges touched per agent: one edge (single move) or two (paired move).

        The first end edge steps down by ``delta1`` or up by ``delta2``; the last
        end edge takes the mirrored step, i.e. a single move with the sizes swapped.
        """
        if self.kind == "cycle":
            return {}
        first, last = self.odd[0], self.even[-1]
        a, b = int(g.agent[first]), int(g.agent[last])
        if a == b:
            return {a: ("op2", first, last)}
        return {a: ("op1", first), b: ("op1", last)}


def _marked_adjacency(g: AssignmentGraph, frac: np.ndarray):
    adj: dict = {}
    for e in np.nonzero(frac & g.marked)[0]:
        e = int(e)
        u, w = ("a", int(g.agent[e])), ("j", int(g.item[e]))
        adj.setdefault(u, []).append((w, e))
        adj.setdefault(w, []).append((u, e))
    return adj


def _find_cycle(adj: dict):
    """First cycle met by DFS in edge-insertion order, as (vertices, edges) or None."""
    visited = set()
    for root in adj:
        if root in visited:
            continue
        parent = {root: (None, None)}
        depth = {root: 0}
        stack = [(root, iter(adj[root]))]
        visited.add(root)
        while stack:
            u, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                continue
            w, e = nxt
            if e == parent[u][1]:
                continue
            if w in depth:
                # back edge u -> w closes a cycle
                verts, edges = [u], []
                cur = u
                while cur != w:
                    p, pe = parent[cur]
                    edges.append(pe)
                    verts.append(p)
                    cur = p
                verts.reverse()
                edges.reverse()
                edges.append(e)
                return verts, edges
            visited.add(w)
            depth[w] = depth[u] + 1
            parent[w] = (u, e)
            stack.append((w, iter(adj[w])))
    return None


def _bfs(adj: dict, src):
    prev = {src: (None, None)}
    order = [src]
    q = deque([src])
    while q:
        u = q.popleft()
        for w, e in adj[u]:
            if w not in prev:
                prev[w] = (u, e)
                order.append(w)
                q.append(w)
    return prev, order


def _first_unmarked(g: AssignmentGraph, frac: np.ndarray, item: int, exclude=()):
    for e in g._item_edges[item]:
        if frac[e] and not g.marked[e] and e not in exclude:
            return e
    return None


def _path_structure(g: AssignmentGraph, chain, marked_edges, end_a: int, end_b: int) -> Structure:
    """Assemble (i1, j1, ..., jk, i_{k+1}) from the item-to-item chain and its two end edges."""
    chain_edges = [end_a] + list(marked_edges) + [end_b]
    verts = [int(g.agent[end_a])] + list(chain) + [int(g.agent[end_b])]
    if verts[-1] < verts[0]:
        verts.reverse()
        chain_edges.reverse()
    odd = tuple(chain_edges[0::2])
    even = tuple(chain_edges[1::2])
    return Structure("path", tuple(verts), odd, even)


def find_structure(g: AssignmentGraph, x) -> Structure:
    """A marked cycle, or else a pseudo-marked path, on the fractional support of ``x``.

    The result depends only on which edges are fractional, so it is cached per
    graph keyed by that support.
    """
    x = np.asarray(x, dtype=float)
    frac = g.fractional(x)
    if not frac.any():
        raise InputError("find_structure needs a fractional point")
    key = np.packbits(frac).tobytes()
    hit = g._cache.get(key)
    if hit is None:
        hit = _find_structure(g, frac)
        g._cache[key] = hit
    return hit


def _find_structure(g: AssignmentGraph, frac: np.ndarray) -> Structure:
    adj = _marked_adjacency(g, frac)
    if adj:
        cyc = _find_cycle(adj)
        if cyc is not None:
            verts, edges = cyc
            if verts[0][0] != "a":
                verts = verts[1:] + verts[:1]
                edges = edges[1:] + edges[:1]
            return Structure("cycle", tuple(v[1] for v in verts),
                             tuple(edges[0::2]), tuple(edges[1::2]))
        # forest: leaf-to-leaf path through the first fractional marked edge's tree
        start = next(iter(adj))
        prev, order = _bfs(adj, start)
        leaf1 = order[-1]
        prev, order = _bfs(adj, leaf1)
        leaf2 = order[-1]
        for leaf in (leaf1, leaf2):
            if leaf[0] != "j" or len(adj[leaf]) != 1:
                raise InvariantError(f"marked forest leaf {leaf} is not an item")
        verts, medges = [leaf2], []
        cur = leaf2
        while cur != leaf1:
            p, pe = prev[cur]
            medges.append(pe)
            verts.append(p)
            cur = p
        verts.reverse()
        medges.reverse()
        j_first, j_last = verts[0][1], verts[-1][1]
        ea = _first_unmarked(g, frac, j_first)
        eb = _first_unmarked(g, frac, j_last)
        if ea is None or eb is None:
            raise InvariantError("leaf item of the marked forest has no fractional unmarked edge")
        return _path_structure(g, [v[1] for v in verts], medges, ea, eb)
    for j in range(g.m):
        ea = _first_unmarked(g, frac, j)
        if ea is None:
            continue
        eb = _first_unmarked(g, frac, j, exclude=(ea,))
        if eb is None:
            raise InvariantError(f"item {j} has a single fractional edge")
        return _path_structure(g, [j], [], ea, eb)
    raise InvariantError("fractional support without any structure")


def step_sizes(x, s: Structure) -> tuple[float, float]:
    odd, even = x[list(s.odd)], x[list(s.even)]
    d1 = min(odd.min(), (1.0 - even).min())
    d2 = min((1.0 - odd).min(), even.min())
    return float(d1), float(d2)


def apply_move(x, s: Structure, down: bool, d1: float, d2: float) -> np.ndarray:
    x = x.copy()
    odd, even = list(s.odd), list(s.even)
    if down:
        x[odd] -= d1
        x[even] += d1
    else:
        x[odd] += d2
        x[even] -= d2
    _snap(x)
    return x


def _snap(x: np.ndarray) -> None:
    x[x <= SNAP] = 0.0
    x[x >= 1.0 - SNAP] = 1.0


@dataclass
class StepRecord:
    kind: str
    vertices: tuple
    delta1: float
    delta2: float
    down: bool
    agent_moves: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertices": list(self.vertices), "delta1": self.delta1,
                "delta2": self.delta2, "down": self.down,
                "agent_moves": {str(a): list(mv) for a, mv in sorted(self.agent_moves.items())}}


@dataclass
class RoundingTrace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"iterations": len(self.steps), "steps": [s.to_dict() for s in self.steps]}


def _check_invariants(g: AssignmentGraph, x, where: str) -> None:
    viol = g.violation(x)
    if viol > GRAPH_TOL:
        raise InvariantError(f"partition invariants broken by {viol:.3g} {where}")


def iterative_round(g: AssignmentGraph, seed=None, rng=None) -> tuple[np.ndarray, RoundingTrace]:
    """One randomized rounding run; returns the 0/1 edge vector and its trace."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    x = g.x.copy()
    _snap(x)
    trace = RoundingTrace()
    limit = 2 * max(1, len(g))
    while g.fractional(x).any():
        if len(trace) >= limit:
            raise InvariantError(f"rounding did not finish within {limit} iterations")
        s = find_structure(g, x)
        d1, d2 = step_sizes(x, s)
        if not (d1 > 0 and d2 > 0):
            raise InvariantError(f"degenerate step sizes {d1}, {d2}")
        before = int((~g.fractional(x)).sum())
        down = bool(rng.random() < d2 / (d1 + d2))
        x = apply_move(x, s, down, d1, d2)
        trace.steps.append(StepRecord(s.kind, s.vertices, d1, d2, down, s.agent_moves(g)))
        _check_invariants(g, x, f"after iteration {len(trace)}")
        if int((~g.fractional(x)).sum()) <= before:
            raise InvariantError("rounding iteration made no edge integral")
    return x, trace


def round_batch(g: AssignmentGraph, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``trials`` independent roundings as a boolean ``(trials, |E|)`` array.

    Trials sharing a fractional support share one structure lookup and one
    vectorized update per iteration.
    """
    E = len(g)
    X = np.tile(g.x, (trials, 1))
    _snap(X)
    if E == 0:
        return X.astype(bool)
    if E > BATCH_MAX_EDGES:
        out = np.empty((trials, E), dtype=bool)
        for t in range(trials):
            out[t] = iterative_round(g, rng=rng)[0] > 0.5
        return out
    bits = (1 << np.arange(E, dtype=np.int64))
    limit = 2 * E
    for _ in range(limit + 1):
        frac = (X > SNAP) & (X < 1.0 - SNAP)
        keys = frac.astype(np.int64) @ bits
        active = keys != 0
        if not active.any():
            break
        coin = rng.random(trials)
        for key in np.unique(keys[active]):
            rows = np.nonzero(keys == key)[0]
            s = find_structure(g, X[rows[0]])
            odd, even = list(s.odd), list(s.even)
            sub = X[rows]
            d1 = np.minimum(sub[:, odd].min(axis=1), (1.0 - sub[:, even]).min(axis=1))
            d2 = np.minimum((1.0 - sub[:, odd]).min(axis=1), sub[:, even].min(axis=1))
            if np.any(d1 <= 0) or np.any(d2 <= 0):
                raise InvariantError("degenerate step sizes in batch rounding")
            down = coin[rows] < d2 / (d1 + d2)
            shift = np.where(down, -d1, d2)[:, None]
            sub[:, odd] += shift
            sub[:, even] -= shift
            X[rows] = sub
        _snap(X)
        worst = max(np.abs(X @ g.item_incidence.T - 1.0).max(initial=0.0),
                    np.abs(X @ g.marked_incidence.T - 1.0).max(initial=0.0))
        if worst > GRAPH_TOL:
            raise InvariantError(f"partition invariants broken by {worst:.3g} in batch rounding")
    else:
        raise InvariantError(f"batch rounding did not finish within {limit} iterations")
    return X > 0.5


@dataclass(frozen=True)
class Allocation:
    """Per agent: the large item and the set of small items."""

    large: tuple
    small: tuple

    @property
    def bundles(self) -> tuple:
        return tuple(frozenset({k}) | s for k, s in zip(self.large, self.small))

    def to_dict(self, inst: Instance) -> dict:
        return {inst.agents[i].id: {"large": inst.item_ids[k],
                                    "small": [inst.item_ids[j] for j in sorted(s)]}
                for i, (k, s) in enumerate(zip(self.large, self.small))}


def extract_allocation(g: AssignmentGraph, X) -> Allocation:
    X = np.asarray(X, dtype=float)
    if np.any((X > SNAP) & (X < 1.0 - SNAP)):
        raise InvariantError("edge vector is not integral")
    on = X > 0.5
    if g.violation(on.astype(float)) > 0:
        raise InvariantError("integral edge vector breaks the partition invariants")
    large, small = [], []
    for i in range(g.n):
        mine = on & (g.agent == i)
        large.append(int(g.item[mine & g.marked][0]))
        small.append(frozenset(int(j) for j in g.item[mine & ~g.marked]))
    return Allocation(tuple(large), tuple(small))


def bundle_masks(g: AssignmentGraph, X) -> np.ndarray:
    """Per-trial, per-agent item bitmasks, shape ``(trials, n)``, from a batch of 0/1 rows."""
    X = np.atleast_2d(np.asarray(X)).astype(np.int64)
    W = np.zeros((len(g), g.n), dtype=np.int64)
    W[np.arange(len(g)), g.agent] = np.left_shift(1, g.item)
    return X @ W


def small_masks(g: AssignmentGraph, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X)).astype(np.int64)
    W = np.zeros((len(g), g.n), dtype=np.int64)
    um = ~g.marked
    W[np.nonzero(um)[0], g.agent[um]] = np.left_shift(1, g.item[um])
    return X @ W


def allocation_masks(inst: Instance, alloc: Allocation) -> list[int]:
    return [to_mask(b, inst.m) for b in alloc.bundles]


def check_capacity(g: AssignmentGraph, max_fractional: int) -> int:
    k = int(g.fractional(g.x).sum())
    if k > max_fractional:
        raise CapacityError(f"{k} fractional edges exceeds the limit of {max_fractional}")
    return k
