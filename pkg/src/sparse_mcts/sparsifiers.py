"""Baseline constructions seeded by an arbitrary node set, plus pruning.

Every constructor takes the working set ``S`` (a superset of the terminals)
in place of the terminal set; the pruners then trim the result back against
the real terminals.
"""

from __future__ import annotations

import heapq
from typing import Callable, Iterable

import numpy as np

from .graph import INF, closure_mst, Sparsification, is_connected_on, kruskal, metric_closure, subgraph_distances
from .instances import ADD_SPANNER, MULT_SPANNER, STEINER, Instance

EPS = 1e-9


def _check_superset(inst: Instance, S) -> list[int]:
    S = sorted(set(int(v) for v in S))
    if not set(inst.terminals) <= set(S):
        raise ValueError("S must contain every terminal")
    return S


# -- constructions -------------------------------------------------------------


def steiner_2approx(inst: Instance, S: Iterable[int]) -> Sparsification:
    """MST of the metric closure on ``S``, expanded back into shortest paths of G."""
    S = _check_superset(inst, S)
    edges = set()
    for u, v in closure_mst(inst.graph, S):
        edges.update(inst.graph.path_edge_ids(u, v))
    return Sparsification.of(inst.graph, edges)


def _bounded_distance(adj: dict, s: int, t: int, bound: float) -> float:
    """d(s, t) in ``adj``, or any value >= ``bound`` once it is known to be at least that."""
    if s == t:
        return 0.0
    dist = {s: 0.0}
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, INF):
            continue
        if u == t or d >= bound:
            return d
        for v, w in adj.get(u, ()):
            nd = d + w
            if nd < dist.get(v, INF):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return INF


def greedy_mult_spanner(inst: Instance, S: Iterable[int], alpha: float | None = None) -> Sparsification:
    """Greedy subsetwise multiplicative spanner over the metric closure of ``S``.

    A closure edge uv is kept when ``alpha * w(uv) <= d_H(u, v)`` on the abstract
    spanner built so far; kept edges are expanded to their shortest paths.
    """
    S = _check_superset(inst, S)
    alpha = inst.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("a multiplicative stretch is required")
    closure = metric_closure(inst.graph, S)
    order = sorted(range(closure.m), key=lambda j: (closure.edges[j][2], closure.edges[j][0], closure.edges[j][1]))
    adj: dict[int, list] = {}
    edges = set()
    for j in order:
        a, b, w = closure.edges[j]
        if alpha * w <= _bounded_distance(adj, a, b, alpha * w):
            adj.setdefault(a, []).append((b, w))
            adj.setdefault(b, []).append((a, w))
            edges.update(closure.witness(j))
    return Sparsification.of(inst.graph, edges)


def lightest_edge_count(size: int) -> int:
    """``ceil(size ** (2/3))`` computed exactly."""
    k = max(0, round(size ** (2.0 / 3.0)) - 1)
    while k**3 < size * size:
        k += 1
    return k


def additive_spanner_2w(inst: Instance, S: Iterable[int], beta: float | None = None) -> Sparsification:
    """Subsetwise additive spanner with error ``beta`` (default ``2W``).

    Phase 1 keeps each node's ``ceil(|S|^(2/3))`` lightest incident edges; phase 2
    adds a full shortest path of G for every pair of S still violating the bound.
    """
    S = _check_superset(inst, S)
    g = inst.graph
    if beta is None:
        beta = inst.beta if inst.beta is not None else 2.0 * g.max_weight
    k = lightest_edge_count(len(S))
    edges = set()
    for u in range(g.n):
        nbrs = sorted(g.adjacency[u], key=lambda p: (p[1], p[0]))
        edges.update(g.edge_id(u, v) for v, _ in nbrs[:k])
    dG = g.distances
    for i, u in enumerate(S[:-1]):
        rest = S[i + 1 :]
        dH = subgraph_distances(g, edges, [u])[0]
        for v in rest:
            if dH[v] > dG[u, v] + beta + EPS:
                edges.update(g.path_edge_ids(u, v))
                dH = subgraph_distances(g, edges, [u])[0]
    return Sparsification.of(g, edges)


# -- validity ------------------------------------------------------------------------


def stretch_ok(inst: Instance, edge_set: Iterable[int], pairs_of=None) -> bool:
    """Stretch predicate of a spanner instance over every pair of ``pairs_of`` (default T)."""
    nodes = list(inst.terminals if pairs_of is None else sorted(set(pairs_of)))
    if len(nodes) < 2:
        return True
    g = inst.graph
    dG = g.distances[np.ix_(nodes, nodes)]
    dH = subgraph_distances(g, list(edge_set), nodes)[:, nodes]
    if inst.kind == MULT_SPANNER:
        bound = inst.alpha * dG
    elif inst.kind == ADD_SPANNER:
        bound = dG + inst.beta
    else:
        raise ValueError("stretch predicate needs a spanner instance")
    return bool(np.all(dH <= bound + EPS * np.maximum(1.0, bound)))


def is_steiner_tree(inst: Instance, h: Sparsification, pruned: bool = False) -> bool:
    """True iff ``h`` is a tree containing every terminal (and, if ``pruned``, all leaves are terminals)."""
    nodes = h.nodes()
    terms = set(inst.terminals)
    if not terms <= nodes:
        return False
    if len(h.edge_set) != len(nodes) - 1 or not is_connected_on(inst.graph, h.edge_set, nodes):
        return False
    if pruned:
        return all(d != 1 or u in terms for u, d in h.degrees().items())
    return True


def is_valid(inst: Instance, h: Sparsification) -> bool:
    if inst.kind == STEINER:
        return is_steiner_tree(inst, h)
    return stretch_ok(inst, h.edge_set)


# -- pruning ---------------------------------------------------------------------------


def prune_steiner(inst: Instance, h: Sparsification) -> Sparsification:
    """MST of ``h``, then repeatedly drop non-terminal leaves."""
    g = inst.graph
    tree = set(kruskal(g, h.edge_set))
    incident: dict[int, set] = {}
    for i in tree:
        u, v, _ = g.edges[i]
        incident.setdefault(u, set()).add(i)
        incident.setdefault(v, set()).add(i)
    terms = set(inst.terminals)
    stack = [u for u, es in incident.items() if len(es) == 1 and u not in terms]
    while stack:
        u = stack.pop()
        if len(incident.get(u, ())) != 1:
            continue
        (i,) = incident.pop(u)
        tree.discard(i)
        a, b, _ = g.edges[i]
        other = b if a == u else a
        incident[other].discard(i)
        if len(incident[other]) == 1 and other not in terms:
            stack.append(other)
        elif not incident[other]:
            del incident[other]
    return Sparsification.of(g, tree)


def prune_spanner(
    inst: Instance,
    h: Sparsification,
    validity: Callable[[Instance, Iterable[int]], bool] | None = None,
) -> Sparsification:
    """Drop edges heaviest-first whenever the rest stays valid; the result is 1-minimal."""
    validity = validity or stretch_ok
    g = inst.graph
    keep = set(h.edge_set)
    for i in sorted(keep, key=lambda i: (-g.edges[i][2], i)):
        keep.discard(i)
        if not validity(inst, keep):
            keep.add(i)
    return Sparsification.of(g, keep)


# -- dispatch ----------------------------------------------------------------------------


def construct(inst: Instance, S: Iterable[int]) -> Sparsification:
    if inst.kind == STEINER:
        return steiner_2approx(inst, S)
    if inst.kind == MULT_SPANNER:
        return greedy_mult_spanner(inst, S)
    return additive_spanner_2w(inst, S)


def prune(inst: Instance, h: Sparsification) -> Sparsification:
    if inst.kind == STEINER:
        return prune_steiner(inst, h)
    return prune_spanner(inst, h)


def solve_from(inst: Instance, S: Iterable[int]) -> Sparsification:
    """Construct from ``S`` and prune against the terminals."""
    return prune(inst, construct(inst, S))


def baseline(inst: Instance) -> Sparsification:
    """The un-pruned baseline algorithm run on the terminals."""
    return construct(inst, inst.terminals)
