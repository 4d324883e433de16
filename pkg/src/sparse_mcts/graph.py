"""Weighted undirected graphs and the shortest-path / spanning-tree primitives.

Node ids are dense integers ``0..n-1``. A :class:`Graph` never changes after
construction, so derived data (all-pairs shortest paths) is cached on it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import DisconnectedGraph, DisconnectedTerminals

INF = math.inf


class Graph:
    """Immutable weighted undirected simple graph.

    ``edges[i] = (u, v, w)`` with ``u < v``; edge indices follow input order.
    """

    def __init__(self, n: int, edges: Iterable[Sequence]):
        if n < 0:
            raise ValueError("node count must be nonnegative")
        self.n = int(n)
        canon = []
        index = {}
        adjacency = [[] for _ in range(self.n)]
        for raw in edges:
            u, v, w = int(raw[0]), int(raw[1]), float(raw[2])
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if not (w > 0 and math.isfinite(w)):
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            if u > v:
                u, v = v, u
            if (u, v) in index:
                raise ValueError(f"parallel edge ({u}, {v})")
            index[(u, v)] = len(canon)
            canon.append((u, v, w))
            adjacency[u].append((v, w))
            adjacency[v].append((u, w))
        for nbrs in adjacency:
            nbrs.sort()
        self.edges: tuple[tuple[int, int, float], ...] = tuple(canon)
        self.adjacency: tuple[tuple[tuple[int, float], ...], ...] = tuple(
            tuple(a) for a in adjacency
        )
        self._index = index
        self._apsp = None

    def __repr__(self):
        return f"Graph(n={self.n}, m={len(self.edges)})"

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_weight(self) -> float:
        return max((w for _, _, w in self.edges), default=0.0)

    def edge_id(self, u: int, v: int) -> int:
        if u > v:
            u, v = v, u
        return self._index[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self._index

    def weight(self, u: int, v: int) -> float:
        return self.edges[self.edge_id(u, v)][2]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def neighbors(self, u: int) -> list[int]:
        return [v for v, _ in self.adjacency[u]]

    # -- cached all-pairs data -------------------------------------------

    def _all_pairs(self):
        if self._apsp is None:
            dist = np.full((self.n, self.n), INF)
            parent = np.full((self.n, self.n), -1, dtype=np.int64)
            for s in range(self.n):
                table = dijkstra(self, s)
                dist[s] = table.dist
                parent[s] = table.parent
            dist.setflags(write=False)
            parent.setflags(write=False)
            self._apsp = (dist, parent)
        return self._apsp

    @property
    def distances(self) -> np.ndarray:
        """All-pairs shortest-path distance matrix (read-only)."""
        return self._all_pairs()[0]

    def shortest_path(self, u: int, v: int) -> list[int]:
        """Node sequence of the canonical shortest path from ``u`` to ``v``.

        The path is read off the shortest-path tree rooted at ``min(u, v)``, so
        ``shortest_path(u, v)`` and ``shortest_path(v, u)`` use the same edges.
        """
        dist, parent = self._all_pairs()
        if dist[u, v] == INF:
            raise DisconnectedTerminals(f"no path between {u} and {v}")
        s, t = (u, v) if u <= v else (v, u)
        path = [t]
        while path[-1] != s:
            path.append(int(parent[s, path[-1]]))
        path.reverse()
        return path if s == u else path[::-1]

    def path_edge_ids(self, u: int, v: int) -> list[int]:
        p = self.shortest_path(u, v)
        return [self.edge_id(a, b) for a, b in zip(p, p[1:])]

    def to_csr(self, edge_ids: Iterable[int] | None = None) -> csr_matrix:
        ids = range(self.m) if edge_ids is None else edge_ids
        rows, cols, vals = [], [], []
        for i in ids:
            u, v, w = self.edges[i]
            rows += (u, v)
            cols += (v, u)
            vals += (w, w)
        return csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))


@dataclass(frozen=True)
class PathTable:
    source: int
    dist: np.ndarray
    parent: np.ndarray  # -1 where undefined

    def path_to(self, v: int) -> list[int]:
        if self.dist[v] == INF:
            raise DisconnectedTerminals(f"{v} unreachable from {self.source}")
        path = [v]
        while path[-1] != self.source:
            path.append(int(self.parent[path[-1]]))
        return path[::-1]


def dijkstra(g: Graph, source: int) -> PathTable:
    """Single-source shortest paths; equal-distance ties go to the smaller predecessor id."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range")
    dist = np.full(g.n, INF)
    parent = np.full(g.n, -1, dtype=np.int64)
    done = np.zeros(g.n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in g.adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < parent[v] and v != source:
                parent[v] = u
    return PathTable(source, dist, parent)


@dataclass(frozen=True)
class Sparsification:
    """An edge subset of ``graph`` with its total weight."""

    graph: Graph
    edge_set: frozenset
    total_weight: float = field(init=False)

    def __post_init__(self):
        ids = sorted(self.edge_set)
        if ids and not (0 <= ids[0] and ids[-1] < self.graph.m):
            raise ValueError("edge index out of range")
        object.__setattr__(self, "total_weight", math.fsum(self.graph.edges[i][2] for i in ids))

    @classmethod
    def of(cls, graph: Graph, edge_ids: Iterable[int]) -> "Sparsification":
        return cls(graph, frozenset(int(i) for i in edge_ids))

    @property
    def cost(self) -> float:
        return self.total_weight

    def nodes(self) -> set[int]:
        out = set()
        for i in self.edge_set:
            u, v, _ = self.graph.edges[i]
            out.add(u)
            out.add(v)
        return out

    def degrees(self) -> dict[int, int]:
        deg: dict[int, int] = {}
        for i in self.edge_set:
            u, v, _ = self.graph.edges[i]
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        return deg

    def __len__(self):
        return len(self.edge_set)


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def kruskal(g: Graph, edge_ids: Iterable[int] | None = None) -> list[int]:
    """Minimum spanning forest over ``edge_ids`` (all edges by default).

    Edges are scanned in canonical ``(weight, u, v)`` order.
    """
    ids = range(g.m) if edge_ids is None else edge_ids
    order = sorted(ids, key=lambda i: g.edges[i][2:] + g.edges[i][:2])
    ds = _DisjointSet(g.n)
    chosen = []
    for i in order:
        u, v, _ = g.edges[i]
        if ds.union(u, v):
            chosen.append(i)
    return chosen


def minimum_spanning_tree(g: Graph) -> Sparsification:
    tree = kruskal(g)
    if g.n > 0 and len(tree) != g.n - 1:
        raise DisconnectedGraph(f"graph has {g.n - len(tree)} components")
    return Sparsification.of(g, tree)


class MetricClosure(Graph):
    """Complete graph on a node subset, weighted by shortest-path distance.

    Closure node ``i`` stands for original node ``nodes[i]``; ``witness[j]`` lists
    the original edge ids of one shortest path realizing closure edge ``j``.
    """

    def __init__(self, base: Graph, nodes: Sequence[int]):
        self.base = base
        self.nodes = tuple(sorted(set(int(x) for x in nodes)))
        dist = base.distances
        edges = []
        for i, u in enumerate(self.nodes):
            for j in range(i + 1, len(self.nodes)):
                v = self.nodes[j]
                d = dist[u, v]
                if d == INF:
                    raise DisconnectedTerminals(f"nodes {u} and {v} are not connected")
                edges.append((i, j, d))
        super().__init__(len(self.nodes), edges)
        self._witness: dict[int, list[int]] = {}

    def witness(self, j: int) -> list[int]:
        if j not in self._witness:
            a, b, _ = self.edges[j]
            self._witness[j] = self.base.path_edge_ids(self.nodes[a], self.nodes[b])
        return self._witness[j]


def metric_closure(g: Graph, nodes: Iterable[int]) -> MetricClosure:
    return MetricClosure(g, list(nodes))


def closure_mst(g: Graph, nodes: Iterable[int]) -> list[tuple[int, int]]:
    """MST of the metric closure on ``nodes`` as original node pairs (dense Prim).

    Ties go to the lowest-indexed node, which keeps the result deterministic.
    """
    nodes = sorted(set(int(x) for x in nodes))
    k = len(nodes)
    if k < 2:
        return []
    D = g.distances[np.ix_(nodes, nodes)]
    if np.isinf(D).any():
        raise DisconnectedTerminals("closure nodes are not all connected")
    in_tree = np.zeros(k, dtype=bool)
    in_tree[0] = True
    key = D[0].copy()
    parent = np.zeros(k, dtype=np.int64)
    pairs = []
    for _ in range(k - 1):
        cand = np.where(in_tree, INF, key)
        j = int(cand.argmin())
        in_tree[j] = True
        pairs.append((nodes[int(parent[j])], nodes[j]))
        better = ~in_tree & (D[j] < key)
        key[better] = D[j][better]
        parent[better] = j
    return pairs


def is_connected_on(g: Graph, edge_set: Iterable[int], nodes: Iterable[int]) -> bool:
    """True iff all ``nodes`` share one component of the subgraph on ``edge_set``."""
    nodes = list(nodes)
    if len(nodes) <= 1:
        return True
    ds = _DisjointSet(g.n)
    for i in edge_set:
        u, v, _ = g.edges[i]
        ds.union(u, v)
    root = ds.find(nodes[0])
    return all(ds.find(x) == root for x in nodes[1:])


def is_connected(g: Graph) -> bool:
    return is_connected_on(g, range(g.m), range(g.n))


def subgraph_distances(g: Graph, edge_set: Iterable[int], sources: Sequence[int]) -> np.ndarray:
    """Distances from each source within the subgraph on ``edge_set``; shape (len(sources), n)."""
    return _csgraph_dijkstra(g.to_csr(edge_set), directed=False, indices=list(sources))
