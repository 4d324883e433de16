"""Node and edge feature vectors for the policy network.

Node feature layout (12 columns)::

    0,1  x, y position in the unit square
    2    terminal flag
    3    already-selected flag (the only column that depends on S)
    4    degree / (n - 1)
    5    clustering coefficient
    6    betweenness centrality      (scaled by graph max)
    7    closeness centrality        (weighted distances, scaled by graph max)
    8    eigenvector centrality      (scaled by graph max)
    9    PageRank                    (scaled by graph max)
    10   Katz centrality             (scaled by graph max)
    11   core number / (n - 1)

Edge features are ``[w / W, |N(u) & N(v)| / (n - 2)]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np

from .graph import Graph
from .instances import Instance

NODE_DIM = 12
EDGE_DIM = 2
TERMINAL_COL = 2
SELECTED_COL = 3
LAYOUT_ITERATIONS = 200


@dataclass(frozen=True)
class FeatureSet:
    node_features: np.ndarray  # (n, 12)
    edge_features: np.ndarray  # (m, 2)
    layout: np.ndarray  # (n, 2)


def to_networkx(g: Graph) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_weighted_edges_from(g.edges)
    return G


def spring_layout(g: Graph, seed: int = 0, positions=None) -> np.ndarray:
    """Fruchterman-Reingold layout scaled into the unit square.

    Stored ``positions`` are returned unchanged when given.
    """
    if positions is not None:
        return np.asarray(positions, dtype=float)
    if g.n == 1:
        return np.full((1, 2), 0.5)
    pos = nx.spring_layout(to_networkx(g), weight=None, iterations=LAYOUT_ITERATIONS, seed=seed)
    arr = np.array([pos[i] for i in range(g.n)], dtype=float)
    lo = arr.min(axis=0)
    span = (arr.max(axis=0) - lo).max()
    if span == 0:
        return np.full_like(arr, 0.5)
    return (arr - lo) / span


def _scaled(values: dict, n: int) -> np.ndarray:
    arr = np.abs(np.array([values[i] for i in range(n)], dtype=float))
    top = arr.max() if n else 0.0
    return arr / top if top > 0 else np.zeros(n)


def _katz(G: nx.Graph, n: int) -> np.ndarray:
    if G.number_of_edges() == 0:
        return np.zeros(n)
    lam = float(np.max(np.abs(np.linalg.eigvalsh(nx.to_numpy_array(G, weight=None)))))
    return _scaled(nx.katz_centrality_numpy(G, alpha=0.9 / lam, weight=None), n)


@lru_cache(maxsize=1024)
def static_features(inst: Instance) -> FeatureSet:
    """Features that do not depend on the selected set; computed once per instance."""
    g = inst.graph
    n = g.n
    G = to_networkx(g)
    scale = max(n - 1, 1)
    layout = spring_layout(g, seed=inst.seed, positions=inst.positions)

    X = np.zeros((n, NODE_DIM))
    X[:, 0:2] = layout
    X[list(inst.terminals), TERMINAL_COL] = 1.0
    X[:, 4] = [g.degree(u) / scale for u in range(n)]
    clust = nx.clustering(G)
    X[:, 5] = [clust[u] for u in range(n)]
    X[:, 6] = _scaled(nx.betweenness_centrality(G), n)
    X[:, 7] = _scaled(nx.closeness_centrality(G, distance="weight"), n)
    if g.m:
        X[:, 8] = _scaled(nx.eigenvector_centrality_numpy(G, weight=None), n)
        X[:, 9] = _scaled(nx.pagerank(G, weight=None), n)
    X[:, 10] = _katz(G, n)
    core = nx.core_number(G)
    X[:, 11] = [core[u] / scale for u in range(n)]
    X.setflags(write=False)

    return FeatureSet(X, edge_features(inst), layout)


def edge_features(inst: Instance) -> np.ndarray:
    g = inst.graph
    W = g.max_weight
    denom = g.n - 2
    nbrs = [set(g.neighbors(u)) for u in range(g.n)]
    E = np.zeros((g.m, EDGE_DIM))
    for i, (u, v, w) in enumerate(g.edges):
        E[i, 0] = w / W
        E[i, 1] = len(nbrs[u] & nbrs[v]) / denom if denom > 0 else 0.0
    E.setflags(write=False)
    return E


def node_features(inst: Instance, selected) -> np.ndarray:
    """Full (n, 12) node feature matrix for the selected set ``selected``."""
    X = static_features(inst).node_features.copy()
    X[list(selected), SELECTED_COL] = 1.0
    return X


def featurize(inst: Instance, selected) -> FeatureSet:
    static = static_features(inst)
    return FeatureSet(node_features(inst, selected), static.edge_features, static.layout)
