"""Exact solvers used as ground truth at small scale.

Steiner trees come from the Dreyfus-Wagner subset dynamic program; minimum
weight spanners from edge-subset search (plain enumeration or a small
branch-and-bound).
"""

from __future__ import annotations

import json
import time
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import EdgeLimitExceeded, TerminalLimitExceeded, Timeout
from .graph import INF, Sparsification
from .instances import STEINER, Instance
from .sparsifiers import prune_steiner, stretch_ok

MAX_DP_TERMINALS = 14
MAX_ENUM_EDGES = 22
MAX_BNB_EDGES = 120


def _submasks(mask: int, bits: list[int]) -> np.ndarray:
    """All nonempty proper submasks of ``mask`` that contain its lowest bit."""
    low, rest = bits[0], bits[1:]
    m = len(rest)
    codes = np.arange(1 << m, dtype=np.int64)
    subs = np.full(codes.shape, 1 << low, dtype=np.int64)
    for j, b in enumerate(rest):
        subs |= ((codes >> j) & 1) << b
    return subs[subs != mask]


def exact_steiner(inst: Instance) -> Sparsification:
    """Minimum-weight tree spanning the terminals (Dreyfus-Wagner)."""
    T = list(inst.terminals)
    k = len(T)
    if k > MAX_DP_TERMINALS:
        raise TerminalLimitExceeded(f"{k} terminals exceed the DP limit of {MAX_DP_TERMINALS}")
    g = inst.graph
    n = g.n
    D = np.asarray(g.distances)
    full = (1 << k) - 1
    # dp[mask, v]: cheapest tree spanning terminals in mask plus node v
    dp = np.full((1 << k, n), INF)
    via = np.full((1 << k, n), -1, dtype=np.int64)  # node where v's path joins the subtree
    split = np.zeros((1 << k, n), dtype=np.int64)  # submask chosen at that join node
    for i, t in enumerate(T):
        dp[1 << i] = D[t]
        via[1 << i] = t
    by_size = sorted(range(1, full + 1), key=lambda m: bin(m).count("1"))
    for mask in by_size:
        bits = [i for i in range(k) if mask >> i & 1]
        if len(bits) < 2:
            continue
        subs = _submasks(mask, bits)
        cand = dp[subs] + dp[mask ^ subs]  # (len(subs), n)
        best = cand.argmin(axis=0)
        merged = cand[best, np.arange(n)]
        split[mask] = subs[best]
        # relax: dp[mask, v] = min_u merged[u] + D[u, v]
        tot = merged[:, None] + D
        u = tot.argmin(axis=0)
        dp[mask] = tot[u, np.arange(n)]
        via[mask] = u
    edges: set[int] = set()

    def build(mask, v):
        u = int(via[mask, v])
        if u != v:
            edges.update(g.path_edge_ids(u, v))
        if mask & (mask - 1) == 0:
            return
        s = int(split[mask, u])
        build(s, u)
        build(mask ^ s, u)

    build(full, T[0])
    tree = prune_steiner(inst, Sparsification.of(g, edges))
    return tree


def steiner_cost(inst: Instance) -> float:
    return exact_steiner(inst).total_weight


# -- spanners ---------------------------------------------------------------------------


def _edge_costs(inst: Instance, objective: str) -> list[float]:
    if objective == "weight":
        return [e[2] for e in inst.graph.edges]
    if objective == "edges":
        return [1.0] * inst.graph.m
    raise ValueError(f"unknown objective {objective!r}")


def _enumerate_spanner(inst: Instance, deadline: float, objective: str = "weight") -> Sparsification:
    g = inst.graph
    cost = _edge_costs(inst, objective)
    ids = list(range(g.m))
    best, best_w = (), INF
    for size in range(len(ids) + 1):
        for combo in combinations(ids, size):
            if time.monotonic() > deadline:
                raise Timeout("spanner enumeration exceeded its budget")
            w = sum(cost[i] for i in combo)
            if w >= best_w:
                continue
            if stretch_ok(inst, combo):
                best, best_w = combo, w
    return Sparsification.of(g, best)


def _bnb_spanner(inst: Instance, deadline: float, objective: str = "weight") -> Sparsification:
    """Include/exclude search over edges, heaviest first.

    A branch dies when the edges it still allows are invalid or its weight
    reaches the incumbent. Edges whose removal alone breaks validity are
    mandatory and get included immediately, tightening the bound.
    """
    g = inst.graph
    w_of = _edge_costs(inst, objective)
    best_w, best_edges = INF, None

    def recurse(undecided, chosen, chosen_w, allowed):
        nonlocal best_w, best_edges
        if time.monotonic() > deadline:
            raise Timeout("spanner search exceeded its budget")
        if chosen_w >= best_w:
            return
        if stretch_ok(inst, chosen):
            best_w, best_edges = chosen_w, set(chosen)
            return
        forced = [e for e in undecided if not stretch_ok(inst, allowed - {e})]
        if forced:
            chosen = chosen | set(forced)
            chosen_w += sum(w_of[e] for e in forced)
            undecided = [e for e in undecided if e not in chosen]
            if chosen_w >= best_w:
                return
            if stretch_ok(inst, chosen):
                best_w, best_edges = chosen_w, set(chosen)
                return
        if not undecided:
            return
        e, rest = undecided[0], undecided[1:]
        without = allowed - {e}
        if stretch_ok(inst, without):
            recurse(rest, chosen, chosen_w, without)
        recurse(rest, chosen | {e}, chosen_w + w_of[e], allowed)

    everything = set(range(g.m))
    if stretch_ok(inst, everything):
        order = sorted(everything, key=lambda i: (-w_of[i], i))
        recurse(order, set(), 0.0, everything)
    return Sparsification.of(g, best_edges or ())


def exact_spanner(
    inst: Instance, method: str = "auto", budget: float = 60.0, objective: str = "weight"
) -> Sparsification:
    """Minimum-cost edge set meeting the instance's stretch bound for every terminal pair.

    ``objective`` is ``"weight"`` (total edge weight) or ``"edges"`` (edge count).
    """
    if inst.kind == STEINER:
        raise ValueError("exact_spanner needs a spanner instance")
    m = inst.graph.m
    if method == "auto":
        method = "bnb"
    limit = MAX_ENUM_EDGES if method == "enumerate" else MAX_BNB_EDGES
    if m > limit:
        raise EdgeLimitExceeded(f"{m} edges exceed the {method} limit of {limit}")
    deadline = time.monotonic() + budget
    if method == "enumerate":
        return _enumerate_spanner(inst, deadline, objective)
    return _bnb_spanner(inst, deadline, objective)


def exact_solution(inst: Instance, budget: float = 60.0) -> Sparsification:
    if inst.kind == STEINER:
        return exact_steiner(inst)
    return exact_spanner(inst, budget=budget)


class OracleCache:
    """JSON file mapping instance digests to optimal edge sets, so labeling can resume."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.data: dict[str, list[int]] = {}
        if self.path and self.path.exists():
            self.data = json.loads(self.path.read_text())

    def get(self, inst: Instance) -> Sparsification | None:
        ids = self.data.get(inst.digest())
        return None if ids is None else Sparsification.of(inst.graph, ids)

    def put(self, inst: Instance, sol: Sparsification) -> None:
        self.data[inst.digest()] = sorted(sol.edge_set)
        if self.path:
            self.path.write_text(json.dumps(self.data, sort_keys=True))

    def solve(self, inst: Instance, budget: float = 60.0) -> Sparsification:
        sol = self.get(inst)
        if sol is None:
            sol = exact_solution(inst, budget)
            self.put(inst, sol)
        return sol
