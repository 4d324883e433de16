import itertools
import json

import numpy as np
import pytest

from conftest import brute_force_spanner, brute_force_steiner, k4_instance, random_instance
from sparse_mcts.errors import EdgeLimitExceeded, TerminalLimitExceeded, Timeout
from sparse_mcts.graph import Graph, dijkstra, minimum_spanning_tree
from sparse_mcts.instances import ADD_SPANNER, MULT_SPANNER, Instance, generate_geometric
from sparse_mcts.exact import OracleCache, exact_solution, exact_spanner, exact_steiner
from sparse_mcts.sparsifiers import additive_spanner_2w, is_steiner_tree, solve_from, stretch_ok


def test_k4_exact_is_nine():
    tree = exact_steiner(k4_instance())
    assert tree.total_weight == 9
    assert tree.nodes() == {0, 1, 2, 3}


def test_two_terminals_equal_shortest_path():
    rng = np.random.default_rng(0)
    for _ in range(20):
        inst = random_instance(rng, 10, k=2)
        s, t = inst.terminals
        assert exact_steiner(inst).total_weight == dijkstra(inst.graph, s).dist[t]


def test_all_terminals_equal_mst():
    rng = np.random.default_rng(1)
    for _ in range(20):
        inst = random_instance(rng, 9, k=9)
        assert exact_steiner(inst).total_weight == minimum_spanning_tree(inst.graph).total_weight


def test_exact_steiner_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(4, 10))
        inst = random_instance(rng, n, k=int(rng.integers(2, n + 1)))
        tree = exact_steiner(inst)
        assert is_steiner_tree(inst, tree, pruned=True)
        assert tree.total_weight == brute_force_steiner(inst)


def test_terminal_limit():
    g = Graph(16, [(i, i + 1, 1) for i in range(15)])
    with pytest.raises(TerminalLimitExceeded):
        exact_steiner(Instance(g, tuple(range(15))))


def test_spanner_alpha_one_unique_paths_is_their_union():
    # a tree has unique paths, so the preserver is the union of terminal paths
    g = Graph(6, [(0, 1, 2), (1, 2, 3), (1, 3, 1), (3, 4, 5), (3, 5, 2)])
    inst = Instance(g, (0, 2, 4), MULT_SPANNER, alpha=1.0)
    union = set()
    for u, v in itertools.combinations(inst.terminals, 2):
        union.update(g.path_edge_ids(u, v))
    assert exact_spanner(inst).edge_set == frozenset(union)


def test_spanner_triangle():
    inst = Instance(Graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 2)]), (0, 1, 2), MULT_SPANNER, alpha=2.0)
    for method in ("enumerate", "bnb"):
        h = exact_spanner(inst, method=method)
        assert h.total_weight == 2 and h.edge_set == frozenset({0, 1})


def test_additive_oracle_not_worse_than_construction():
    rng = np.random.default_rng(4)
    for _ in range(10):
        inst = random_instance(rng, 8, kind=ADD_SPANNER, p=0.3)
        assert exact_spanner(inst).total_weight <= additive_spanner_2w(inst, inst.terminals).total_weight


@pytest.mark.parametrize("kind", [MULT_SPANNER, ADD_SPANNER])
def test_spanner_methods_agree_with_networkx_enumeration(kind):
    rng = np.random.default_rng(5 if kind == MULT_SPANNER else 6)
    checked = 0
    while checked < 8:
        inst = random_instance(rng, 7, k=4, kind=kind, p=0.35)
        if inst.graph.m > 12:
            continue
        ref = brute_force_spanner(inst)
        for method in ("enumerate", "bnb"):
            h = exact_spanner(inst, method=method)
            assert stretch_ok(inst, h.edge_set)
            assert h.total_weight == ref
        checked += 1


def test_edge_count_objective():
    # the two-edge detour is lighter, the direct edge is fewer edges
    g = Graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 3)])
    inst = Instance(g, (0, 2), MULT_SPANNER, alpha=1.0)
    assert exact_spanner(inst).edge_set == frozenset({0, 1})
    inst = Instance(g, (0, 2), MULT_SPANNER, alpha=1.5)
    by_count = exact_spanner(inst, objective="edges")
    assert len(by_count.edge_set) == 1 and by_count.edge_set == frozenset({2})
    assert exact_spanner(inst).edge_set == frozenset({0, 1})
    with pytest.raises(ValueError):
        exact_spanner(inst, objective="nodes")


def test_edge_limits_and_timeout():
    inst = generate_geometric(30, 0, MULT_SPANNER)
    with pytest.raises(EdgeLimitExceeded):
        exact_spanner(inst, method="enumerate")
    big = generate_geometric(40, 0, MULT_SPANNER)
    with pytest.raises(Timeout):
        exact_spanner(big, budget=0.05)
    with pytest.raises(ValueError):
        exact_spanner(k4_instance())


def test_oracle_cost_between_optimum_and_baseline():
    for seed in range(10):
        inst = generate_geometric(14, seed)
        opt = exact_solution(inst).total_weight
        base = solve_from(inst, inst.terminals).total_weight
        assert opt <= base <= 2 * opt


def test_oracle_cache_round_trip(tmp_path):
    path = tmp_path / "cache.json"
    inst = generate_geometric(12, 9)
    cache = OracleCache(path)
    sol = cache.solve(inst)
    assert json.loads(path.read_text()) == {inst.digest(): sorted(sol.edge_set)}
    again = OracleCache(path)
    assert again.get(inst) == sol
    assert again.get(generate_geometric(12, 10)) is None
