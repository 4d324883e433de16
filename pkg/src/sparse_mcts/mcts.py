"""Policy-guided Monte Carlo tree search over growing node sets.

A search state is a node set ``S`` that starts at the terminals; an action
adds one more node. Every visited state is scored by running a baseline
construction from ``S`` and pruning the result, and the cheapest pruned
sparsification seen anywhere in the search is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gnn import PolicyModel, uniform_policy
from .graph import Sparsification
from .instances import Instance
from .sparsifiers import construct as default_construct
from .sparsifiers import prune

Policy = Callable[[Instance, frozenset], np.ndarray]


@dataclass
class SearchConfig:
    c_puct: float = 1.3
    epsilon: float = 0.1
    sample_size: int | None = None  # None: number of graph nodes
    height_fraction: float = 0.2
    seed: int = 0
    reinvoke: bool = True  # re-run the policy after every simulated addition
    max_rounds: int | None = None  # None: 4 * n; a safety valve on top of the height cap

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.height_fraction <= 1.0:
            raise ValueError("height_fraction must lie in (0, 1]")


def normalize_cost(cost: float, best: float, worst: float) -> float:
    """Map a cost to [0, 1] with the best cost at 1 and the worst at 0."""
    if worst <= best:
        return 1.0
    return (worst - cost) / (worst - best)


@dataclass(eq=False)
class SearchNode:
    S: frozenset
    depth: int
    prior: np.ndarray | None = None
    children: dict = field(default_factory=dict)
    N: dict = field(default_factory=dict)
    best_cost: float = math.inf
    worst_cost: float = -math.inf
    value: float = math.inf

    @property
    def visits(self) -> int:
        return sum(self.N.values())

    def record(self, cost: float) -> None:
        self.best_cost = min(self.best_cost, cost)
        self.worst_cost = max(self.worst_cost, cost)


def action_cost_range(node: SearchNode) -> tuple[float, float]:
    """Best and worst backed-up cost over the node's expanded actions."""
    costs = [c.best_cost for c in node.children.values() if c.best_cost < math.inf]
    if not costs:
        return math.inf, -math.inf
    return min(costs), max(costs)


def puct_score(node: SearchNode, a: int, c_puct: float, cost_range=None) -> float:
    """Q(node, a) + U(node, a); unexplored actions get a neutral Q of 0.5.

    Q normalises the child's best cost against the cheapest and dearest
    expanded siblings.
    """
    child = node.children.get(a)
    if child is None or child.best_cost == math.inf:
        q = 0.5
    else:
        b, w = cost_range or action_cost_range(node)
        q = normalize_cost(child.best_cost, b, w)
    u = c_puct * node.prior[a] * math.sqrt(node.visits) / (1 + node.N.get(a, 0))
    return q + u


class MCTS:
    def __init__(
        self,
        inst: Instance,
        policy: Policy | PolicyModel | None = None,
        config: SearchConfig | None = None,
        construct: Callable | None = None,
    ):
        self.inst = inst
        self.config = config or SearchConfig()
        if policy is None:
            policy = uniform_policy
        self.policy = policy
        self.construct = construct or default_construct
        self.rng = np.random.default_rng(self.config.seed)
        self._memo: dict[frozenset, Sparsification] = {}
        self.incumbent: Sparsification | None = None
        self.rounds = 0
        self.height = 0
        n = inst.n
        self.sample_size = n if self.config.sample_size is None else self.config.sample_size
        self.max_rounds = 4 * n if self.config.max_rounds is None else self.config.max_rounds
        free = n - len(inst.terminals)
        self.height_cap = min(math.ceil(round(self.config.height_fraction * n, 9)), free)
        self.root = SearchNode(frozenset(inst.terminals), 0)

    # -- evaluation -------------------------------------------------------------

    def evaluate(self, S: frozenset) -> float:
        sol = self._memo.get(S)
        if sol is None:
            sol = prune(self.inst, self.construct(self.inst, S))
            self._memo[S] = sol
            if self.incumbent is None or sol.total_weight < self.incumbent.total_weight:
                self.incumbent = sol
        return sol.total_weight

    @property
    def evaluations(self) -> int:
        return len(self._memo)

    def _legal(self, S: frozenset) -> np.ndarray:
        mask = np.ones(self.inst.n, dtype=bool)
        mask[list(S)] = False
        return np.flatnonzero(mask)

    def _prior(self, node: SearchNode) -> np.ndarray:
        if node.prior is None:
            node.prior = np.asarray(self.policy(self.inst, node.S), dtype=float)
        return node.prior

    # -- the four phases ------------------------------------------------------------

    def select_action(self, node: SearchNode, legal: np.ndarray) -> int:
        self._prior(node)
        if self.rng.random() < self.config.epsilon:
            return int(legal[self.rng.integers(len(legal))])
        cost_range = action_cost_range(node)
        best, best_key = None, None
        for a in legal:
            a = int(a)
            key = (puct_score(node, a, self.config.c_puct, cost_range), node.prior[a], -a)
            if best_key is None or key > best_key:
                best, best_key = a, key
        return best

    def simulate(self, S: frozenset) -> float:
        """Cost of ``S`` and of up to ``sample_size`` policy-sampled extensions; returns the minimum."""
        best = self.evaluate(S)
        probs = None
        for _ in range(self.sample_size):
            legal = self._legal(S)
            if len(legal) == 0:
                break
            if probs is None or self.config.reinvoke:
                probs = np.asarray(self.policy(self.inst, S), dtype=float)
            p = probs[legal]
            total = p.sum()
            p = p / total if total > 0 else np.full(len(legal), 1.0 / len(legal))
            a = int(legal[self.rng.choice(len(legal), p=p)])
            S = S | {a}
            best = min(best, self.evaluate(S))
        return best

    def run_round(self) -> None:
        node = self.root
        path = [node]
        while True:
            legal = self._legal(node.S)
            if len(legal) == 0:
                value = self.evaluate(node.S)
                break
            a = self.select_action(node, legal)
            node.N[a] = node.N.get(a, 0) + 1
            child = node.children.get(a)
            if child is None:
                child = SearchNode(node.S | {a}, node.depth + 1)
                node.children[a] = child
                path.append(child)
                self.height = max(self.height, child.depth)
                value = self.simulate(child.S)
                child.value = value
                break
            node = child
            path.append(node)
        for n in path:
            n.record(value)
        self.rounds += 1

    def run(self) -> Sparsification:
        base = self.evaluate(self.root.S)
        self.root.value = base
        self.root.record(base)
        while self.height < self.height_cap and self.rounds < self.max_rounds:
            self.run_round()
        return self.incumbent


def make_policy(model: PolicyModel | None) -> Policy:
    return uniform_policy if model is None else model.forward


def search(
    inst: Instance,
    model: PolicyModel | None = None,
    config: SearchConfig | None = None,
    construct: Callable | None = None,
) -> Sparsification:
    """Run the search; ``model=None`` gives the uniform-prior (random) variant."""
    return MCTS(inst, make_policy(model), config, construct).run()
