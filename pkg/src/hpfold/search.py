"""Regularized UCT search over relative folding moves.

Values and Q statistics are kept in raw contact counts; the upper bound only
enters the selection score. A search policy is a length-3 array indexed by
:class:`~hpfold.lattice.Move` with zeros on illegal moves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .lattice import (
    MOVES,
    FoldState,
    Move,
    Status,
    apply_move,
    contact_bound,
    is_terminal,
    legal_moves,
    upper_bound,
)


class Evaluator(Protocol):
    """Anything that maps states to (priors over F/L/R, value in contacts)."""

    def evaluate(self, states: Sequence[FoldState]) -> tuple[np.ndarray, np.ndarray]: ...


class UniformEvaluator:
    """Uniform priors and a constant value; the search baseline for tests."""

    def __init__(self, value: float = 0.0):
        self.value = value
        self.calls = 0

    def evaluate(self, states):
        self.calls += len(states)
        n = len(states)
        return np.full((n, 3), 1 / 3), np.full(n, self.value, dtype=float)


@dataclass
class SearchConfig:
    simulations: int = 300
    c_alpha: float = 1.0
    dirichlet_alpha: float = 0.03
    dirichlet_epsilon: float = 0.25

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be positive")
        if self.c_alpha <= 0 or self.dirichlet_alpha <= 0:
            raise ValueError("c_alpha and dirichlet_alpha must be positive")
        if not 0 <= self.dirichlet_epsilon <= 1:
            raise ValueError("dirichlet_epsilon must lie in [0, 1]")


@dataclass(slots=True)
class EdgeStats:
    prior: float
    visits: int = 0
    total: float = 0.0
    child: "Node | None" = None

    @property
    def mean(self) -> float:
        return self.total / self.visits if self.visits else 0.0


class Node:
    __slots__ = ("state", "status", "edges")

    def __init__(self, state: FoldState):
        self.state = state
        self.status = is_terminal(state)
        self.edges: dict[Move, EdgeStats] | None = None

    @property
    def expanded(self) -> bool:
        return self.edges is not None

    @property
    def terminal(self) -> bool:
        return self.status is not Status.ONGOING

    def visit_counts(self) -> np.ndarray:
        out = np.zeros(3)
        for m, e in (self.edges or {}).items():
            out[m] = e.visits
        return out


def select_action(node: Node, r_upper: float, c_alpha: float) -> Move:
    """Argmax of ``Q/r_upper + c_alpha * P * sqrt(sum N) / (1 + N)``.

    Ties go to the earliest move in Forward, Left, Right order. With
    ``r_upper == 0`` the exploitation term is dropped.
    """
    edges = node.edges
    if not edges:
        raise ValueError("cannot select from a node without edges")
    sqrt_total = math.sqrt(sum(e.visits for e in edges.values()))
    best_move, best_score = None, -math.inf
    for move in MOVES:
        e = edges.get(move)
        if e is None:
            continue
        q = e.total / e.visits / r_upper if (e.visits and r_upper > 0) else 0.0
        score = q + c_alpha * e.prior * sqrt_total / (1 + e.visits)
        if score > best_score:
            best_move, best_score = move, score
    return best_move


def expand(node: Node, priors: Sequence[float]) -> None:
    """Create edges for every legal move with priors renormalized over them."""
    moves = legal_moves(node.state)
    p = np.array([max(float(priors[m]), 0.0) for m in moves])
    total = p.sum()
    p = p / total if total > 0 else np.full(len(moves), 1 / len(moves))
    node.edges = {m: EdgeStats(float(pm)) for m, pm in zip(moves, p)}


def clamp_value(state: FoldState, value: float) -> float:
    """Restrict an estimate to what the fold can still reach.

    Contacts never disappear, so the current count is a floor; the ceiling is
    :func:`~hpfold.lattice.contact_bound`.
    """
    if not math.isfinite(value):
        raise FloatingPointError(f"evaluator returned non-finite value {value}")
    return min(max(value, float(state.contacts)), float(contact_bound(state.sequence)))


def expand_and_evaluate(leaf: Node, evaluator: Evaluator) -> float:
    """Expand ``leaf`` with evaluator priors and return its value.

    Complete and trapped leaves are scored exactly and not expanded.
    """
    if leaf.terminal:
        return float(leaf.state.contacts)
    priors, values = evaluator.evaluate([leaf.state])
    expand(leaf, priors[0])
    return clamp_value(leaf.state, float(values[0]))


def backpropagate(path: Sequence[tuple[Node, Move]], value: float) -> None:
    for node, move in path:
        e = node.edges[move]
        e.visits += 1
        e.total += value


def add_dirichlet_noise(node: Node, alpha: float, epsilon: float, rng: np.random.Generator) -> None:
    moves = list(node.edges)
    noise = rng.dirichlet([alpha] * len(moves))
    if not np.all(np.isfinite(noise)):
        return
    for m, lam in zip(moves, noise):
        e = node.edges[m]
        e.prior = (1 - epsilon) * e.prior + epsilon * float(lam)


class SearchTree:
    """One per-episode search tree; the root advances as residues are placed."""

    def __init__(self, root_state: FoldState, config: SearchConfig | None = None):
        self.config = config or SearchConfig()
        self.root = Node(root_state)
        self.r_upper = upper_bound(root_state.sequence)

    def descend(self) -> tuple[list[tuple[Node, Move]], Node]:
        """Select from the root down to an unexpanded or terminal node."""
        node, path = self.root, []
        cfg = self.config
        while node.expanded and not node.terminal:
            move = select_action(node, self.r_upper, cfg.c_alpha)
            edge = node.edges[move]
            if edge.child is None:
                edge.child = Node(apply_move(node.state, move))
            path.append((node, move))
            node = edge.child
        return path, node

    def simulate(self, evaluator: Evaluator) -> None:
        path, leaf = self.descend()
        backpropagate(path, expand_and_evaluate(leaf, evaluator))

    def policy(self) -> np.ndarray:
        counts = self.root.visit_counts()
        return counts / counts.sum()

    def run(self, evaluator: Evaluator, add_noise: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
        return run_searches([self], evaluator, add_noise, [rng])[0]

    def advance(self, move: Move) -> Node:
        self.root = advance_root(self, move)
        return self.root

    def trace(self) -> list[dict]:
        """Root edge statistics as plain records."""
        pi = self.policy() if self.root.visit_counts().sum() else np.zeros(3)
        return [
            {"move": m.letter, "N": e.visits, "W": e.total, "Q": e.mean, "P": e.prior, "pi": float(pi[m])}
            for m, e in (self.root.edges or {}).items()
        ]


def run_searches(trees: Sequence[SearchTree], evaluator: Evaluator, add_noise: bool = False,
                 rngs: Sequence[np.random.Generator | None] | None = None) -> list[np.ndarray]:
    """Run every tree's search in lockstep, batching leaf evaluations.

    Each tree sees exactly the same sequence of operations it would see when
    searched alone, so results do not depend on how trees are grouped.
    """
    rngs = list(rngs) if rngs is not None else [None] * len(trees)
    for t in trees:
        if t.root.terminal:
            raise ValueError(f"cannot search from a {t.root.status.value} root")
    fresh = [t for t in trees if not t.root.expanded]
    if fresh:
        priors, _ = evaluator.evaluate([t.root.state for t in fresh])
        for t, p in zip(fresh, priors):
            expand(t.root, p)
    if add_noise:
        for t, rng in zip(trees, rngs):
            if rng is None:
                raise ValueError("noise requested without a random generator")
            add_dirichlet_noise(t.root, t.config.dirichlet_alpha, t.config.dirichlet_epsilon, rng)

    # A reused root already holds visits from the previous decision; only the
    # remainder of the budget is simulated so the root always ends at exactly
    # ``simulations`` visits.
    budgets = [max(t.config.simulations - int(t.root.visit_counts().sum()), 0) for t in trees]
    for k in range(max(budgets, default=0)):
        pending = []
        for t, budget in zip(trees, budgets):
            if k >= budget:
                continue
            path, leaf = t.descend()
            if leaf.terminal:
                backpropagate(path, float(leaf.state.contacts))
            else:
                pending.append((path, leaf))
        if pending:
            priors, values = evaluator.evaluate([leaf.state for _, leaf in pending])
            for (path, leaf), p, v in zip(pending, priors, values):
                expand(leaf, p)
                backpropagate(path, clamp_value(leaf.state, float(v)))
    return [t.policy() for t in trees]


def run_search(root_state: FoldState, evaluator: Evaluator, config: SearchConfig | None = None,
               add_noise: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """Search from a fresh root and return the visit-count policy."""
    return SearchTree(root_state, config).run(evaluator, add_noise, rng)


def choose_move(policy: Sequence[float]) -> Move:
    """Most visited move; ties resolved Forward < Left < Right."""
    return Move(int(np.argmax(policy)))


def advance_root(tree: SearchTree, move: Move) -> Node:
    """The child reached by ``move``, keeping its subtree statistics."""
    edges = tree.root.edges
    if edges is None or move not in edges:
        raise ValueError(f"no edge for {move.name} at the current root")
    child = edges[move].child
    return child if child is not None else Node(apply_move(tree.root.state, move))
