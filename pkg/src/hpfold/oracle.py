"""Exact branch-and-bound solver, rollout-UCT baseline and engine comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .lattice import (
    MOVES,
    NEIGHBOUR_OFFSETS,
    UP,
    FoldState,
    HpSequence,
    Move,
    Status,
    contact_bound,
    turn,
    upper_bound,
)


class OracleGuardError(ValueError):
    """Sequence too long for exhaustive search."""


@dataclass(frozen=True)
class OracleResult:
    optimum: int
    optimal_fold: tuple[Move, ...]
    count_optimal: int
    nodes: int

    @property
    def energy(self) -> int:
        return -self.optimum


def _future_bound(h: Sequence[bool]) -> list[int]:
    """``bound[t]`` caps the contacts residues ``t..n-1`` can still add.

    An interior residue gains at most 2 contacts when placed (a third would
    trap the chain); the last residue can gain 3.
    """
    n = len(h)
    bound = [0] * (n + 1)
    for t in range(n - 1, -1, -1):
        gain = (3 if t == n - 1 else 2) if h[t] else 0
        bound[t] = bound[t + 1] + gain
    return bound


def oracle_solve(sequence: HpSequence, max_length_guard: int = 16, prune: bool = True,
                 count: bool = True) -> OracleResult:
    """Exhaustive depth-first search over all folds from the fixed opening.

    With ``prune`` the search cuts branches whose admissible bound falls below
    the incumbent, and (when ``count`` is false) stops as soon as the
    incumbent reaches :func:`contact_bound`. ``count_optimal`` counts distinct
    optimal complete folds; it is exact whenever ``count`` is true.
    """
    n = len(sequence)
    if n > max_length_guard:
        raise OracleGuardError(
            f"length {n} exceeds the oracle guard {max_length_guard}; use the search engine instead"
        )
    h = sequence.h_mask
    future = _future_bound(h)
    ceiling = contact_bound(sequence)
    occupied: dict[tuple[int, int], int] = {(0, 0): 0, UP: 1}
    moves: list[Move] = []
    best = -1
    best_count = 0
    witness: tuple[Move, ...] = ()
    nodes = 0
    stop = False

    def dfs(t: int, head, heading, contacts: int):
        nonlocal best, best_count, witness, nodes, stop
        nodes += 1
        if t == n:
            if contacts > best:
                best, best_count, witness = contacts, 1, tuple(moves)
                if prune and not count and best >= ceiling:
                    stop = True
            elif contacts == best:
                best_count += 1
            return
        if prune and contacts + future[t] < best:
            return
        for m in MOVES:
            d = turn(heading, m)
            c = (head[0] + d[0], head[1] + d[1])
            if c in occupied:
                continue
            gain = 0
            if h[t]:
                for ox, oy in NEIGHBOUR_OFFSETS:
                    j = occupied.get((c[0] + ox, c[1] + oy))
                    if j is not None and j < t - 1 and h[j]:
                        gain += 1
            occupied[c] = t
            moves.append(m)
            dfs(t + 1, c, d, contacts + gain)
            moves.pop()
            del occupied[c]
            if stop:
                return

    dfs(2, UP, UP, 0)
    return OracleResult(best, witness, best_count, nodes)


def enumerate_folds(sequence: HpSequence):
    """Yield every complete fold as ``(moves, contacts)``; brute force, no pruning."""
    from .lattice import apply_move, legal_moves, opening

    stack = [opening(sequence)]
    while stack:
        s = stack.pop()
        if s.step == len(sequence):
            yield s.moves, s.contacts
            continue
        for m in legal_moves(s):
            stack.append(apply_move(s, m))


@dataclass
class RolloutConfig:
    simulations: int = 1000
    exploration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be at least 1")
        if self.exploration <= 0:
            raise ValueError("exploration constant must be positive")


def random_rollout(state: FoldState, rng: np.random.Generator) -> int:
    """Play uniformly random legal moves until complete or trapped; return contacts."""
    h = state.sequence.h_mask
    n = len(h)
    r = state.radius
    occupied = dict(state.index)
    (x0, y0), (x, y) = state.coords[-2], state.coords[-1]
    heading = (x - x0, y - y0)
    contacts = state.contacts
    for t in range(state.step, n):
        options = []
        for m in MOVES:
            d = turn(heading, m)
            c = (x + d[0], y + d[1])
            if c not in occupied and abs(c[0]) <= r and abs(c[1]) <= r:
                options.append((c, d))
        if not options:
            break
        (cx, cy), heading = options[int(rng.integers(len(options)))] if len(options) > 1 else options[0]
        if h[t]:
            for ox, oy in NEIGHBOUR_OFFSETS:
                j = occupied.get((cx + ox, cy + oy))
                if j is not None and j < t - 1 and h[j]:
                    contacts += 1
        occupied[(cx, cy)] = t
        x, y = cx, cy
    return contacts


class RolloutEvaluator:
    """Uniform priors; the value of a leaf is one random rollout from it."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def evaluate(self, states):
        values = np.array([random_rollout(s, self.rng) for s in states], dtype=float)
        return np.full((len(states), 3), 1 / 3), values


def rollout_uct_fold(sequence: HpSequence, config: RolloutConfig | None = None, radius: int | None = None):
    """Fold with plain UCT: uniform priors and random-rollout leaf values."""
    from .search import SearchConfig
    from .selfplay import fold_episode

    config = config or RolloutConfig()
    search = SearchConfig(simulations=config.simulations, c_alpha=config.exploration)
    return fold_episode(sequence, RolloutEvaluator(config.seed), search, noise=False, radius=radius)


Engine = Callable[[HpSequence], int]


@dataclass
class ComparisonRow:
    id: str
    sequence: HpSequence
    upper_bound: int
    known_optimum: int | None = None
    contacts: dict[str, int | None] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)


@dataclass
class ComparisonTable:
    engines: list[str]
    rows: list[ComparisonRow]

    def totals(self) -> dict[str, int]:
        return {e: sum(r.contacts.get(e) or 0 for r in self.rows) for e in self.engines}

    def violations(self) -> list[tuple[str, str]]:
        """``(row id, engine)`` cells whose contacts exceed the row's upper bound."""
        return [(r.id, e) for r in self.rows for e in self.engines
                if r.contacts.get(e) is not None and r.contacts[e] > r.upper_bound]

    def to_tsv(self) -> str:
        """Energies per engine (negated contacts); failed cells hold their note."""
        head = ["id", "length", "upper_bound", "optimum"] + self.engines
        lines = ["\t".join(head)]
        for r in self.rows:
            cells = [r.id, str(len(r.sequence)), str(-r.upper_bound),
                     "NA" if r.known_optimum is None else str(-r.known_optimum)]
            for e in self.engines:
                c = r.contacts.get(e)
                cells.append(str(-c) if c is not None else r.notes.get(e, "NA"))
            lines.append("\t".join(cells))
        totals = self.totals()
        lines.append("\t".join(["total", "", "", ""] + [str(-totals[e]) for e in self.engines]))
        return "\n".join(lines) + "\n"


def compare_engines(sequences, engines: Mapping[str, Engine],
                    known_optima: Sequence[int | None] | None = None) -> ComparisonTable:
    """Run every engine on every sequence and tabulate contacts.

    ``sequences`` holds :class:`HpSequence` objects or ``(id, sequence)`` pairs.
    A failing engine only marks its own cell.
    """
    rows = []
    for k, item in enumerate(sequences):
        ident, seq = item if isinstance(item, tuple) else (f"seq{k + 1}", item)
        opt = known_optima[k] if known_optima is not None else None
        row = ComparisonRow(ident, seq, upper_bound(seq), opt)
        for name, engine in engines.items():
            try:
                row.contacts[name] = int(engine(seq))
            except OracleGuardError:
                row.contacts[name] = None
                row.notes[name] = "skipped (guard)"
            except Exception as exc:  # recorded per cell; the comparison goes on
                row.contacts[name] = None
                row.notes[name] = f"error: {type(exc).__name__}"
        rows.append(row)
    return ComparisonTable(list(engines), rows)


def oracle_engine(max_length_guard: int = 16) -> Engine:
    return lambda seq: oracle_solve(seq, max_length_guard, count=False).optimum


def rollout_engine(config: RolloutConfig | None = None) -> Engine:
    return lambda seq: rollout_uct_fold(seq, config).contacts.contacts
