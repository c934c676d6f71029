"""The 2D square-lattice HP world.

Sequences, relative moves, self-avoiding walk states, H-H contact scoring and
contact upper bounds. Residue 1 always sits at the origin and residue 2 one
cell above it, so every fold is identified by its list of relative moves for
residues 3..n.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

Coord = tuple[int, int]

# Headings as unit vectors, y pointing up.
UP: Coord = (0, 1)
DOWN: Coord = (0, -1)
EAST: Coord = (1, 0)
WEST: Coord = (-1, 0)

NEIGHBOUR_OFFSETS: tuple[Coord, ...] = (EAST, UP, WEST, DOWN)

HYDROPHOBIC_AMINO_ACIDS = frozenset("ACFILMVWY")
STANDARD_AMINO_ACIDS = frozenset("ACDEFGHIKLMNPQRSTVWY")


class SequenceError(ValueError):
    """Raised for malformed HP or amino-acid input."""


class IllegalMoveError(ValueError):
    """Raised when a move targets an occupied or out-of-board cell."""


class Move(enum.IntEnum):
    """Relative move of the next residue w.r.t. the current heading.

    The integer value doubles as the policy-vector index and the tie-break
    order (Forward < Left < Right).
    """

    FORWARD = 0
    LEFT = 1
    RIGHT = 2

    @property
    def letter(self) -> str:
        return "FLR"[self]

    @classmethod
    def from_letter(cls, letter: str) -> "Move":
        try:
            return cls("FLR".index(letter.upper()))
        except ValueError:
            raise ValueError(f"unknown move letter {letter!r}") from None


MOVES: tuple[Move, ...] = (Move.FORWARD, Move.LEFT, Move.RIGHT)


def turn(heading: Coord, move: Move) -> Coord:
    """Absolute direction obtained by applying ``move`` to ``heading``."""
    dx, dy = heading
    if move is Move.FORWARD:
        return heading
    if move is Move.LEFT:
        return (-dy, dx)
    return (dy, -dx)


def relative_move(heading: Coord, direction: Coord) -> Move:
    """Inverse of :func:`turn`."""
    for move in MOVES:
        if turn(heading, move) == direction:
            return move
    raise ValueError(f"direction {direction} is a reversal of heading {heading}")


@dataclass(frozen=True)
class HpSequence:
    residues: str

    def __post_init__(self):
        if len(self.residues) < 2:
            raise SequenceError("an HP sequence needs at least 2 residues")
        bad = set(self.residues) - {"H", "P"}
        if bad:
            raise SequenceError(f"invalid residue letters {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.residues)

    def __getitem__(self, i):
        return self.residues[i]

    def __iter__(self) -> Iterator[str]:
        return iter(self.residues)

    def __str__(self) -> str:
        return self.residues

    @cached_property
    def h_mask(self) -> tuple[bool, ...]:
        return tuple(r == "H" for r in self.residues)

    @property
    def h_count(self) -> int:
        return self.residues.count("H")

    def reversed(self) -> "HpSequence":
        return HpSequence(self.residues[::-1])


_TOKEN = re.compile(r"\s*([hpHP()]|\d+)")


def parse_hp_string(text: str) -> HpSequence:
    """Parse a plain H/P string or run-length notation such as ``(hp)2ph``.

    A number repeats the letter or parenthesised group immediately before it.
    """
    text = text.strip()
    bad = sorted(set(text) - set("hpHP()0123456789"))
    if bad:
        raise SequenceError(f"invalid characters {bad} in {text!r}")
    tokens = [m.group(1) for m in _TOKEN.finditer(text)]
    pos = 0

    def group(depth: int) -> str:
        nonlocal pos
        out: list[str] = []
        while pos < len(tokens):
            tok = tokens[pos]
            if tok == ")":
                if depth == 0:
                    raise SequenceError(f"unbalanced ')' in {text!r}")
                pos += 1
                return "".join(out)
            pos += 1
            if tok == "(":
                item = group(depth + 1)
                if not item:
                    raise SequenceError(f"empty group in {text!r}")
            elif tok.isdigit():
                raise SequenceError(f"repeat count {tok} without a preceding group in {text!r}")
            else:
                item = tok.upper()
            if pos < len(tokens) and tokens[pos].isdigit():
                item = item * int(tokens[pos])
                pos += 1
            out.append(item)
        if depth > 0:
            raise SequenceError(f"unbalanced '(' in {text!r}")
        return "".join(out)

    return HpSequence(group(0))


def translate_amino_acids(text: str) -> HpSequence:
    """Map one-letter amino-acid codes to H (hydrophobic) or P (polar)."""
    if not text:
        raise SequenceError("empty amino-acid sequence")
    out = []
    for i, aa in enumerate(text.upper()):
        if aa not in STANDARD_AMINO_ACIDS:
            raise SequenceError(f"unknown amino acid {aa!r} at position {i + 1}")
        out.append("H" if aa in HYDROPHOBIC_AMINO_ACIDS else "P")
    return HpSequence("".join(out))


def read_sequences(lines: Iterable[str]) -> list[HpSequence]:
    """Parse a sequence file: one sequence per line, ``#`` comments skipped."""
    seqs = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        seqs.append(parse_hp_string(line))
    return seqs


def upper_bound(sequence: HpSequence) -> int:
    """``2 * min(O, E)`` with O/E the H counts at odd/even 1-indexed positions."""
    odd = sum(sequence.h_mask[0::2])
    even = sum(sequence.h_mask[1::2])
    return 2 * min(odd, even)


def contact_bound(sequence: HpSequence) -> int:
    """Parity bound that also accounts for the third free neighbour of chain ends.

    Lattice neighbours always have opposite index parity, an interior residue
    has at most 2 non-chain neighbours and an end residue at most 3. Unlike
    :func:`upper_bound` this one can never be exceeded by a complete fold.
    """
    h = sequence.h_mask
    n = len(h)
    if n < 4:
        return 0
    ends = (0, n - 1)
    odd = sum(h[0::2]) * 2 + sum(1 for i in ends if h[i] and i % 2 == 0)
    even = sum(h[1::2]) * 2 + sum(1 for i in ends if h[i] and i % 2 == 1)
    return min(odd, even)


class Status(enum.Enum):
    ONGOING = "ongoing"
    COMPLETE = "complete"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class ContactScore:
    contacts: int

    @property
    def energy(self) -> int:
        return -self.contacts


@dataclass(frozen=True, eq=False)
class FoldState:
    """A partial self-avoiding walk of ``sequence``.

    ``radius`` bounds the board: every coordinate satisfies
    ``max(|x|, |y|) <= radius``. Use :func:`opening` to build the first state.
    """

    sequence: HpSequence
    coords: tuple[Coord, ...]
    radius: int
    contacts: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    @property
    def step(self) -> int:
        return len(self.coords)

    @property
    def head(self) -> Coord:
        return self.coords[-1]

    @property
    def heading(self) -> Coord:
        (x0, y0), (x1, y1) = self.coords[-2], self.coords[-1]
        return (x1 - x0, y1 - y0)

    @property
    def occupancy(self) -> frozenset[Coord]:
        return frozenset(self.index)

    @property
    def index(self) -> dict[Coord, int]:
        """Coordinate -> residue index (0-based) of placed residues."""
        return self._index

    @property
    def next_residue(self) -> str | None:
        return self.sequence[self.step] if self.step < len(self.sequence) else None

    @property
    def moves(self) -> tuple[Move, ...]:
        """Relative moves of residues 3..t, reconstructed from coordinates."""
        out = []
        for i in range(2, self.step):
            (ax, ay), (bx, by), (cx, cy) = self.coords[i - 2 : i + 1]
            out.append(relative_move((bx - ax, by - ay), (cx - bx, cy - by)))
        return tuple(out)

    def in_bounds(self, c: Coord) -> bool:
        return abs(c[0]) <= self.radius and abs(c[1]) <= self.radius

    def target(self, move: Move) -> Coord:
        dx, dy = turn(self.heading, move)
        x, y = self.head
        return (x + dx, y + dy)

    def prefix(self, t: int) -> "FoldState":
        """The state after the first ``t`` residues (``t >= 2``)."""
        if not 2 <= t <= self.step:
            raise ValueError(f"prefix length {t} outside [2, {self.step}]")
        if t == self.step:
            return self
        return _build(self.sequence, self.coords[:t], self.radius)

    def __eq__(self, other):
        if not isinstance(other, FoldState):
            return NotImplemented
        return (self.sequence, self.coords, self.radius) == (other.sequence, other.coords, other.radius)

    def __hash__(self):
        return hash((self.sequence, self.coords, self.radius))


def _count_new_contacts(h_mask, index: dict, coord: Coord, i: int) -> int:
    if not h_mask[i]:
        return 0
    x, y = coord
    n = 0
    for dx, dy in NEIGHBOUR_OFFSETS:
        j = index.get((x + dx, y + dy))
        if j is not None and j < i - 1 and h_mask[j]:
            n += 1
    return n


def _build(sequence: HpSequence, coords: Sequence[Coord], radius: int) -> FoldState:
    index: dict[Coord, int] = {}
    contacts = 0
    h = sequence.h_mask
    for i, c in enumerate(coords):
        if c in index:
            raise IllegalMoveError(f"coordinate {c} visited twice")
        if i and abs(c[0] - coords[i - 1][0]) + abs(c[1] - coords[i - 1][1]) != 1:
            raise IllegalMoveError(f"residues {i} and {i + 1} are not lattice-adjacent")
        if max(abs(c[0]), abs(c[1])) > radius:
            raise IllegalMoveError(f"coordinate {c} outside board radius {radius}")
        contacts += _count_new_contacts(h, index, c, i)
        index[c] = i
    return FoldState(sequence, tuple(coords), radius, contacts, index)


def opening(sequence: HpSequence, radius: int | None = None) -> FoldState:
    """Residue 1 at the origin, residue 2 one cell up (heading UP)."""
    if radius is None:
        radius = len(sequence) - 1
    if radius < 1:
        raise ValueError("board radius must be at least 1")
    return _build(sequence, ((0, 0), UP), radius)


def from_coords(sequence: HpSequence, coords: Sequence[Coord], radius: int | None = None) -> FoldState:
    coords = [tuple(c) for c in coords]
    if len(coords) < 2 or coords[0] != (0, 0) or coords[1] != UP:
        raise IllegalMoveError("walk must start with the fixed opening (0,0),(0,1)")
    if len(coords) > len(sequence):
        raise IllegalMoveError("more coordinates than residues")
    return _build(sequence, coords, len(sequence) - 1 if radius is None else radius)


def from_moves(sequence: HpSequence, moves: Iterable[Move | str], radius: int | None = None) -> FoldState:
    state = opening(sequence, radius)
    for m in moves:
        state = apply_move(state, m if isinstance(m, Move) else Move.from_letter(m))
    return state


def legal_moves(state: FoldState) -> list[Move]:
    """Moves whose target is free and on the board, in Forward/Left/Right order."""
    if state.step >= len(state.sequence):
        return []
    idx = state.index
    return [m for m in MOVES if (t := state.target(m)) not in idx and state.in_bounds(t)]


def apply_move(state: FoldState, move: Move) -> FoldState:
    if state.step >= len(state.sequence):
        raise IllegalMoveError("fold is already complete")
    t = state.target(move)
    if t in state.index:
        raise IllegalMoveError(f"{move.name} targets occupied cell {t}")
    if not state.in_bounds(t):
        raise IllegalMoveError(f"{move.name} leaves the board at {t}")
    i = state.step
    index = dict(state.index)
    contacts = state.contacts + _count_new_contacts(state.sequence.h_mask, index, t, i)
    index[t] = i
    return FoldState(state.sequence, state.coords + (t,), state.radius, contacts, index)


def hh_contacts(state: FoldState) -> ContactScore:
    return ContactScore(state.contacts)


def contact_pairs(state: FoldState) -> list[tuple[int, int]]:
    """All H-H topological contacts ``(i, j)`` with ``i < j - 1`` (0-based)."""
    h = state.sequence.h_mask
    idx = state.index
    pairs = []
    for c, j in idx.items():
        if not h[j]:
            continue
        for dx, dy in NEIGHBOUR_OFFSETS:
            i = idx.get((c[0] + dx, c[1] + dy))
            if i is not None and i < j - 1 and h[i]:
                pairs.append((i, j))
    return sorted(pairs)


def is_terminal(state: FoldState) -> Status:
    if state.step == len(state.sequence):
        return Status.COMPLETE
    if not legal_moves(state):
        return Status.TRAPPED
    return Status.ONGOING
