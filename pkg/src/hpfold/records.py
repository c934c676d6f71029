"""Fold records: one JSON object per line.

Each line has the keys ``sequence`` (H/P string), ``moves`` (string over
F/L/R for residues 3..n), ``coords`` (list of ``[x, y]``), ``contacts``,
``energy``, ``status`` (complete/trapped/ongoing) and ``radius`` (the board
radius the fold was made on). ``id`` is optional. Reading a record replays the moves and
rejects any field that disagrees with the replay.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .lattice import FoldState, HpSequence, from_moves, is_terminal


@dataclass(frozen=True)
class FoldRecord:
    sequence: str
    moves: str
    coords: tuple[tuple[int, int], ...]
    contacts: int
    status: str
    radius: int
    id: str | None = None

    @property
    def energy(self) -> int:
        return -self.contacts

    @classmethod
    def from_state(cls, state: FoldState, id: str | None = None) -> "FoldRecord":
        return cls(str(state.sequence), "".join(m.letter for m in state.moves), state.coords,
                   state.contacts, is_terminal(state).value, state.radius, id)

    def state(self) -> FoldState:
        return from_moves(HpSequence(self.sequence), self.moves, self.radius)

    def to_json(self) -> str:
        d = {"sequence": self.sequence, "moves": self.moves, "coords": [list(c) for c in self.coords],
             "contacts": self.contacts, "energy": self.energy, "status": self.status, "radius": self.radius}
        if self.id is not None:
            d["id"] = self.id
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "FoldRecord":
        d = json.loads(line)
        try:
            rec = cls(d["sequence"], d["moves"], tuple(tuple(c) for c in d["coords"]), int(d["contacts"]),
                      d["status"], int(d["radius"]), d.get("id"))
        except KeyError as exc:
            raise ValueError(f"fold record lacks field {exc}") from None
        st = rec.state()
        if st.coords != rec.coords:
            raise ValueError("coords disagree with the move string")
        if st.contacts != rec.contacts or d.get("energy", -st.contacts) != -st.contacts:
            raise ValueError(f"contacts/energy disagree with the fold ({st.contacts} contacts)")
        if rec.status != is_terminal(st).value:
            raise ValueError("status disagrees with the fold")
        return rec


def write_records(path: str | Path, records: Iterable[FoldRecord]) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records))


def read_records(path: str | Path) -> list[FoldRecord]:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.strip():
            try:
                out.append(FoldRecord.from_json(line))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: {exc}") from exc
    return out
