"""Benchmark sequence files."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .lattice import HpSequence, SequenceError, parse_hp_string, upper_bound


@dataclass(frozen=True)
class BenchmarkEntry:
    id: str
    notation: str
    known_optimum: int | None
    upper_bound: int

    @property
    def sequence(self) -> HpSequence:
        return parse_hp_string(self.notation)


def parse_benchmarks(text: str, source: str = "<benchmarks>") -> list[BenchmarkEntry]:
    """Tab-separated ``id, length, sequence, optimum|NA, upper_bound``; ``#`` lines skipped."""
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise SequenceError(f"{source}:{n}: expected 5 tab-separated columns, got {len(cols)}")
        ident, length, notation, opt, bound = (c.strip() for c in cols)
        seq = parse_hp_string(notation)
        if len(seq) != int(length):
            raise SequenceError(f"{source}:{n}: {ident} expands to {len(seq)} residues, file says {length}")
        if upper_bound(seq) != int(bound):
            raise SequenceError(f"{source}:{n}: {ident} upper bound is {upper_bound(seq)}, file says {bound}")
        out.append(BenchmarkEntry(ident, notation, None if opt.upper() == "NA" else int(opt), int(bound)))
    return out


def load_benchmarks(path: str | Path | None = None) -> list[BenchmarkEntry]:
    """Entries from ``path``, or the four bundled length-20 to 162 sequences."""
    if path is None:
        text = resources.files("hpfold").joinpath("data/benchmarks.tsv").read_text()
        return parse_benchmarks(text, "benchmarks.tsv")
    return parse_benchmarks(Path(path).read_text(), str(path))
