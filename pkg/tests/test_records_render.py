import json
import re

import pytest

from hpfold.benchmarks import BenchmarkEntry, load_benchmarks, parse_benchmarks
from hpfold.lattice import HpSequence, from_moves
from hpfold.records import FoldRecord, read_records, write_records
from hpfold.render import render_svg, render_text


def square():
    return from_moves(HpSequence("HHHH"), "LL")


def test_svg_of_unit_square():
    svg = render_svg(square())
    assert svg.count("<circle") == 4
    assert svg.count('class="bond"') == 3
    assert svg.count('class="contact"') == 1
    assert svg.count('class="residue H"') == 4
    assert ">S</text>" in svg and ">E</text>" in svg


def test_svg_straight_p_chain_has_no_contacts():
    svg = render_svg(from_moves(HpSequence("PPPPPP"), "FFFF"))
    assert svg.count('class="contact"') == 0
    assert svg.count('class="residue P"') == 6
    assert 'fill="white"' in svg


def test_svg_is_deterministic():
    s = from_moves(HpSequence("HPHPPHHPHPPH"), "LFLLRFLFLL")
    assert render_svg(s).encode() == render_svg(s).encode()


def test_text_render():
    text = render_text(square())
    rows = text.splitlines()
    assert rows[-1].endswith("contacts=1 energy=-1")
    grid = "\n".join(rows[:-1])
    assert grid.count("H") == 4 and grid.count(":") == 1
    assert grid.count("-") + grid.count("|") == 3


def test_record_round_trip(tmp_path):
    s = from_moves(HpSequence("HPHPPHHPHPPH"), "LFLLRFLFLL")
    rec = FoldRecord.from_state(s, id="a")
    assert rec.energy == -5 and rec.status == "complete" and rec.radius == 11
    path = tmp_path / "r.jsonl"
    write_records(path, [rec, FoldRecord.from_state(square())])
    back = read_records(path)
    assert back[0] == rec and back[1].id is None
    assert back[0].state().coords == s.coords
    assert json.loads(path.read_text().splitlines()[0])["energy"] == -5


@pytest.mark.parametrize("field, value", [("contacts", 4), ("energy", -2), ("status", "trapped"),
                                          ("coords", [[0, 0], [0, 1], [1, 1], [1, 0]])])
def test_record_rejects_inconsistent_fields(tmp_path, field, value):
    d = json.loads(FoldRecord.from_state(square()).to_json())
    d[field] = value
    path = tmp_path / "r.jsonl"
    path.write_text("\n" + json.dumps(d) + "\n")
    with pytest.raises(ValueError, match=re.escape(f"{path}:2")):
        read_records(path)


def test_record_missing_field(tmp_path):
    d = json.loads(FoldRecord.from_state(square()).to_json())
    del d["moves"]
    with pytest.raises(ValueError, match="moves"):
        FoldRecord.from_json(json.dumps(d))


def test_bundled_benchmarks():
    entries = load_benchmarks()
    assert [e.id for e in entries] == ["Seq1", "Seq2", "Seq3", "Seq4"]
    assert [e.upper_bound for e in entries] == [10, 10, 58, 78]
    assert [e.known_optimum for e in entries] == [9, 10, 53, None]
    assert [len(e.sequence) for e in entries] == [20, 20, 85, 162]


def test_benchmark_file_validation():
    good = "# id\tlength\tnotation\toptimum\tupper_bound\nS\t4\thhhh\t1\t4\n"
    assert parse_benchmarks(good) == [BenchmarkEntry("S", "hhhh", 1, 4)]
    with pytest.raises(ValueError):
        parse_benchmarks("S\t5\thhhh\t1\t4")
    with pytest.raises(ValueError):
        parse_benchmarks("S\t4\thhhh\t1\t3")
