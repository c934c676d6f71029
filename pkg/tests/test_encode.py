import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpfold.encode import (
    NEXT_RESIDUE_PLANE,
    PLANES,
    board_radius,
    decode_frame,
    dump_planes,
    encode_fold,
    encode_state,
    grid_to_lattice,
    history_of,
    lattice_to_grid,
    mirror_planes,
)
from hpfold.lattice import HpSequence, Status, apply_move, from_moves, is_terminal, legal_moves, opening

GRID = 41


def random_episode(rng, length, radius=None):
    seq = HpSequence("".join(rng.choice(["H", "P"], size=length)))
    s = opening(seq, radius)
    states = [s]
    while is_terminal(s) is Status.ONGOING:
        moves = legal_moves(s)
        s = apply_move(s, moves[rng.integers(len(moves))])
        states.append(s)
    return states


def kind(point):
    i, j = point
    if i % 2 == 0 and j % 2 == 0:
        return "vertex"
    if i % 2 and j % 2:
        return "dead"
    return "edge"


def test_board_radius():
    assert board_radius(41) == 10
    assert board_radius(5) == 1
    for bad in (3, 7, 40, 1):
        with pytest.raises(ValueError):
            board_radius(bad)


def test_grid_round_trip():
    for c in [(0, 0), (-10, 10), (3, -7)]:
        assert grid_to_lattice(lattice_to_grid(c, GRID), GRID) == c
    with pytest.raises(ValueError):
        lattice_to_grid((11, 0), GRID)
    with pytest.raises(ValueError):
        grid_to_lattice((1, 0), GRID)


def test_opening_frames():
    x = encode_fold(opening(HpSequence("HPPH")), GRID)
    assert x.shape == (PLANES, GRID, GRID) and x.dtype == np.uint8
    assert not x[4:16].any()
    acts = decode_frame(x, 1)
    assert sum(kind(p) == "vertex" for p, _ in acts) == 2
    assert [c for _, c in acts if c in "CB"] == ["C"]


def test_next_residue_plane():
    h = encode_fold(opening(HpSequence("HPHH")), GRID)
    assert h[NEXT_RESIDUE_PLANE].sum() == GRID * GRID
    p = encode_fold(opening(HpSequence("HPPH")), GRID)
    assert p[NEXT_RESIDUE_PLANE].sum() == 0


def test_square_has_single_contact_edge():
    s = from_moves(HpSequence("HHHH"), "LL")
    acts = decode_frame(encode_fold(s, GRID), 1)
    b = [p for p, c in acts if c == "B"]
    assert len(b) == 1
    a, d = lattice_to_grid(s.coords[0], GRID), lattice_to_grid(s.coords[3], GRID)
    assert b[0] == ((a[0] + d[0]) // 2, (a[1] + d[1]) // 2)


def test_history_frames_are_prefixes():
    s = from_moves(HpSequence("HPHPHPH"), "LRLRL")
    hist = history_of(s)
    assert [h.step for h in hist] == [7, 6, 5, 4]
    assert [h.step for h in history_of(s.prefix(3))] == [3, 2]
    x = encode_fold(s, GRID)
    for k, h in enumerate(hist, 1):
        assert decode_frame(x, k) == decode_frame(encode_fold(h, GRID), 1)


def test_walk_outside_grid_rejected():
    s = from_moves(HpSequence("P" * 6), "FFF")
    with pytest.raises(ValueError):
        encode_fold(s, 9)


def test_decode_frame_errors_and_empty():
    x = np.zeros((PLANES, 9, 9), dtype=np.uint8)
    assert decode_frame(x, 3) == set()
    for bad in (0, 5):
        with pytest.raises(ValueError):
            decode_frame(x, bad)


def test_random_episode_invariants():
    rng = np.random.default_rng(7)
    folds = 0
    while folds < 1000:
        episode = random_episode(rng, int(rng.integers(3, 17)), board_radius(GRID))
        prev = None
        for s in episode:
            x = encode_fold(s, GRID)
            folds += 1
            for f in range(4):
                frame = x[4 * f : 4 * f + 4]
                assert frame.sum(axis=0).max() <= 1
                assert not frame[:, 1::2, 1::2].any()
                assert not frame[0:2, 1::2, :].any() and not frame[0:2, :, 1::2].any()
                assert not frame[2:4, 0::2, 0::2].any()
            cur = decode_frame(x, 1)
            assert sum(c == "C" for _, c in cur) == s.step - 1
            assert sum(c == "B" for _, c in cur) == s.contacts
            assert len(cur) == 2 * s.step - 1 + s.contacts
            plane = x[NEXT_RESIDUE_PLANE]
            assert plane.min() == plane.max()
            if prev is not None:
                assert prev <= cur
            prev = cur


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_reproduces_occupancy(seed):
    s = random_episode(np.random.default_rng(seed), 10)[-1]
    acts = decode_frame(encode_fold(s, GRID), 1)
    occ = {grid_to_lattice(p, GRID): c for p, c in acts if c in "HP"}
    assert occ == {c: s.sequence[i] for i, c in enumerate(s.coords)}


def test_encoding_is_deterministic():
    s = random_episode(np.random.default_rng(3), 12)[-1]
    a = encode_state(history_of(s), s.next_residue, GRID)
    b = encode_state(history_of(s), s.next_residue, GRID)
    assert a.tobytes() == b.tobytes()


def test_dump_planes_mentions_residue_type():
    text = dump_planes(encode_fold(opening(HpSequence("HHHH")), 9))
    assert text.splitlines()[0] == "frame 1"
    assert text.endswith("next residue: H")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mirror_equals_encoding_of_reflected_fold(seed):
    rng = np.random.default_rng(seed)
    grid = 21
    for s in random_episode(rng, int(rng.integers(3, 14)), board_radius(grid)):
        swapped = "".join({"L": "R", "R": "L"}.get(m.letter, m.letter) for m in s.moves)
        twin = from_moves(s.sequence, swapped, s.radius)
        assert twin.contacts == s.contacts
        assert np.array_equal(mirror_planes(encode_fold(s, grid)), encode_fold(twin, grid))
