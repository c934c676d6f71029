"""Print the 17 input planes the network sees after a few moves."""
from hpfold.encode import board_radius, dump_planes, encode_fold
from hpfold.lattice import HpSequence, Move, apply_move, opening

GRID = 9  # smallest grid that shows a 2-step neighbourhood

state = opening(HpSequence("HHPHH"), board_radius(GRID))
for m in (Move.LEFT, Move.LEFT):
    state = apply_move(state, m)
x = encode_fold(state, GRID)
print(f"shape {x.shape}, contacts so far {state.contacts}")
print(dump_planes(x))
