"""Solve a short sequence exactly and draw the optimal fold.

    python demos/fold_and_render.py "hphpphhphpph" out/
"""
import sys
from pathlib import Path

from hpfold.lattice import from_moves, parse_hp_string, upper_bound
from hpfold.oracle import oracle_solve
from hpfold.render import render_svg, render_text


def main(text="hphpphhphpph", out="."):
    seq = parse_hp_string(text)
    result = oracle_solve(seq)
    fold = from_moves(seq, result.optimal_fold)
    print(f"{seq}: optimum {result.optimum} contacts ({result.count_optimal} optimal folds, "
          f"{result.nodes} nodes), upper bound {upper_bound(seq)}")
    print(render_text(fold))
    path = Path(out) / f"{seq}.svg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(fold))
    print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
