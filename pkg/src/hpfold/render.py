"""SVG and text drawings of folds.

H residues are filled discs, P residues hollow; chain bonds are solid lines
and H-H contacts dashed. The first and last residues carry S and E labels.
"""
from __future__ import annotations

from .lattice import FoldState, contact_pairs

CELL = 40
MARGIN = 30
RADIUS = 9


def _bounds(state: FoldState):
    xs = [c[0] for c in state.coords]
    ys = [c[1] for c in state.coords]
    return min(xs), max(xs), min(ys), max(ys)


def render_svg(state: FoldState) -> str:
    x0, x1, y0, y1 = _bounds(state)
    width = (x1 - x0) * CELL + 2 * MARGIN
    height = (y1 - y0) * CELL + 2 * MARGIN

    def px(c):
        return MARGIN + (c[0] - x0) * CELL, MARGIN + (y1 - c[1]) * CELL

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{state.sequence} contacts={state.contacts} energy={-state.contacts}</title>',
    ]
    coords = state.coords
    for i, j in contact_pairs(state):
        (ax, ay), (bx, by) = px(coords[i]), px(coords[j])
        out.append(f'<line class="contact" x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" '
                   f'stroke="#c0392b" stroke-width="2" stroke-dasharray="5,4"/>')
    for k in range(1, len(coords)):
        (ax, ay), (bx, by) = px(coords[k - 1]), px(coords[k])
        out.append(f'<line class="bond" x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" stroke="black" stroke-width="3"/>')
    for k, c in enumerate(coords):
        x, y = px(c)
        fill = "black" if state.sequence[k] == "H" else "white"
        out.append(f'<circle class="residue {state.sequence[k]}" cx="{x}" cy="{y}" r="{RADIUS}" '
                   f'fill="{fill}" stroke="black" stroke-width="2"/>')
    for label, c in (("S", coords[0]), ("E", coords[-1])):
        x, y = px(c)
        out.append(f'<text x="{x + RADIUS + 2}" y="{y - RADIUS - 2}" font-family="sans-serif" '
                   f'font-size="14">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_text(state: FoldState) -> str:
    """Character raster with vertices on even cells and bond glyphs between.

    ``H``/``P`` residues, ``-``/``|`` chain bonds, ``:`` contacts.
    """
    x0, x1, y0, y1 = _bounds(state)
    w, h = 2 * (x1 - x0) + 1, 2 * (y1 - y0) + 1
    grid = [[" "] * w for _ in range(h)]

    def cell(c):
        return 2 * (y1 - c[1]), 2 * (c[0] - x0)

    coords = state.coords
    for k, c in enumerate(coords):
        r, q = cell(c)
        grid[r][q] = state.sequence[k]
    for k in range(1, len(coords)):
        (r0, q0), (r1, q1) = cell(coords[k - 1]), cell(coords[k])
        grid[(r0 + r1) // 2][(q0 + q1) // 2] = "-" if r0 == r1 else "|"
    for i, j in contact_pairs(state):
        (r0, q0), (r1, q1) = cell(coords[i]), cell(coords[j])
        grid[(r0 + r1) // 2][(q0 + q1) // 2] = ":"
    lines = ["".join(row).rstrip() for row in grid]
    sr, sq = cell(coords[0])
    er, eq = cell(coords[-1])
    lines.append(f"S=row {sr // 2} col {sq // 2}  E=row {er // 2} col {eq // 2}  "
                 f"contacts={state.contacts} energy={-state.contacts}")
    return "\n".join(lines) + "\n"
