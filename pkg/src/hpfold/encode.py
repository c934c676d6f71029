"""Binary plane encoding of folding states for the network.

The tensor grid interleaves lattice vertices and edges: a vertex board of
side ``V`` maps to a grid of side ``N = 2V - 1`` with vertices at
(even, even) indices, horizontal edges at (odd, even) and vertical edges at
(even, odd). The first grid axis follows lattice x, the second lattice y.
Stacks are channel-first, shape ``(17, N, N)``, dtype uint8.

Channels: frame k (k = 0 newest .. 3 oldest) owns channels ``4k..4k+3`` in
the order H, P, C (chain bond), B (H-H contact); channel 16 is the constant
next-residue plane.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .lattice import Coord, FoldState, contact_pairs

FRAMES = 4
CHANNELS_PER_FRAME = 4
PLANES = FRAMES * CHANNELS_PER_FRAME + 1
CHANNEL_NAMES = ("H", "P", "C", "B")
NEXT_RESIDUE_PLANE = PLANES - 1


def board_radius(grid_size: int) -> int:
    """Largest lattice radius representable on a grid of side ``grid_size``."""
    if grid_size < 5 or grid_size % 4 != 1:
        raise ValueError(f"grid size must be 1 mod 4 and >= 5, got {grid_size}")
    return (grid_size - 1) // 4


def lattice_to_grid(c: Coord, grid_size: int) -> tuple[int, int]:
    r = board_radius(grid_size)
    x, y = c
    if abs(x) > r or abs(y) > r:
        raise ValueError(f"coordinate {c} outside a grid of size {grid_size}")
    return 2 * (x + r), 2 * (y + r)


def grid_to_lattice(g: tuple[int, int], grid_size: int) -> Coord:
    r = board_radius(grid_size)
    i, j = g
    if i % 2 or j % 2:
        raise ValueError(f"grid point {g} is not a vertex")
    return i // 2 - r, j // 2 - r


def _paint_frame(out: np.ndarray, state: FoldState, grid_size: int) -> None:
    """Write H/P/C/B activations of ``state`` into the 4-channel view ``out``."""
    coords = state.coords
    seq = state.sequence
    grid = [lattice_to_grid(c, grid_size) for c in coords]
    for k, (i, j) in enumerate(grid):
        out[0 if seq[k] == "H" else 1, i, j] = 1
    for k in range(1, len(grid)):
        (a, b), (c, d) = grid[k - 1], grid[k]
        out[2, (a + c) // 2, (b + d) // 2] = 1
    for p, q in contact_pairs(state):
        (a, b), (c, d) = grid[p], grid[q]
        out[3, (a + c) // 2, (b + d) // 2] = 1


def encode_state(history: Sequence[FoldState], next_residue: str | None, grid_size: int) -> np.ndarray:
    """Encode up to 4 states (newest first) plus the next residue type."""
    if len(history) > FRAMES:
        raise ValueError(f"at most {FRAMES} history states, got {len(history)}")
    planes = np.zeros((PLANES, grid_size, grid_size), dtype=np.uint8)
    for k, state in enumerate(history):
        _paint_frame(planes[4 * k : 4 * k + 4], state, grid_size)
    if next_residue == "H":
        planes[NEXT_RESIDUE_PLANE] = 1
    return planes


def history_of(state: FoldState) -> list[FoldState]:
    """The state and its (at most 3) predecessors, newest first.

    The opening (2 residues) is the first state of an episode, so it has no
    predecessors.
    """
    return [state.prefix(t) for t in range(state.step, max(1, state.step - FRAMES), -1)]


def encode_fold(state: FoldState, grid_size: int) -> np.ndarray:
    """Encode ``state`` with its own episode history."""
    return encode_state(history_of(state), state.next_residue, grid_size)


def decode_frame(stack: np.ndarray, frame_index: int) -> set[tuple[tuple[int, int], str]]:
    """All activated ``(grid point, channel name)`` pairs of frame 1..4."""
    if not 1 <= frame_index <= FRAMES:
        raise ValueError(f"frame index must be in 1..{FRAMES}, got {frame_index}")
    base = CHANNELS_PER_FRAME * (frame_index - 1)
    out = set()
    for ch in range(CHANNELS_PER_FRAME):
        for i, j in zip(*np.nonzero(stack[base + ch])):
            out.add(((int(i), int(j)), CHANNEL_NAMES[ch]))
    return out


def mirror_planes(stack: np.ndarray) -> np.ndarray:
    """Planes of the fold reflected through the y axis (x -> -x).

    The opening lies on the y axis, so the reflection is again a valid
    encoding; it is the fold with every Left and Right swapped. Works on a
    single stack or a batch (the x axis is always second to last).
    """
    return np.flip(stack, axis=-2).copy()


def dump_planes(stack: np.ndarray) -> str:
    """Text raster of every frame for debugging; y grows upwards."""
    n = stack.shape[-1]
    lines = []
    for f in range(FRAMES):
        lines.append(f"frame {f + 1}")
        frame = stack[4 * f : 4 * f + 4]
        for j in range(n - 1, -1, -1):
            row = []
            for i in range(n):
                hot = [CHANNEL_NAMES[c] for c in range(4) if frame[c, i, j]]
                row.append(hot[0] if len(hot) == 1 else ("." if not hot else "#"))
            lines.append("".join(row))
    lines.append(f"next residue: {'H' if stack[NEXT_RESIDUE_PLANE].any() else 'P'}")
    return "\n".join(lines)
