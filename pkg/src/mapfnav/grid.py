"""Grid world: map representation, continuous/discrete geometry, line of sight.

Coordinate conventions (fixed for the whole package):
- a cell (col, row) covers the square [col, col+1) x [row, row+1),
- its center is at (col + 0.5, row + 0.5),
- points exactly on a cell's right/top edge belong to the next cell,
- everything outside the map counts as blocked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._kernels import line_of_sight_kernel


class Cell(NamedTuple):
    col: int
    row: int


class Position(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class AgentParams:
    """Homogeneous agent parameters in cell-width / step units."""

    r_phys: float = 0.3        # physical disk radius
    r_avoid: float = 0.49      # radius used by collision avoidance (safety buffer)
    v_max: float = 0.1         # speed bound, cell widths per step
    sense_range: float = 3.0   # observation/communication range
    window_k: int = 250        # speed-averaging window, steps
    v_low: float = 0.001       # deadlock speed threshold

    def __post_init__(self):
        if not (0.0 < self.r_phys <= self.r_avoid < 0.5):
            raise ValueError("need 0 < r_phys <= r_avoid < 0.5")
        if self.v_max <= 0.0 or self.sense_range <= 0.0:
            raise ValueError("v_max and sense_range must be positive")
        if self.window_k < 1:
            raise ValueError("window_k must be at least 1")
        if not (0.0 < self.v_low < self.v_max):
            raise ValueError("need 0 < v_low < v_max")


class MapFormatError(ValueError):
    """Base class for errors while parsing a MovingAI .map stream."""


class MapHeaderError(MapFormatError):
    pass


class MapDimensionError(MapFormatError):
    pass


class MapCharacterError(MapFormatError):
    pass


class GridMap:
    """Static tessellation of the workspace into blocked/unblocked cells.

    Immutable after construction; safe to share between agents/threads.
    """

    def __init__(self, width: int, height: int, blocked=()):
        if width <= 0 or height <= 0:
            raise ValueError(f"map dimensions must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        blocked = frozenset(Cell(int(c), int(r)) for c, r in blocked)
        for c, r in blocked:
            if not (0 <= c < width and 0 <= r < height):
                raise ValueError(f"blocked cell ({c},{r}) outside {width}x{height} map")
        self.blocked = blocked
        mask = np.zeros((self.height, self.width), dtype=np.uint8)
        for c, r in blocked:
            mask[r, c] = 1
        mask.setflags(write=False)
        self.mask = mask  # row-major [row, col], 1 = blocked

    def in_bounds(self, cell) -> bool:
        c, r = cell
        return 0 <= c < self.width and 0 <= r < self.height

    def is_blocked(self, cell) -> bool:
        """Out-of-bounds cells count as blocked."""
        c, r = cell
        if not (0 <= c < self.width and 0 <= r < self.height):
            return True
        return bool(self.mask[r, c])

    def is_free(self, cell) -> bool:
        return not self.is_blocked(cell)

    def free_cells(self):
        """All unblocked cells in row-major order."""
        return [Cell(c, r) for r in range(self.height) for c in range(self.width)
                if not self.mask[r, c]]

    def __eq__(self, other):
        return (isinstance(other, GridMap) and self.width == other.width
                and self.height == other.height and self.blocked == other.blocked)

    def __hash__(self):
        return hash((self.width, self.height, self.blocked))

    def __repr__(self):
        return f"GridMap({self.width}x{self.height}, {len(self.blocked)} blocked)"


def cell_of(p) -> Cell:
    """Cell containing a position; right/top edges belong to the next cell."""
    x, y = p
    return Cell(int(math.floor(x)), int(math.floor(y)))


def center_of(c) -> Position:
    col, row = c
    return Position(col + 0.5, row + 0.5)


def line_of_sight(g: GridMap, a, b) -> bool:
    """True iff segment a-b touches no blocked cell.

    Conservative supercover test: every cell whose closed unit square the
    segment touches counts, so grazing a blocked corner or running along a
    blocked edge breaks visibility.
    """
    ax, ay = a
    bx, by = b
    return bool(line_of_sight_kernel(g.mask, ax, ay, bx, by))


def supercover_cells(g: GridMap, a, b) -> set[Cell]:
    """All cells whose closed square the segment a-b touches (bounded to the map).

    Reference enumeration backing line_of_sight; kept in pure Python and used
    by tests and by map preprocessing, not by the per-step hot path.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    ts = {0.0, 1.0}
    dx = bx - ax
    dy = by - ay
    if dx != 0.0:
        lo, hi = sorted((ax, bx))
        for gx in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
            ts.add((gx - ax) / dx)
    if dy != 0.0:
        lo, hi = sorted((ay, by))
        for gy in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
            ts.add((gy - ay) / dy)
    events = sorted(t for t in ts if 0.0 <= t <= 1.0)
    points = [(ax + t * dx, ay + t * dy) for t in events]
    points += [(ax + 0.5 * (t0 + t1) * dx if dx else ax,
                ay + 0.5 * (t0 + t1) * dy if dy else ay)
               for t0, t1 in zip(events, events[1:])]
    eps = 1e-9  # matches the compiled kernel's near-gridline tolerance
    out: set[Cell] = set()
    for x, y in points:
        rx, ry = math.floor(x + 0.5), math.floor(y + 0.5)
        cols = (rx - 1, rx) if abs(x - rx) <= eps else (math.floor(x),)
        rows = (ry - 1, ry) if abs(y - ry) <= eps else (math.floor(y),)
        for c in cols:
            for r in rows:
                if 0 <= c < g.width and 0 <= r < g.height:
                    out.add(Cell(c, r))
    return out


_FREE_CHARS = {".", "G"}
_BLOCKED_CHARS = {"@", "T"}


def load_map(text) -> GridMap:
    """Parse a MovingAI .map character stream ('@'/'T' blocked, '.'/'G' free)."""
    if hasattr(text, "read"):
        text = text.read()
    lines = text.splitlines()
    if len(lines) < 4:
        raise MapHeaderError("expected 4 header lines (type/height/width/map)")
    if lines[0].strip() != "type octile":
        raise MapHeaderError(f"bad type line: {lines[0]!r}")
    try:
        height = int(lines[1].split()[1])
        width = int(lines[2].split()[1])
    except (IndexError, ValueError) as exc:
        raise MapHeaderError(f"bad height/width lines: {lines[1]!r}, {lines[2]!r}") from exc
    if lines[1].split()[0] != "height" or lines[2].split()[0] != "width":
        raise MapHeaderError("header must declare height before width")
    if lines[3].strip() != "map":
        raise MapHeaderError(f"bad map line: {lines[3]!r}")
    rows = [ln for ln in lines[4:] if ln != ""]
    if len(rows) != height:
        raise MapDimensionError(f"header says height {height}, body has {len(rows)} rows")
    blocked = []
    for r, row in enumerate(rows):
        if len(row) != width:
            raise MapDimensionError(f"row {r} has {len(row)} chars, header says width {width}")
        for c, ch in enumerate(row):
            if ch in _BLOCKED_CHARS:
                blocked.append((c, r))
            elif ch not in _FREE_CHARS:
                raise MapCharacterError(f"unknown map character {ch!r} at row {r} col {c}")
    return GridMap(width, height, blocked)


def serialize_map(g: GridMap) -> str:
    """Emit the bit-exact MovingAI .map text for a grid."""
    out = [f"type octile", f"height {g.height}", f"width {g.width}", "map"]
    for r in range(g.height):
        out.append("".join("@" if g.mask[r, c] else "." for c in range(g.width)))
    return "\n".join(out) + "\n"
