"""Built-in experiment maps: two halls with passages, shelf warehouse, rooms."""

from __future__ import annotations

from .grid import GridMap


def gaps(size: int, n_passages: int) -> GridMap:
    """Two open halls split by a 1-cell wall with evenly spaced 1-cell gaps."""
    if size < 4 or not (1 <= n_passages <= size - 2):
        raise ValueError(f"bad gaps parameters: size={size}, passages={n_passages}")
    wall_col = size // 2
    gap_rows = {(i + 1) * size // (n_passages + 1) for i in range(n_passages)}
    blocked = [(wall_col, r) for r in range(size) if r not in gap_rows]
    return GridMap(size, size, blocked)


def warehouse(size: int, n_shelves: int) -> GridMap:
    """Prolonged rectangular shelves with free aisles between and around them."""
    if size < 12 or n_shelves < 1:
        raise ValueError(f"bad warehouse parameters: size={size}, shelves={n_shelves}")
    shelf_len = size // 2
    col0 = (size - shelf_len) // 2
    blocked = []
    for i in range(n_shelves):
        row = (i + 1) * size // (n_shelves + 1) - 1
        if row < 1 or row + 1 >= size - 1:
            raise ValueError("too many shelves for this size")
        for r in (row, row + 1):
            for c in range(col0, col0 + shelf_len):
                blocked.append((c, r))
    return GridMap(size, size, blocked)


def rooms(size: int, room: int, door: int = 1) -> GridMap:
    """Rooms separated by walls with doorways at wall-segment midpoints.

    Single-cell doorways by default: narrow straight passages breed the
    doorway contention this pipeline exists to resolve, and straight slots
    track far better under collision avoidance than wide openings that
    invite corner-grazing diagonal sightlines.
    """
    if size < 2 * room or size % room != 0:
        raise ValueError(f"size {size} must be a multiple of room {room}, >= 2 rooms")
    if not (1 <= door < room - 1):
        raise ValueError(f"door width {door} does not fit a room of {room}")
    blocked = set()
    for w in range(room - 1, size - 1, room):
        for k in range(size):
            blocked.add((w, k))
            blocked.add((k, w))
    for w in range(room - 1, size - 1, room):
        for seg in range(0, size, room):
            lo = seg + (room - door) // 2
            for d in range(door):
                if lo + d < size:
                    blocked.discard((w, lo + d))
                    blocked.discard((lo + d, w))
    # wall crossings stay blocked
    for w1 in range(room - 1, size - 1, room):
        for w2 in range(room - 1, size - 1, room):
            blocked.add((w1, w2))
    return GridMap(size, size, sorted(blocked))


BUILTIN = {"gaps": gaps, "warehouse": warehouse, "rooms": rooms}


def build_map(kind: str, *params) -> GridMap:
    """Builtin generator dispatch: gaps(size, n), warehouse(size, n), rooms(size, room)."""
    if kind not in BUILTIN:
        raise ValueError(f"unknown map kind {kind!r}; choose from {sorted(BUILTIN)}")
    return BUILTIN[kind](*[int(p) for p in params])
