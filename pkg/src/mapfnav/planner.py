"""Individual geometric path planning on the grid.

Theta* produces any-angle paths whose segments all pass the conservative
line-of-sight test; a plain 8-connected A* (no corner cutting) serves as the
baseline and as a comparison oracle in tests.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .grid import Cell, GridMap, Position, center_of, line_of_sight

# Waypoint-reach tolerance: equal to the physical agent radius, so an agent
# brushing a waypoint never orbits it.
DELTA_WP = 0.3

SQRT2 = math.sqrt(2.0)

# 8-connected moves; diagonals require both adjacent cardinals unblocked.
_CARDINALS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_DIAGONALS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class Unreachable(Exception):
    """No unblocked route exists between the requested cells."""


@dataclass
class GeometricPath:
    """Ordered waypoints (cell centers) plus the index of the current target."""

    waypoints: list
    cursor: int = 0

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a path needs at least one waypoint")

    @property
    def target(self) -> Position:
        return self.waypoints[self.cursor]

    @property
    def goal(self) -> Position:
        return self.waypoints[-1]

    @property
    def done(self) -> bool:
        return self.cursor == len(self.waypoints) - 1

    def length(self) -> float:
        total = 0.0
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            total += math.hypot(b[0] - a[0], b[1] - a[1])
        return total


def _check_endpoints(g: GridMap, start, goal):
    for name, cell in (("start", start), ("goal", goal)):
        if not g.in_bounds(cell):
            raise ValueError(f"{name} {tuple(cell)} outside {g.width}x{g.height} map")
        if g.is_blocked(cell):
            raise ValueError(f"{name} {tuple(cell)} is blocked")


def _neighbors8(g: GridMap, c: int, r: int):
    for dc, dr in _CARDINALS:
        nc, nr = c + dc, r + dr
        if 0 <= nc < g.width and 0 <= nr < g.height and not g.mask[nr, nc]:
            yield nc, nr, 1.0
    for dc, dr in _DIAGONALS:
        nc, nr = c + dc, r + dr
        if (0 <= nc < g.width and 0 <= nr < g.height and not g.mask[nr, nc]
                and not g.mask[r, nc] and not g.mask[nr, c]):
            yield nc, nr, SQRT2


def plan_theta_star(g: GridMap, start, goal) -> GeometricPath:
    """Any-angle shortest-ish path via Theta* with parent shortcutting.

    Deterministic tie-breaking: larger g first among equal f, then row-major
    cell order, so every agent reproduces the same path.
    """
    _check_endpoints(g, start, goal)
    start = Cell(*start)
    goal = Cell(*goal)
    sx, sy = center_of(start)

    def h(c, r):
        return math.hypot(c + 0.5 - goal.col - 0.5, r + 0.5 - goal.row - 0.5)

    g_val = {start: 0.0}
    parent = {start: start}
    open_heap = [(h(start.col, start.row), 0.0, start.row, start.col)]
    closed = set()
    while open_heap:
        f, neg_g, r, c = heapq.heappop(open_heap)
        cur = Cell(c, r)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == goal:
            break
        cur_center = center_of(cur)
        par = parent[cur]
        par_center = center_of(par)
        g_cur = g_val[cur]
        g_par = g_val[par]
        for nc, nr, step in _neighbors8(g, c, r):
            nxt = Cell(nc, nr)
            if nxt in closed:
                continue
            best_g = g_cur + step
            best_parent = cur
            if line_of_sight(g, par_center, center_of(nxt)):
                g2 = g_par + math.hypot(nc + 0.5 - par_center[0], nr + 0.5 - par_center[1])
                if g2 <= best_g:
                    best_g = g2
                    best_parent = par
            if best_g < g_val.get(nxt, math.inf) - 1e-12:
                g_val[nxt] = best_g
                parent[nxt] = best_parent
                heapq.heappush(open_heap, (best_g + h(nc, nr), -best_g, nr, nc))
    if goal not in closed:
        raise Unreachable(f"no route from {tuple(start)} to {tuple(goal)}")
    chain = [goal]
    while chain[-1] != start:
        chain.append(parent[chain[-1]])
    chain.reverse()
    return GeometricPath([center_of(cell) for cell in chain])


def plan_astar(g: GridMap, start, goal) -> GeometricPath:
    """Optimal 8-connected grid path (1 / sqrt(2) costs, no corner cutting)."""
    _check_endpoints(g, start, goal)
    start = Cell(*start)
    goal = Cell(*goal)

    def h(c, r):
        dc = abs(c - goal.col)
        dr = abs(r - goal.row)
        return (SQRT2 - 1.0) * min(dc, dr) + max(dc, dr)

    g_val = {start: 0.0}
    parent = {start: None}
    open_heap = [(h(start.col, start.row), 0.0, start.row, start.col)]
    closed = set()
    while open_heap:
        f, neg_g, r, c = heapq.heappop(open_heap)
        cur = Cell(c, r)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == goal:
            break
        g_cur = g_val[cur]
        for nc, nr, step in _neighbors8(g, c, r):
            nxt = Cell(nc, nr)
            if nxt in closed:
                continue
            ng = g_cur + step
            if ng < g_val.get(nxt, math.inf) - 1e-12:
                g_val[nxt] = ng
                parent[nxt] = cur
                heapq.heappush(open_heap, (ng + h(nc, nr), -ng, nr, nc))
    if goal not in closed:
        raise Unreachable(f"no route from {tuple(start)} to {tuple(goal)}")
    chain = [goal]
    while parent[chain[-1]] is not None:
        chain.append(parent[chain[-1]])
    chain.reverse()
    return GeometricPath([center_of(cell) for cell in chain])


SMOOTHING_RANGE = 3.0


def next_waypoint(path: GeometricPath, p, g: GridMap, delta_wp: float = DELTA_WP,
                  smoothing_range: float = SMOOTHING_RANGE) -> Position:
    """Advance the cursor and return the waypoint at it.

    The cursor moves forward while the agent stands within delta_wp of the
    current waypoint or can see the next one nearby (smoothing on the fly);
    it never moves backwards, so progress along the path is monotone even
    after the agent was displaced by collision avoidance.  Sight-based
    advancement only counts within smoothing_range: the cursor is permanent,
    and one transient glimpse of a far waypoint through a keyhole must not
    commit the agent to steering through a wall for the rest of the run.
    """
    wp = path.waypoints
    last = len(wp) - 1
    cur = path.cursor
    while cur < last:
        nxt = wp[cur + 1]
        if math.hypot(wp[cur][0] - p[0], wp[cur][1] - p[1]) <= delta_wp:
            cur += 1
        elif (math.hypot(nxt[0] - p[0], nxt[1] - p[1]) <= smoothing_range
              and line_of_sight(g, p, nxt)):
            cur += 1
        else:
            break
    path.cursor = cur
    return wp[cur]
