"""Build a discrete MAPF instance around a detected deadlock.

Participants are the initiator's neighbors and neighbors-of-neighbors.  The
instance lives on a rectangular subgrid around them (bounding box plus a
user-defined offset), agents get unique pseudo-random priorities, and starts
and goals are assigned greedily in priority order.  Every step is a pure
function of the shared snapshot, so all participants derive the identical
instance without a central controller.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

from ..grid import Cell, GridMap, cell_of

# Area expansion around the participants' bounding box, in cells; equal to
# the default observation range.
DEFAULT_OFFSET = 3

_CARDINAL = ((0, -1), (-1, 0), (1, 0), (0, 1))


class InstanceError(Exception):
    """Instance construction failed (area exhausted after retries)."""


@dataclass(frozen=True)
class MAPFArea:
    """Rectangular subgrid in global coordinates; blocked cells stored locally."""

    origin: Cell
    width: int
    height: int
    local_blocked: frozenset

    def contains(self, cell) -> bool:
        c, r = cell
        return (self.origin.col <= c < self.origin.col + self.width
                and self.origin.row <= r < self.origin.row + self.height)

    def is_blocked(self, cell) -> bool:
        """Outside the area counts as blocked."""
        if not self.contains(cell):
            return True
        c, r = cell
        return Cell(c - self.origin.col, r - self.origin.row) in self.local_blocked

    def free_cells(self):
        """Unblocked cells in global coordinates, row-major."""
        out = []
        for r in range(self.origin.row, self.origin.row + self.height):
            for c in range(self.origin.col, self.origin.col + self.width):
                if Cell(c - self.origin.col, r - self.origin.row) not in self.local_blocked:
                    out.append(Cell(c, r))
        return out

    def neighbors4(self, cell):
        for dc, dr in _CARDINAL:
            nxt = Cell(cell[0] + dc, cell[1] + dr)
            if not self.is_blocked(nxt):
                yield nxt

    def with_extra_blocked(self, cells) -> "MAPFArea":
        """Area with additional untraversable cells (e.g. parked agents)."""
        extra = {Cell(c - self.origin.col, r - self.origin.row)
                 for c, r in cells if self.contains((c, r))}
        return MAPFArea(self.origin, self.width, self.height,
                        self.local_blocked | frozenset(extra))


class MAPFAgent(NamedTuple):
    agent_id: int
    start: Cell
    goal: Cell
    waypoint: tuple  # current target on the agent's geometric path (may be outside)


@dataclass(frozen=True)
class MAPFInstance:
    area: MAPFArea
    agents: tuple  # MAPFAgent, in priority order

    def to_json(self) -> dict:
        rows = []
        for r in range(self.area.height):
            rows.append("".join(
                "@" if Cell(c, r) in self.area.local_blocked else "."
                for c in range(self.area.width)))
        return {
            "area": {
                "origin": [self.area.origin.col, self.area.origin.row],
                "width": self.area.width,
                "height": self.area.height,
                "blocked": rows,
            },
            "agents": [
                {"id": a.agent_id, "start": [a.start.col, a.start.row],
                 "goal": [a.goal.col, a.goal.row],
                 "waypoint": [a.waypoint[0], a.waypoint[1]]}
                for a in self.agents
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MAPFInstance":
        area_doc = doc["area"]
        blocked = set()
        for r, row in enumerate(area_doc["blocked"]):
            for c, ch in enumerate(row):
                if ch == "@":
                    blocked.add(Cell(c, r))
        area = MAPFArea(Cell(*area_doc["origin"]), area_doc["width"],
                        area_doc["height"], frozenset(blocked))
        agents = tuple(
            MAPFAgent(a["id"], Cell(*a["start"]), Cell(*a["goal"]),
                      (a["waypoint"][0], a["waypoint"][1]))
            for a in doc["agents"])
        return cls(area, agents)


def gather_participants(initiator, proximity) -> set:
    """{initiator} plus neighbors and neighbors-of-neighbors."""
    if initiator not in proximity:
        raise KeyError(f"initiator {initiator} not in the proximity relation")
    first = set(proximity[initiator])
    second = set()
    for a in first:
        second |= set(proximity.get(a, ()))
    return {initiator} | first | second


def mix_seed(sim_seed: int, event_counter: int) -> int:
    """Stable scalar seed for one MAPF-creation event."""
    return (sim_seed * 1_000_003 + event_counter) & 0x7FFFFFFFFFFFFFFF


def assign_priorities(participants, seed: int) -> list:
    """Uniform pseudo-random priority order, identical for equal inputs."""
    order = sorted(participants)
    rng = random.Random(seed)
    rng.shuffle(order)
    return order


def compute_area(positions, offset: int, g: GridMap) -> MAPFArea:
    """Bounding box of the positions' cells, expanded by offset, clipped to the map."""
    if not positions:
        raise ValueError("need at least one position")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    cells = [cell_of(p) for p in positions]
    c_lo = max(0, min(c.col for c in cells) - offset)
    c_hi = min(g.width - 1, max(c.col for c in cells) + offset)
    r_lo = max(0, min(c.row for c in cells) - offset)
    r_hi = min(g.height - 1, max(c.row for c in cells) + offset)
    local_blocked = frozenset(
        Cell(c - c_lo, r - r_lo)
        for r in range(r_lo, r_hi + 1) for c in range(c_lo, c_hi + 1)
        if g.mask[r, c])
    return MAPFArea(Cell(c_lo, r_lo), c_hi - c_lo + 1, r_hi - r_lo + 1, local_blocked)


def _nearest_free_cell(area: MAPFArea, pos, taken):
    """Unblocked area cell closest to pos (Euclidean to center), row-major ties."""
    best = None
    best_key = None
    for cell in area.free_cells():
        if cell in taken:
            continue
        d = math.hypot(cell.col + 0.5 - pos[0], cell.row + 0.5 - pos[1])
        key = (d, cell.row, cell.col)
        if best_key is None or key < best_key:
            best = cell
            best_key = key
    return best


def assign_starts(area: MAPFArea, agents_by_priority) -> list:
    """Start cells in priority order: closest free cell not already taken."""
    taken = set()
    starts = []
    for _, pos in agents_by_priority:
        cell = _nearest_free_cell(area, pos, taken)
        if cell is None:
            raise InstanceError("area exhausted while assigning starts")
        starts.append(cell)
        taken.add(cell)
    return starts


def _reachable_from(area: MAPFArea, start: Cell) -> list:
    """Cells reachable from start via cardinal moves, in BFS order."""
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in area.neighbors4(cur):
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order


def assign_goals(area: MAPFArea, starts, waypoints) -> list:
    """Goal cells in priority order: reachable cell nearest each agent's waypoint."""
    taken = set()
    goals = []
    for start, wp in zip(starts, waypoints):
        best = None
        best_key = None
        for cell in _reachable_from(area, start):
            if cell in taken:
                continue
            d = math.hypot(cell.col + 0.5 - wp[0], cell.row + 0.5 - wp[1])
            key = (d, cell.row, cell.col)
            if best_key is None or key < best_key:
                best = cell
                best_key = key
        if best is None:
            raise InstanceError("reachable set exhausted while assigning goals")
        goals.append(best)
        taken.add(best)
    return goals


def _components_ok(area: MAPFArea, positions, n_agents: int) -> bool:
    """Each component holding an agent needs enough room (n + 2 free cells)."""
    comp_id = {}
    sizes = []
    for cell in area.free_cells():
        if cell in comp_id:
            continue
        cid = len(sizes)
        size = 0
        queue = deque([cell])
        comp_id[cell] = cid
        while queue:
            cur = queue.popleft()
            size += 1
            for nxt in area.neighbors4(cur):
                if nxt not in comp_id:
                    comp_id[nxt] = cid
                    queue.append(nxt)
        sizes.append(size)
    for pos in positions:
        anchor = cell_of(pos)
        if area.is_blocked(anchor):
            anchor = _nearest_free_cell(area, pos, set())
            if anchor is None:
                return False
        if sizes[comp_id[anchor]] < n_agents + 2:
            return False
    return True


def build_instance(participants, seed: int, offset: int, g: GridMap,
                   states, waypoints, static_cells=frozenset(),
                   retries: int = 3) -> MAPFInstance:
    """Full construction: priorities, area, starts, goals.

    If any component holding an agent has fewer than participants + 2 free
    cells (room the complete solver needs), or assignment exhausts the area,
    the offset grows by 2 and construction retries, up to `retries` times.
    static_cells (e.g. parked agents) are treated as blocked.
    """
    if not participants:
        raise ValueError("participants must be non-empty")
    order = assign_priorities(participants, seed)
    by_priority = [(a, states[a]) for a in order]
    positions = [states[a] for a in order]
    last_err = None
    for attempt in range(retries + 1):
        area = compute_area(positions, offset + 2 * attempt, g)
        if static_cells:
            area = area.with_extra_blocked(static_cells)
        if not _components_ok(area, positions, len(order)):
            last_err = InstanceError("too few free cells in an agent's component")
            continue
        try:
            starts = assign_starts(area, by_priority)
            goals = assign_goals(area, starts, [waypoints[a] for a in order])
        except InstanceError as exc:
            last_err = exc
            continue
        agents = tuple(
            MAPFAgent(a, s, t, (waypoints[a][0], waypoints[a][1]))
            for a, s, t in zip(order, starts, goals))
        return MAPFInstance(area, agents)
    raise last_err or InstanceError("construction failed")
