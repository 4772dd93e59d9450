"""Reactive collision avoidance: half-plane constraints and velocity selection.

One half-plane per neighbor (reciprocal, each agent takes half the adjustment)
and per nearby obstacle boundary segment (full responsibility).  The selected
velocity is the feasible point closest to the preferred velocity, computed by
an incremental 2D linear program with a least-violation fallback in which
obstacle constraints stay hard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .grid import GridMap, Position

# Time horizons in simulation steps.  At v_max = 0.1 cells/step these span
# 1-2 cells, matching a sensing range of 3 cells.
TAU_AGENT = 10.0
TAU_OBSTACLE = 20.0


class HalfPlane(NamedTuple):
    """Permitted velocities satisfy (v - point) . normal >= 0."""
    point: tuple
    normal: tuple


class NeighborView(NamedTuple):
    """Another agent's state as observed within sensing range."""
    position: tuple
    velocity: tuple
    radius: float
    agent_id: int = -1


def _lines_to_halfplanes(lines, m):
    out = []
    for i in range(m):
        px, py, dx, dy = lines[i]
        out.append(HalfPlane((px, py), (-dy, dx)))
    return out


def _halfplanes_to_lines(planes):
    lines = np.empty((len(planes), 4), dtype=np.float64)
    for i, hp in enumerate(planes):
        (px, py), (nx, ny) = hp.point, hp.normal
        lines[i, 0] = px
        lines[i, 1] = py
        lines[i, 2] = ny
        lines[i, 3] = -nx
    return lines


def agent_halfplanes(self_pos, self_vel, neighbors, r_avoid, tau=TAU_AGENT,
                     dt=1.0, self_id=0):
    """ORCA constraints induced by neighboring agents.

    Overlapping pairs get a separating constraint resolved within one step;
    exactly coincident pairs separate along a direction hashed from the
    ordered agent ids (deterministic, opposite for the two agents).
    """
    nbr = np.empty((len(neighbors), 6), dtype=np.float64)
    for i, nb in enumerate(neighbors):
        nbr[i, 0], nbr[i, 1] = nb.position
        nbr[i, 2], nbr[i, 3] = nb.velocity
        nbr[i, 4] = nb.radius
        nbr[i, 5] = nb.agent_id
    lines = np.empty((len(neighbors), 4), dtype=np.float64)
    m = _kernels._agent_lines(self_pos[0], self_pos[1], self_vel[0], self_vel[1],
                              r_avoid, self_id, nbr, float(tau), float(dt),
                              lines, 0, 1)
    m = _kernels._agent_lines(self_pos[0], self_pos[1], self_vel[0], self_vel[1],
                              r_avoid, self_id, nbr, float(tau), float(dt),
                              lines, m, 0)
    return _lines_to_halfplanes(lines, m)


@dataclass
class ObstacleIndex:
    """Boundary segments of a grid's blocked region plus per-cell proximity bins.

    Segments are maximal straight runs of blocked/free boundary edges,
    directed with blocked space on the left; the map border counts as
    blocked.  Built once per (map, query radius) and shared read-only.
    """

    grid: GridMap
    query_radius: float
    segs: np.ndarray = field(init=False)
    bin_start: np.ndarray = field(init=False)
    bin_items: np.ndarray = field(init=False)

    def __post_init__(self):
        polys = boundary_polygons(self.grid)
        rows = []
        for verts in polys:
            k = len(verts)
            dirs = []
            for i in range(k):
                ax, ay = verts[i]
                bx, by = verts[(i + 1) % k]
                ln = abs(bx - ax) + abs(by - ay)
                dirs.append(((bx - ax) / ln, (by - ay) / ln))
            convex = []
            for i in range(k):
                din = dirs[(i - 1) % k]
                dout = dirs[i]
                convex.append(1.0 if din[0] * dout[1] - din[1] * dout[0] >= 0.0 else 0.0)
            for i in range(k):
                ax, ay = verts[i]
                bx, by = verts[(i + 1) % k]
                rows.append([ax, ay, bx, by,
                             dirs[i][0], dirs[i][1],
                             dirs[(i - 1) % k][0], dirs[(i - 1) % k][1],
                             dirs[(i + 1) % k][0], dirs[(i + 1) % k][1],
                             convex[i], convex[(i + 1) % k]])
        self.segs = (np.array(rows, dtype=np.float64) if rows
                     else np.empty((0, 12), dtype=np.float64))
        self._build_bins()

    def _build_bins(self):
        g = self.grid
        n_cells = g.width * g.height
        reach = self.query_radius + np.sqrt(0.5)
        starts = np.zeros(n_cells + 1, dtype=np.int64)
        items: list[np.ndarray] = []
        if len(self.segs) == 0:
            self.bin_start = starts
            self.bin_items = np.empty(0, dtype=np.int64)
            return
        a = self.segs[:, 0:2]
        b = self.segs[:, 2:4]
        ab = b - a
        ab_sq = np.maximum((ab * ab).sum(axis=1), 1e-300)
        for r in range(g.height):
            for c in range(g.width):
                center = np.array([c + 0.5, r + 0.5])
                t = np.clip(((center - a) * ab).sum(axis=1) / ab_sq, 0.0, 1.0)
                closest = a + t[:, None] * ab
                d = np.hypot(*(center - closest).T)
                idx = np.nonzero(d <= reach)[0].astype(np.int64)
                items.append(idx)
                starts[r * g.width + c + 1] = starts[r * g.width + c] + len(idx)
        self.bin_start = starts
        self.bin_items = (np.concatenate(items) if items
                          else np.empty(0, dtype=np.int64))

    def candidates(self, pos):
        """Segment indices possibly within query_radius of a position."""
        c = int(np.floor(pos[0]))
        r = int(np.floor(pos[1]))
        c = min(max(c, 0), self.grid.width - 1)
        r = min(max(r, 0), self.grid.height - 1)
        k = r * self.grid.width + c
        return self.bin_items[self.bin_start[k]:self.bin_start[k + 1]]


def boundary_polygons(g: GridMap):
    """Closed rectilinear boundary chains of the blocked region (border included).

    Vertices are lattice points; traversal keeps blocked space on the left,
    and collinear runs are merged so every vertex is a 90-degree corner.
    """
    edges = {}  # start point -> list of end points
    for r in range(g.height):
        for c in range(g.width):
            if g.mask[r, c]:
                continue
            if g.is_blocked((c, r - 1)):
                _add_edge(edges, (c + 1, r), (c, r))
            if g.is_blocked((c, r + 1)):
                _add_edge(edges, (c, r + 1), (c + 1, r + 1))
            if g.is_blocked((c - 1, r)):
                _add_edge(edges, (c, r), (c, r + 1))
            if g.is_blocked((c + 1, r)):
                _add_edge(edges, (c + 1, r + 1), (c + 1, r))
    unused = {start: sorted(ends) for start, ends in edges.items()}
    polys = []
    for start in sorted(unused):
        while unused.get(start):
            loop = [start]
            prev_dir = None
            cur = start
            while True:
                ends = unused[cur]
                if prev_dir is None or len(ends) == 1:
                    nxt = ends.pop(0)
                else:
                    # at a checkerboard corner prefer the sharpest left turn,
                    # which keeps hugging the same blocked component
                    def turn(e):
                        d = (e[0] - cur[0], e[1] - cur[1])
                        cross = prev_dir[0] * d[1] - prev_dir[1] * d[0]
                        dot = prev_dir[0] * d[0] + prev_dir[1] * d[1]
                        return (-cross, -dot)
                    ends.sort(key=turn)
                    nxt = ends.pop(0)
                prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
                cur = nxt
                if cur == loop[0]:
                    break
                loop.append(cur)
            polys.append(_merge_collinear(loop))
    return polys


def _add_edge(edges, a, b):
    edges.setdefault(a, []).append(b)


def _merge_collinear(loop):
    k = len(loop)
    verts = []
    for i in range(k):
        p_prev = loop[(i - 1) % k]
        p = loop[i]
        p_next = loop[(i + 1) % k]
        d_in = (p[0] - p_prev[0], p[1] - p_prev[1])
        d_out = (p_next[0] - p[0], p_next[1] - p[1])
        if d_in != d_out:
            verts.append(p)
    return verts


_INDEX_CACHE: dict[int, ObstacleIndex] = {}


def obstacle_index(g: GridMap, query_radius: float) -> ObstacleIndex:
    """Cached ObstacleIndex for a map (keyed on identity and radius)."""
    key = (id(g), round(query_radius, 9))
    idx = _INDEX_CACHE.get(key)
    if idx is None or idx.grid is not g:
        idx = ObstacleIndex(g, query_radius)
        _INDEX_CACHE[key] = idx
    return idx


def obstacle_halfplanes(self_pos, g: GridMap, r_avoid, tau_obst=TAU_OBSTACLE,
                        velocity=(0.0, 0.0), v_max=0.1, index=None):
    """Constraints from blocked-cell boundary segments within sensing reach.

    No reciprocity: the agent takes the full responsibility, so satisfying
    the constraints keeps it outside blocked cells for tau_obst steps.
    """
    if index is None:
        index = obstacle_index(g, tau_obst * v_max + r_avoid)
    cand = index.candidates(self_pos)
    lines = np.empty((max(len(cand), 1), 4), dtype=np.float64)
    reach = float(tau_obst) * v_max + r_avoid
    m = _kernels._obstacle_lines(self_pos[0], self_pos[1],
                                 velocity[0], velocity[1],
                                 r_avoid, 1.0 / float(tau_obst),
                                 index.segs, cand, lines, reach * reach)
    return _lines_to_halfplanes(lines, m)


def solve_velocity(constraints, v_pref, v_max, n_obstacle=0):
    """Feasible velocity closest to v_pref within the v_max disk.

    Constraints are processed in list order.  If the 2D program is
    infeasible, falls back to minimizing the largest violation while keeping
    the first n_obstacle constraints hard.  Always returns |v| <= v_max.
    """
    lines = _halfplanes_to_lines(constraints)
    res = _kernels.solve_velocity_lines(lines, len(constraints), n_obstacle,
                                        float(v_pref[0]), float(v_pref[1]),
                                        float(v_max))
    return (res[0], res[1])


def compute_safe_velocity(position, velocity, target, neighbors, g: GridMap,
                          r_avoid, v_max, tau=TAU_AGENT, tau_obst=TAU_OBSTACLE,
                          dt=1.0, self_id=0, index=None, r_obst=None):
    """Velocity command toward a target point under all ORCA constraints.

    v_pref points at the target with speed min(v_max, distance/dt); obstacle
    constraints come first (hard in the fallback), then agent constraints.
    r_obst is the radius kept clear of walls; it defaults to r_avoid, but
    the simulator passes the physical radius: the reciprocal safety buffer
    belongs to agent pairs, while walls are static and exactly known.
    """
    tx = target[0] - position[0]
    ty = target[1] - position[1]
    dist = float(np.hypot(tx, ty))
    if dist > 1e-15:
        sp = min(v_max, dist / dt)
        v_pref = (tx / dist * sp, ty / dist * sp)
    else:
        v_pref = (0.0, 0.0)
    if r_obst is None:
        r_obst = r_avoid
    obst = obstacle_halfplanes(position, g, r_obst, tau_obst,
                               velocity=velocity, v_max=v_max, index=index)
    agents = agent_halfplanes(position, velocity, neighbors, r_avoid, tau,
                              dt=dt, self_id=self_id)
    # separation constraints of already-overlapping pairs come right after
    # the obstacles and stay hard in the infeasible-case fallback
    n_overlap = sum(
        1 for nb in neighbors
        if np.hypot(nb.position[0] - position[0],
                    nb.position[1] - position[1]) <= r_avoid + nb.radius)
    return solve_velocity(obst + agents, v_pref, v_max,
                          n_obstacle=len(obst) + n_overlap)
