"""Bounded-suboptimal MAPF solving: conflict-tree search with focal lists.

High level: best-first over a constraint tree, expanding from the focal set
of nodes whose cost is within w of the best lower bound, ordered by conflict
count.  Low level: space-time A* per agent whose focal list breaks ties by
the number of conflicts with the other agents' current paths.  Flowtime
objective; agents rest at their goals and stay conflict-relevant.  The
returned cost satisfies flowtime <= w * optimal flowtime.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field

from ..grid import Cell
from .solution import MAPFSolution

_CARDINAL = ((0, -1), (-1, 0), (1, 0), (0, 1))


def solve_ecbs(inst, w: float, deadline=None, work_cap=None) -> MAPFSolution | None:
    """Solve an instance within suboptimality factor w >= 1.

    Returns None on timeout or if the constraint tree is exhausted
    (unsolvable).  `deadline` is a wall-clock bound; `work_cap` bounds the
    total number of search expansions, a machine-independent budget that
    keeps repeated runs bit-identical.
    """
    if w < 1.0:
        raise ValueError("suboptimality factor must be >= 1")
    search = _ECBS(inst, float(w), deadline, work_cap)
    return search.run()


@dataclass
class _CTNode:
    node_id: int
    constraints: dict              # agent index -> (frozenset vertex, frozenset edge)
    paths: list                    # agent index -> tuple of Cells (ends at arrival)
    fmins: list
    cost: int = 0
    lb: int = 0
    n_conflicts: int = 0
    first_conflict: tuple = None
    closed: bool = False
    in_focal: bool = False


class _ECBS:
    def __init__(self, inst, w, deadline, work_cap=None):
        self.inst = inst
        self.w = w
        self.deadline = deadline
        self.work_cap = work_cap
        self.work = 0
        area = inst.area
        self.free = area.free_cells()
        self.adj = {}
        for cell in self.free:
            self.adj[cell] = [Cell(cell.col + dc, cell.row + dr)
                              for dc, dr in _CARDINAL
                              if not area.is_blocked((cell.col + dc, cell.row + dr))]
        self.n = len(inst.agents)
        self.starts = [Cell(*a.start) for a in inst.agents]
        self.goals = [Cell(*a.goal) for a in inst.agents]
        self.dist = [self._bfs_map(goal) for goal in self.goals]
        self.node_seq = 0

    def _bfs_map(self, src):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in self.adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return dist

    def _timed_out(self):
        if self.work_cap is not None and self.work > self.work_cap:
            return True
        return self.deadline is not None and time.perf_counter() > self.deadline

    # -- low level -----------------------------------------------------------

    def _low_level(self, i, vcons, econs, other_paths):
        """Focal space-time A*; returns (path, f_min) or None."""
        start = self.starts[i]
        goal = self.goals[i]
        dist = self.dist[i]
        if start not in dist:
            return None
        latest_goal_con = -1
        max_con_t = -1
        for cell, t in vcons:
            max_con_t = max(max_con_t, t)
            if cell == goal:
                latest_goal_con = max(latest_goal_con, t)
        for _, _, t in econs:
            max_con_t = max(max_con_t, t + 1)
        t_cap = max_con_t + len(self.free) + 2

        others = [tuple(p) for p in other_paths]

        def conflicts(u, v, t):
            # moving u -> v between steps t and t+1
            c = 0
            for p in others:
                last = len(p) - 1
                pv = p[t + 1] if t + 1 <= last else p[last]
                if pv == v:
                    c += 1
                elif t <= last - 1 and p[t] == v and p[t + 1] == u:
                    c += 1
            return c

        # node storage: (cell, t, parent_idx, conf)
        nodes = [(start, 0, -1, 0)]
        best = {(start, 0): 0}
        expanded = {}
        seq = 0
        h0 = dist[start]
        open_heap = [(h0, 0, start.row, start.col, 0)]     # (f, conf, row, col, node)
        pending = []
        focal = [(0, h0, h0, start.row, start.col, 0)]     # (conf, f, h, row, col, node)
        in_focal = {0}

        def stale(conf, cell, t):
            key = (cell, t)
            if best.get(key, conf) < conf:
                return True
            return expanded.get(key, conf + 1) <= conf

        def peek_fmin():
            while open_heap:
                f, conf, r, c, idx = open_heap[0]
                cell, t, _, nconf = nodes[idx]
                if stale(nconf, cell, t):
                    heapq.heappop(open_heap)
                    continue
                return f
            return None

        expansions = 0
        while True:
            fmin = peek_fmin()
            if fmin is None:
                return None
            bound = self.w * fmin
            while pending and pending[0][0] <= bound:
                f, conf, r, c, idx = heapq.heappop(pending)
                cell, t, _, nconf = nodes[idx]
                if stale(nconf, cell, t) or idx in in_focal:
                    continue
                in_focal.add(idx)
                heapq.heappush(focal, (nconf, f, dist[cell], cell.row, cell.col, idx))
            got = None
            while focal:
                nconf, f, h, r, c, idx = heapq.heappop(focal)
                cell, t, parent, conf = nodes[idx]
                if stale(conf, cell, t):
                    continue
                got = (idx, cell, t, conf, f)
                break
            if got is None:
                # focal drained; refill from pending on the next round
                if not pending:
                    return None
                continue
            idx, cell, t, conf, f = got
            if cell == goal and t > latest_goal_con:
                path = []
                k = idx
                while k != -1:
                    path.append(nodes[k][0])
                    k = nodes[k][2]
                path.reverse()
                fmin_now = peek_fmin()
                fmin_final = f if fmin_now is None else min(f, fmin_now)
                return path, fmin_final
            expanded[(cell, t)] = conf
            expansions += 1
            self.work += 1
            if expansions % 64 == 0 and self._timed_out():
                return None
            if t + 1 > t_cap:
                continue
            for nxt in (cell,) + tuple(self.adj[cell]):
                if (nxt, t + 1) in vcons:
                    continue
                if (cell, nxt, t) in econs:
                    continue
                if nxt not in dist:
                    continue
                nconf = conf + conflicts(cell, nxt, t)
                key = (nxt, t + 1)
                if best.get(key, nconf + 1) <= nconf:
                    continue
                if expanded.get(key, nconf + 1) <= nconf:
                    continue
                best[key] = nconf
                nodes.append((nxt, t + 1, idx, nconf))
                nidx = len(nodes) - 1
                nf = t + 1 + dist[nxt]
                entry = (nf, nconf, nxt.row, nxt.col, nidx)
                heapq.heappush(open_heap, entry)
                heapq.heappush(pending, entry)

    # -- high level ----------------------------------------------------------

    def _scan_conflicts(self, paths):
        """(count, first) over padded paths; rest-at-goal stays relevant."""
        T = max(len(p) for p in paths) - 1
        count = 0
        first = None

        def at(i, t):
            p = paths[i]
            return p[t] if t < len(p) else p[-1]

        for t in range(1, T + 1):
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    ci, cj = at(i, t), at(j, t)
                    if ci == cj:
                        count += 1
                        if first is None:
                            first = ("v", t, i, j, ci, ci)
                    elif ci == at(j, t - 1) and cj == at(i, t - 1):
                        count += 1
                        if first is None:
                            first = ("e", t, i, j, at(i, t - 1), ci)
        return count, first

    def _make_node(self, constraints, paths, fmins):
        self.node_seq += 1
        cost = sum(len(p) - 1 for p in paths)
        lb = sum(fmins)
        count, first = self._scan_conflicts(paths)
        return _CTNode(self.node_seq, constraints, paths, fmins,
                       cost=cost, lb=lb, n_conflicts=count, first_conflict=first)

    def run(self):
        constraints = {i: (frozenset(), frozenset()) for i in range(self.n)}
        paths = []
        fmins = []
        for i in range(self.n):
            res = self._low_level(i, frozenset(), frozenset(), paths)
            if res is None:
                return None
            path, fmin = res
            paths.append(tuple(path))
            fmins.append(fmin)
        root = self._make_node(constraints, paths, fmins)
        nodes = {root.node_id: root}
        open_heap = [(root.lb, root.node_id)]
        pending = [(root.cost, root.node_id)]  # migration to focal, by cost
        focal = []

        def peek_lb():
            while open_heap:
                lb, nid = open_heap[0]
                if nodes[nid].closed:
                    heapq.heappop(open_heap)
                    continue
                return lb
            return None

        while True:
            if self._timed_out():
                return None
            lb_min = peek_lb()
            if lb_min is None:
                return None
            bound = self.w * lb_min
            while pending and pending[0][0] <= bound:
                _, nid = heapq.heappop(pending)
                node = nodes[nid]
                if node.closed or node.in_focal:
                    continue
                node.in_focal = True
                heapq.heappush(focal, (node.n_conflicts, node.cost, nid))
            got = None
            while focal:
                nconf, cost, nid = heapq.heappop(focal)
                node = nodes[nid]
                if node.closed:
                    continue
                got = node
                break
            if got is None:
                if not pending:
                    return None
                continue
            node = got
            node.closed = True
            self.work += 1
            if node.first_conflict is None:
                T = max(len(p) for p in node.paths) - 1
                plans = [list(p) + [p[-1]] * (T + 1 - len(p)) for p in node.paths]
                return MAPFSolution(plans)
            kind, t, i, j, cell_a, cell_b = node.first_conflict
            for agent in (i, j):
                vset, eset = node.constraints[agent]
                if kind == "v":
                    vset = vset | {(cell_a, t)}
                else:
                    if agent == i:
                        frm = node.paths[i][min(t - 1, len(node.paths[i]) - 1)]
                        to = node.paths[i][min(t, len(node.paths[i]) - 1)]
                    else:
                        frm = node.paths[j][min(t - 1, len(node.paths[j]) - 1)]
                        to = node.paths[j][min(t, len(node.paths[j]) - 1)]
                    eset = eset | {(frm, to, t - 1)}
                child_cons = dict(node.constraints)
                child_cons[agent] = (vset, eset)
                others = [p for k, p in enumerate(node.paths) if k != agent]
                res = self._low_level(agent, vset, eset, others)
                if res is None:
                    if self._timed_out():
                        return None
                    continue
                path, fmin = res
                child_paths = list(node.paths)
                child_paths[agent] = tuple(path)
                child_fmins = list(node.fmins)
                child_fmins[agent] = max(child_fmins[agent], fmin)
                child = self._make_node(child_cons, child_paths, child_fmins)
                nodes[child.node_id] = child
                heapq.heappush(open_heap, (child.lb, child.node_id))
                heapq.heappush(pending, (child.cost, child.node_id))
