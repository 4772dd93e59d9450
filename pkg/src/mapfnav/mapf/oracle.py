"""Joint-configuration-space oracles used to test the MAPF solvers.

solve_optimal_oracle finds an optimal-flowtime solution by A* over the joint
state (all agent cells plus per-agent done flags, so waiting at the goal
after the final arrival costs nothing).  joint_bfs_solvable decides
solvability by BFS over joint states with single-agent moves into empty
cells; with at least one free vertex per component this reaches exactly the
configurations reachable under simultaneous motion, at a fraction of the
branching.
"""

from __future__ import annotations

import heapq
from collections import deque

from ..grid import Cell
from .solution import MAPFSolution

_CARDINAL = ((0, -1), (-1, 0), (1, 0), (0, 1))


class OracleLimit(Exception):
    """The joint state space exceeded the configured cap."""


def _adjacency(inst):
    adj = {}
    for cell in inst.area.free_cells():
        adj[cell] = [Cell(cell.col + dc, cell.row + dr)
                     for dc, dr in _CARDINAL
                     if not inst.area.is_blocked((cell.col + dc, cell.row + dr))]
    return adj


def _bfs_map(adj, src):
    dist = {src: 0}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def solve_optimal_oracle(inst, state_cap: int = 10_000_000) -> MAPFSolution | None:
    """Optimal-flowtime solution by joint A*, or None if unsolvable.

    Raises OracleLimit when more than state_cap joint states get generated.
    Vertex/edge conflict rules match validate_solution exactly.
    """
    adj = _adjacency(inst)
    n = len(inst.agents)
    starts = tuple(Cell(*a.start) for a in inst.agents)
    goals = tuple(Cell(*a.goal) for a in inst.agents)
    dists = [_bfs_map(adj, goal) for goal in goals]
    for i, start in enumerate(starts):
        if start not in dists[i]:
            return None
    full = (1 << n) - 1

    def h(cells, done):
        total = 0
        for i in range(n):
            if not done & (1 << i):
                total += dists[i][cells[i]]
        return total

    start_state = (starts, 0)
    g_best = {start_state: 0}
    heap = [(h(starts, 0), 0, starts, 0)]
    generated = 1
    parents = {start_state: None}
    while heap:
        f, g, cells, done = heapq.heappop(heap)
        state = (cells, done)
        if g > g_best.get(state, -1):
            continue
        if done == full:
            plan_states = []
            cur = state
            while cur is not None:
                plan_states.append(cur[0])
                cur = parents[cur]
            plan_states.reverse()
            plans = [[st[i] for st in plan_states] for i in range(n)]
            return MAPFSolution(plans)
        active = n - bin(done).count("1")
        step_cost = active

        options = []
        for i in range(n):
            if done & (1 << i):
                options.append(((cells[i], True),))
            else:
                opts = []
                for nxt in (cells[i],) + tuple(adj[cells[i]]):
                    if nxt not in dists[i]:
                        continue
                    if nxt == goals[i]:
                        opts.append((nxt, True))
                        opts.append((nxt, False))
                    else:
                        opts.append((nxt, False))
                options.append(tuple(opts))

        def recurse(idx, chosen):
            nonlocal generated
            if idx == n:
                new_cells = tuple(c for c, _ in chosen)
                new_done = 0
                for i, (_, d) in enumerate(chosen):
                    if d:
                        new_done |= 1 << i
                new_state = (new_cells, new_done)
                ng = g + step_cost
                if ng < g_best.get(new_state, float("inf")):
                    g_best[new_state] = ng
                    parents[new_state] = state
                    generated += 1
                    if generated > state_cap:
                        raise OracleLimit(f"exceeded {state_cap} joint states")
                    heapq.heappush(heap, (ng + h(new_cells, new_done), ng,
                                          new_cells, new_done))
                return
            for cand, d in options[idx]:
                ok = True
                for k in range(idx):
                    prev_cell = chosen[k][0]
                    if prev_cell == cand:
                        ok = False
                        break
                    if prev_cell == cells[idx] and cand == cells[k]:
                        ok = False
                        break
                if ok:
                    chosen.append((cand, d))
                    recurse(idx + 1, chosen)
                    chosen.pop()

        recurse(0, [])
    return None


def joint_bfs_solvable(inst, state_cap: int = 5_000_000) -> bool:
    """Decide solvability by BFS over joint states (one agent moves per step)."""
    adj = _adjacency(inst)
    starts = tuple(Cell(*a.start) for a in inst.agents)
    goals = tuple(Cell(*a.goal) for a in inst.agents)
    if starts == goals:
        return True
    seen = {starts}
    queue = deque([starts])
    while queue:
        state = queue.popleft()
        occupied = set(state)
        for i, cell in enumerate(state):
            for nxt in adj[cell]:
                if nxt in occupied:
                    continue
                new_state = state[:i] + (nxt,) + state[i + 1:]
                if new_state in seen:
                    continue
                if new_state == goals:
                    return True
                seen.add(new_state)
                if len(seen) > state_cap:
                    raise OracleLimit(f"exceeded {state_cap} joint states")
                queue.append(new_state)
    return False
