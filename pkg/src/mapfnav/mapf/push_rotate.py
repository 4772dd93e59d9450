"""Push and Rotate: complete pebble-motion MAPF solving on the instance subgrid.

Agents are solved one at a time in a dead-end-first order.  push advances an
agent along a shortest path, shoving movable blockers into free cells; swap
exchanges two adjacent agents at a junction (degree >= 3) and then undoes all
supporting moves with the pair's roles exchanged, so nobody else ends up
displaced; rotate resolves fully-occupied cycles by parking one agent off the
cycle.  Requires two unoccupied vertices in every component that holds
agents; produces a sequential plan (one move per step) with no cost
guarantee.
"""

from __future__ import annotations

import random
import time
from collections import deque

from ..grid import Cell
from .solution import MAPFSolution

_CARDINAL = ((0, -1), (-1, 0), (1, 0), (0, 1))

# Safety valve against livelock; generous next to observed move counts.
DEFAULT_MOVE_BUDGET = 200_000


def solve_push_and_rotate(inst, deadline=None, move_budget=DEFAULT_MOVE_BUDGET):
    """Solve an instance; returns a MAPFSolution or None (unsolvable/timeout)."""
    solver = _PushRotate(inst, deadline, move_budget)
    moves = solver.run()
    if moves is None:
        return None
    moves = _remove_noop_pairs(moves)
    return _moves_to_solution(inst, moves)


class _PushRotate:
    def __init__(self, inst, deadline, move_budget):
        self.inst = inst
        self.deadline = deadline
        self.move_budget = move_budget
        area = inst.area
        self.adj = {}
        for cell in area.free_cells():
            self.adj[cell] = [Cell(cell.col + dc, cell.row + dr)
                              for dc, dr in _CARDINAL
                              if not area.is_blocked((cell.col + dc, cell.row + dr))]
        self.n = len(inst.agents)
        self.pos = [Cell(*a.start) for a in inst.agents]
        self.targets = [Cell(*a.goal) for a in inst.agents]
        self.occupant = {c: None for c in self.adj}
        for i, p in enumerate(self.pos):
            self.occupant[p] = i
        self.fin = [False] * self.n
        self.fin_cells = set()
        self.moves = []
        self.displaced = []
        self._blocked_next = None

    # -- elementary state changes ------------------------------------------

    def _move(self, agent, to):
        frm = self.pos[agent]
        assert self.occupant.get(to) is None, "move into occupied cell"
        self.occupant[frm] = None
        self.occupant[to] = agent
        self.pos[agent] = to
        self.moves.append((agent, frm, to))

    def _rollback(self, mark):
        while len(self.moves) > mark:
            agent, frm, to = self.moves.pop()
            self.occupant[to] = None
            self.occupant[frm] = agent
            self.pos[agent] = frm

    def _out_of_budget(self):
        if len(self.moves) > self.move_budget:
            return True
        return self.deadline is not None and time.perf_counter() > self.deadline

    # -- search helpers ----------------------------------------------------

    def _bfs_path(self, src, dst, avoid=frozenset()):
        if src == dst:
            return [src]
        prev = {src: None}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in self.adj[cur]:
                if nxt in prev or nxt in avoid:
                    continue
                prev[nxt] = cur
                if nxt == dst:
                    path = [dst]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    path.reverse()
                    return path
                queue.append(nxt)
        return None

    def _bfs_dist(self, src):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in self.adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return dist

    def _clear_vertex(self, v, locked, excluded_terminals=frozenset()):
        """Empty vertex v by compressing its occupant chain toward a free cell.

        Never routes through or moves agents on `locked` cells; the freed
        terminal may not be in excluded_terminals.  Full compression, so any
        interior free cells of the escape path end up free again.
        """
        if self.occupant[v] is None:
            return True
        prev = {v: None}
        queue = deque([v])
        path = None
        while queue:
            cur = queue.popleft()
            for nxt in self.adj[cur]:
                if nxt in prev or nxt in locked:
                    continue
                prev[nxt] = cur
                if self.occupant[nxt] is None and nxt not in excluded_terminals:
                    path = [nxt]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    path.reverse()
                    queue.clear()
                    break
                queue.append(nxt)
        if path is None:
            return False
        moved = True
        while moved:
            moved = False
            for i in range(len(path) - 2, -1, -1):
                a = self.occupant[path[i]]
                if a is not None and self.occupant[path[i + 1]] is None:
                    self._move(a, path[i + 1])
                    moved = True
        return self.occupant[v] is None

    # -- primitives ----------------------------------------------------------

    def _push(self, agent):
        """Advance one step along a shortest path, clearing movable blockers."""
        self._blocked_next = None
        avoid = self.fin_cells - {self.pos[agent], self.targets[agent]}
        path = self._bfs_path(self.pos[agent], self.targets[agent], avoid)
        if path is None:
            path = self._bfs_path(self.pos[agent], self.targets[agent])
        if path is None:
            return False  # disconnected: instance unsolvable
        nxt = path[1]
        self._blocked_next = nxt
        if self.occupant[nxt] is None:
            self._move(agent, nxt)
            return True
        locked = self.fin_cells | {self.pos[agent]}
        if nxt not in self.fin_cells and self._clear_vertex(nxt, locked):
            self._move(agent, nxt)
            return True
        return False

    def _swap(self, agent, other):
        """Exchange two adjacent agents; everyone else ends where they started."""
        dist = self._bfs_dist(self.pos[agent])
        junctions = sorted((c for c in self.adj if len(self.adj[c]) >= 3 and c in dist),
                           key=lambda c: (dist[c], c.row, c.col))
        for w in junctions:
            for lead, trail in ((agent, other), (other, agent)):
                mark = len(self.moves)
                if self._multipush(lead, trail, w) and self._clear_two(w, lead, trail):
                    prefix = self.moves[mark:]
                    self._exchange(lead, trail)
                    for ag, frm, to in reversed(prefix):
                        if ag == lead:
                            ag = trail
                        elif ag == trail:
                            ag = lead
                        self._move(ag, frm)
                    return True
                self._rollback(mark)
        return False

    def _multipush(self, lead, trail, w):
        """Walk the pair (lead in front) to the junction w, clearing the way."""
        path = self._bfs_path(self.pos[lead], w, avoid={self.pos[trail]})
        if path is None:
            return False
        for nxt in path[1:]:
            if self._out_of_budget():
                return False
            if self.occupant[nxt] is not None:
                if not self._clear_vertex(nxt, {self.pos[lead], self.pos[trail]}):
                    return False
            old = self.pos[lead]
            self._move(lead, nxt)
            self._move(trail, old)
        return True

    def _clear_two(self, w, lead, trail):
        """Free two neighbors of the junction w other than the trail's cell."""
        u = self.pos[trail]
        targets = [n for n in self.adj[w] if n != u]

        def empties():
            return [n for n in targets if self.occupant[n] is None]

        for _ in range(4):
            if len(empties()) >= 2:
                return True
            mark_round = len(self.moves)
            for n in targets:
                if self.occupant[n] is not None:
                    self._clear_vertex(n, {w, u} | set(empties()))
            if len(empties()) >= 2:
                return True
            if len(empties()) == 1:
                # forward relay: tuck the pair into the free corner so the
                # escape may pass through the trail's vacated cell
                n1 = empties()[0]
                for n2 in targets:
                    if self.occupant[n2] is None:
                        continue
                    mark = len(self.moves)
                    self._move(lead, n1)
                    self._move(trail, w)
                    if (self._clear_vertex(n2, {w, n1}, excluded_terminals={u})
                            and self.occupant[u] is None):
                        self._move(trail, u)
                        self._move(lead, w)
                        if len(empties()) >= 2:
                            return True
                    else:
                        self._rollback(mark)
            # backward relay: step the pair back so the junction itself
            # becomes a through-corridor for a trapped neighbor
            for rear in self.adj[u]:
                if rear == w:
                    continue
                mark = len(self.moves)
                if self.occupant[rear] is not None:
                    self._clear_vertex(rear, {w, u})
                if self.occupant[rear] is not None:
                    self._rollback(mark)
                    continue
                self._move(trail, rear)
                self._move(lead, u)
                for n2 in targets:
                    if self.occupant[n2] is not None:
                        self._clear_vertex(n2, {u, rear}, excluded_terminals={w})
                if self.occupant[w] is None:
                    self._move(lead, w)
                    self._move(trail, u)
                    if len(empties()) >= 2:
                        return True
                    if len(self.moves) > mark + 4:
                        break  # partial progress; rerun the plain clears
                    self._rollback(mark)
                else:
                    self._rollback(mark)
            if len(self.moves) == mark_round:
                break
        return len(empties()) >= 2

    def _exchange(self, lead, trail):
        """Five-cell shuffle around the junction; the pair ends exchanged."""
        w = self.pos[lead]
        u = self.pos[trail]
        free = [n for n in self.adj[w] if n != u and self.occupant[n] is None]
        n1, n2 = free[0], free[1]
        self._move(lead, n1)
        self._move(trail, w)
        self._move(trail, n2)
        self._move(lead, w)
        self._move(lead, u)
        self._move(trail, w)

    def _rotate(self, agent):
        """Break a fully-occupied desire cycle by parking one member off it."""
        chain_cells = [self.pos[agent]]
        chain_agents = [agent]
        seen = {self.pos[agent]: 0}
        cycle = None
        while True:
            cur = chain_agents[-1]
            if self.pos[cur] == self.targets[cur]:
                return False
            path = self._bfs_path(self.pos[cur], self.targets[cur])
            if path is None:
                return False
            nxt = path[1]
            occ = self.occupant[nxt]
            if occ is None or self.fin[occ]:
                return False
            if nxt in seen:
                start = seen[nxt]
                cycle = (chain_cells[start:], chain_agents[start:])
                break
            seen[nxt] = len(chain_cells)
            chain_cells.append(nxt)
            chain_agents.append(occ)
        cells, agents = cycle
        m = len(cells)
        if m < 2:
            return False
        locked = set(cells) | self.fin_cells
        for j in range(m):
            wj = cells[j]
            for nb in self.adj[wj]:
                if nb in cells:
                    continue
                mark = len(self.moves)
                if self.occupant[nb] is not None:
                    if not self._clear_vertex(nb, locked):
                        self._rollback(mark)
                        continue
                self._move(agents[j], nb)
                for k in range(1, m):
                    i = (j - k) % m
                    self._move(agents[i], cells[(i + 1) % m])
                gap = cells[(j + 1) % m]
                if gap in self.adj[nb]:
                    self._move(agents[j], gap)
                    return True
                partner = agents[(j - 1) % m]
                if self._swap(agents[j], partner):
                    self._move(agents[j], gap)
                    self._move(partner, cells[j])
                    return True
                self._rollback(mark)
        return False

    # -- main loop -----------------------------------------------------------

    def run(self):
        """Solve with precedence-aware ordering, retrying reorderings on failure.

        An agent whose goal is a cut vertex must finish after every agent it
        would wall off, so those constraints come first; remaining ties go to
        dead-end-tip targets.  The primitives are order-sensitive on
        blank-starved graphs, so a failed pass is retried from scratch with
        alternative orders, and tiny instances fall back to an exhaustive
        joint-space search, which settles solvability outright.
        """
        depth = _peel_depth(self.adj)

        def tip_key(i):
            d = depth.get(self.targets[i], 0)
            # dead-end targets first, tip-most first; open-space targets last
            return (d == 0, d, i)

        orders = [self._precedence_order(tip_key),
                  sorted(range(self.n), key=tip_key),
                  list(range(self.n)),
                  list(reversed(sorted(range(self.n), key=tip_key)))]
        rng = random.Random(421)
        for _ in range(8):
            shuffled = list(range(self.n))
            rng.shuffle(shuffled)
            orders.append(shuffled)
        snapshot = list(self.pos)
        for order in orders:
            moves = self._solve_in_order(order)
            if moves is not None:
                return moves
            if self.deadline is not None and time.perf_counter() > self.deadline:
                return None
            self._reset(snapshot)
        return self._joint_fallback()

    def _reset(self, snapshot):
        self.moves = []
        self.displaced = []
        self.fin = [False] * self.n
        self.fin_cells = set()
        for cell in self.occupant:
            self.occupant[cell] = None
        self.pos = list(snapshot)
        for i, p in enumerate(self.pos):
            self.occupant[p] = i

    def _precedence_order(self, tie_key):
        """Topological order of 'i finishes before j' constraints.

        i must precede j when deleting j's goal cell disconnects i's start
        from i's goal: once j parks there, i could only get home by
        displacing it.
        """
        after = {i: set() for i in range(self.n)}  # after[j] = agents before j
        for j in range(self.n):
            hole = self.targets[j]
            for i in range(self.n):
                if i == j or self.pos[i] == self.targets[i]:
                    continue
                if self.pos[i] == hole or self.targets[i] == hole:
                    continue
                if self._bfs_path(self.pos[i], self.targets[i], {hole}) is None:
                    after[j].add(i)
        order = []
        done = set()
        candidates = sorted(range(self.n), key=tie_key)
        while len(order) < self.n:
            pick = None
            for i in candidates:
                if i not in done and after[i] <= done:
                    pick = i
                    break
            if pick is None:  # constraint cycle; fall back to tie order
                pick = next(i for i in candidates if i not in done)
            order.append(pick)
            done.add(pick)
        return order

    def _joint_fallback(self):
        """Exhaustive single-mover BFS; complete on small blank-starved graphs."""
        free_n = len(self.adj)
        space = 1.0
        for k in range(self.n):
            space *= max(free_n - k, 1)
        if space > 600_000:
            return None
        starts = tuple(self.pos)
        goals = tuple(self.targets)
        if starts == goals:
            return []
        prev = {starts: None}
        queue = deque([starts])
        found = None
        ticks = 0
        while queue and found is None:
            state = queue.popleft()
            ticks += 1
            if ticks % 1024 == 0 and self.deadline is not None \
                    and time.perf_counter() > self.deadline:
                return None
            occupied = set(state)
            for i, cell in enumerate(state):
                for nxt in self.adj[cell]:
                    if nxt in occupied:
                        continue
                    new_state = state[:i] + (nxt,) + state[i + 1:]
                    if new_state in prev:
                        continue
                    prev[new_state] = (state, i, cell, nxt)
                    if new_state == goals:
                        found = new_state
                        break
                    queue.append(new_state)
                if found:
                    break
        if found is None:
            return None
        moves = []
        cur = found
        while prev[cur] is not None:
            state, i, frm, to = prev[cur]
            moves.append((i, frm, to))
            cur = state
        moves.reverse()
        for agent, frm, to in moves:
            self._move(agent, to)
        return self.moves

    def _solve_in_order(self, order):
        pending = deque(order)
        while pending:
            a = pending.popleft()
            while self.pos[a] != self.targets[a]:
                if self._out_of_budget():
                    return None
                if self._push(a):
                    continue
                blocker_cell = self._blocked_next
                if blocker_cell is None:
                    return None
                blocker = self.occupant[blocker_cell]
                if blocker is not None and self._swap(a, blocker):
                    if self.fin[blocker]:
                        self.fin[blocker] = False
                        self.fin_cells.discard(self.targets[blocker])
                        self.displaced.append(blocker)
                    continue
                if self._rotate(a):
                    continue
                return None
            self.fin[a] = True
            self.fin_cells.add(self.pos[a])
            while self.displaced:
                pending.appendleft(self.displaced.pop())
        return self.moves


def _peel_depth(adj):
    """Rounds of degree-<=1 peeling; 0 on the 2-core, 1 at dead-end tips.

    Solving tip-target agents first keeps corridors and trees feasible: an
    agent parked at a dead-end tip is behind everyone else and can never be
    asked to make way again.
    """
    deg = {v: len(ns) for v, ns in adj.items()}
    depth = {v: 0 for v in adj}
    frontier = sorted(v for v, d in deg.items() if d <= 1)
    removed = set()
    rnd = 0
    while frontier:
        rnd += 1
        nxt = []
        for v in frontier:
            if v in removed:
                continue
            removed.add(v)
            depth[v] = rnd
            for u in adj[v]:
                if u not in removed:
                    deg[u] -= 1
                    if deg[u] <= 1:
                        nxt.append(u)
        frontier = sorted(set(nxt) - removed)
    return depth


def _remove_noop_pairs(moves):
    """Drop back-and-forth pairs no other move depends on; repeat to fixpoint."""
    moves = list(moves)
    changed = True
    while changed:
        changed = False
        nxt_same = {}
        last_by_agent = {}
        for idx, (ag, _, _) in enumerate(moves):
            if ag in last_by_agent:
                nxt_same[last_by_agent[ag]] = idx
            last_by_agent[ag] = idx
        for idx in range(len(moves)):
            jdx = nxt_same.get(idx)
            if jdx is None:
                continue
            ag, frm, to = moves[idx]
            _, frm2, to2 = moves[jdx]
            if frm2 != to or to2 != frm:
                continue
            if all(m[1] != frm and m[1] != to and m[2] != frm and m[2] != to
                   for m in moves[idx + 1:jdx]):
                del moves[jdx]
                del moves[idx]
                changed = True
                break
    return moves


def _moves_to_solution(inst, moves) -> MAPFSolution:
    plans = [[Cell(*a.start)] for a in inst.agents]
    for ag, _, to in moves:
        for i, plan in enumerate(plans):
            plan.append(to if i == ag else plan[-1])
    return MAPFSolution(plans)
