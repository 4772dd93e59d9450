"""Time-stepped world: exact kinematics, snapshots, termination, metrics.

Each step freezes a snapshot of all agent states; every controller reads
only the snapshot, so agent evaluation order cannot leak information.
Velocity commands are applied exactly (p += v, dt = 1).  Group decisions
(deadlock-triggered coordination, readiness, completion, external-agent
updates) are resolved once per step from the same snapshot, which keeps
every participant's episode field-identical without a central controller
fiction: all inputs are data any participant could observe or exchange
within sensing range.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

import numpy as np

from . import controller as ctrl
from ._kernels import step_velocities_kernel
from .deadlock import SpeedWindow, record_speed, reported_speed, detect_deadlock
from .grid import AgentParams, Cell, GridMap, cell_of, center_of
from .mapf import InstanceError, build_instance, mix_seed, solve_combined
from .orca import TAU_AGENT, TAU_OBSTACLE, obstacle_index
from .planner import GeometricPath, Unreachable, next_waypoint, plan_theta_star


@dataclass
class SimConfig:
    max_steps: int = 20000
    stall_window: int = 1000
    stall_threshold: float = 0.0001
    time_cap_mapf: float = 1.0       # shared wall-clock cap per MAPF call, seconds
    w_ecbs: float = 10.0
    offset: int = 3                  # MAPF area expansion, cells
    seed: int = 0
    params: AgentParams = field(default_factory=AgentParams)
    mapf_enabled: bool = True        # False = plain reactive navigation
    log_mapf: bool = False           # keep every built instance for offline study

    def __post_init__(self):
        if self.max_steps <= 0 or self.stall_window <= 0:
            raise ValueError("max_steps and stall_window must be positive")
        if self.stall_threshold <= 0 or self.time_cap_mapf <= 0:
            raise ValueError("stall_threshold and time_cap_mapf must be positive")
        if self.w_ecbs < 1.0:
            raise ValueError("w_ecbs must be >= 1")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


@dataclass
class RunResult:
    success: bool
    reason: str                      # all-goals | stall | step-limit
    steps: int
    flowtime: int
    makespan: int
    n_mapf_calls: int
    mean_mapf_agents: float
    mapf_mode_steps: int
    normal_mode_steps: int
    collisions: int


@dataclass
class Scenario:
    """One navigation task: a map plus per-agent start and goal cells."""

    grid: GridMap
    starts: list
    goals: list
    map_path: str | None = None

    def __post_init__(self):
        if len(self.starts) != len(self.goals):
            raise ValueError("starts and goals must pair up")
        seen = set()
        for cell in self.starts:
            if self.grid.is_blocked(cell):
                raise ValueError(f"start {tuple(cell)} blocked")
            if tuple(cell) in seen:
                raise ValueError(f"duplicate start {tuple(cell)}")
            seen.add(tuple(cell))
        seen = set()
        for cell in self.goals:
            if self.grid.is_blocked(cell):
                raise ValueError(f"goal {tuple(cell)} blocked")
            if tuple(cell) in seen:
                raise ValueError(f"duplicate goal {tuple(cell)}")
            seen.add(tuple(cell))

    def to_json(self, map_path=None) -> dict:
        return {
            "map": map_path or self.map_path,
            "agents": [{"start": [s[0], s[1]], "goal": [g[0], g[1]]}
                       for s, g in zip(self.starts, self.goals)],
        }

    @classmethod
    def from_json(cls, doc: dict, grid: GridMap) -> "Scenario":
        starts = [Cell(*a["start"]) for a in doc["agents"]]
        goals = [Cell(*a["goal"]) for a in doc["agents"]]
        return cls(grid, starts, goals, map_path=doc.get("map"))


class _AgentState:
    __slots__ = ("idx", "mode", "window", "path", "episode", "finished",
                 "finish_step", "target", "anchor_pos", "anchor_step")

    def __init__(self, idx, path, window_k):
        self.idx = idx
        self.mode = ctrl.NORMAL
        self.window = SpeedWindow(window_k)
        self.path = path
        self.episode = None
        self.finished = False
        self.finish_step = None
        self.target = path.waypoints[0]
        self.anchor_pos = tuple(path.waypoints[0])
        self.anchor_step = 0


def check_collisions(positions, r_phys: float) -> int:
    """Unordered pairs closer than 2*r_phys (strict, with a 1e-9 guard band)."""
    pos = np.asarray(positions, dtype=np.float64)
    n = len(pos)
    if n < 2:
        return 0
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.hypot(diff[:, :, 0], diff[:, :, 1])
    hit = d < (2.0 * r_phys - 1e-9)
    return int((np.triu(hit, k=1)).sum())


class World:
    """Mutable simulation state for one scenario run."""

    def __init__(self, scenario: Scenario, config: SimConfig | None = None):
        self.scenario = scenario
        self.config = config or SimConfig()
        self.grid = scenario.grid
        p = self.config.params
        self.n = len(scenario.starts)
        self.pos = np.array([center_of(c) for c in scenario.starts],
                            dtype=np.float64).reshape(self.n, 2)
        self.vel = np.zeros((self.n, 2), dtype=np.float64)
        self.radius = np.full(self.n, p.r_avoid, dtype=np.float64)
        self.ids = np.arange(self.n, dtype=np.int64)
        self.agents = [
            _AgentState(i, plan_theta_star(self.grid, s, g), p.window_k)
            for i, (s, g) in enumerate(zip(scenario.starts, scenario.goals))
        ]
        # walls use the same inflated avoidance radius as agent pairs; with
        # 1-cell passages this leaves reactive navigation a hair's width of
        # slack, which is exactly what makes coordinated plan-following
        # (which bypasses avoidance) worth triggering
        self.r_obst = p.r_avoid
        self.obstacles = obstacle_index(
            self.grid, TAU_OBSTACLE * p.v_max + self.r_obst)
        self.step_count = 0
        self.event_counter = 0
        self.episode_counter = 0
        self.collisions = 0
        self.mapf_mode_steps = 0
        self.normal_mode_steps = 0
        self.n_mapf_calls = 0
        self.mapf_agents_total = 0
        self.mean_speeds = []        # per-step mean speed over all agents
        self.mapf_log = []           # instance JSON docs when config.log_mapf
        self.substeps = ctrl.substeps_per_move(p.v_max)

    # -- group decisions ----------------------------------------------------

    def _parked_cells(self):
        """Cells no coordinated plan may use: parked agents plus the cells
        whose centers lie inside a parked agent's avoidance disc (a mover can
        never settle there, so starts or goals there would wedge the group).
        """
        p = self.config.params
        blocked = set()
        reach = 2.0 * p.r_avoid
        for a in self.agents:
            if not a.finished:
                continue
            x, y = self.pos[a.idx]
            c0, r0 = cell_of((x, y))
            for c in range(c0 - 1, c0 + 2):
                for r in range(r0 - 1, r0 + 2):
                    if math.hypot(c + 0.5 - x, r + 0.5 - y) < reach:
                        blocked.add(Cell(c, r))
        return blocked

    def _neighbor_lists(self):
        diff = self.pos[:, None, :] - self.pos[None, :, :]
        d = np.hypot(diff[:, :, 0], diff[:, :, 1])
        np.fill_diagonal(d, np.inf)
        within = d <= self.config.params.sense_range
        return [np.nonzero(within[i])[0] for i in range(self.n)], d

    def _reported(self):
        p = self.config.params
        return [reported_speed(a.window, a.mode, p.v_max) for a in self.agents]

    def _build_and_solve(self, participants):
        """One MAPF creation event: returns a ready episode or None."""
        cfg = self.config
        self.event_counter += 1
        self.n_mapf_calls += 1
        self.mapf_agents_total += len(participants)
        states = {i: (self.pos[i, 0], self.pos[i, 1]) for i in participants}
        waypoints = {i: self.agents[i].target for i in participants}
        try:
            inst = build_instance(participants, mix_seed(cfg.seed, self.event_counter),
                                  cfg.offset, self.grid, states, waypoints,
                                  static_cells=self._parked_cells())
        except InstanceError:
            return None
        if cfg.log_mapf:
            self.mapf_log.append(inst.to_json())
        result = solve_combined(inst, cfg.w_ecbs, cfg.time_cap_mapf)
        if not result.ok:
            return None
        self.episode_counter += 1
        return ctrl.make_episode(self.episode_counter, inst, result.solution)

    def _adopt_episode(self, episode):
        episode.phase_started = self.step_count
        for aid in episode.participants:
            agent = self.agents[aid]
            agent.episode = episode
            agent.mode = ctrl.MOVE_TO_START

    def _dissolve(self, episode):
        for aid in episode.participants:
            agent = self.agents[aid]
            agent.episode = None
            agent.mode = ctrl.NORMAL
            agent.window.clear()   # post-coordination warm-up masking

    def _abandon_group(self, participants):
        for aid in participants:
            self.agents[aid].window.clear()

    def _replan_around_parked(self, a):
        """Fresh geometric path from the agent's cell, avoiding parked discs.

        Falls back to the bare grid (and failing that keeps the old path) so
        a hopeless layout degrades to the previous behavior.
        """
        start = cell_of(self.pos[a.idx])
        goal = cell_of(a.path.goal)
        parked = {c for c in self._parked_cells()
                  if self.grid.in_bounds(c)} - {start, goal}
        try:
            if parked:
                g2 = GridMap(self.grid.width, self.grid.height,
                             set(self.grid.blocked) | parked)
                a.path = plan_theta_star(g2, start, goal)
            else:
                a.path = plan_theta_star(self.grid, start, goal)
        except (Unreachable, ValueError):
            try:
                a.path = plan_theta_star(self.grid, start, goal)
            except (Unreachable, ValueError):
                pass

    def _active_episodes(self):
        seen = {}
        for a in self.agents:
            if a.episode is not None and a.episode.episode_id not in seen:
                seen[a.episode.episode_id] = a.episode
        return [seen[k] for k in sorted(seen)]

    def _update_external(self, neighbors):
        """Absorb outsiders that came within range of an executing group."""
        merges = []   # (set of episode ids, set of agent ids)
        for ep in self._active_episodes():
            if ep.phase != ctrl.MAPF:
                continue
            intruders = set()
            for aid in ep.participants:
                for j in neighbors[aid]:
                    j = int(j)
                    if j in ep.participants or self.agents[j].finished:
                        continue
                    intruders.add(j)
            if intruders:
                merges.append((ep, intruders))
        if not merges:
            return
        # cluster overlapping merge events so one rebuild covers them all
        clusters = []
        for ep, intruders in merges:
            group = set(ep.participants) | intruders
            eps = {ep.episode_id}
            for other in list(clusters):
                if other[1] & group:
                    eps |= other[0]
                    group |= other[1]
                    clusters.remove(other)
            clusters.append((eps, group))
        for _, group in sorted(clusters, key=lambda c: min(c[1])):
            # absorb whole episodes any group member belongs to
            full = set(group)
            for aid in group:
                ep = self.agents[aid].episode
                if ep is not None:
                    full |= ep.participants
            eligible = {aid for aid in full if not self.agents[aid].finished}
            for aid in sorted(eligible):
                ep = self.agents[aid].episode
                if ep is not None:
                    self._dissolve(ep)
            episode = self._build_and_solve(frozenset(eligible))
            if episode is not None:
                self._adopt_episode(episode)
            else:
                self._abandon_group(eligible)

    def _detect_deadlocks(self, neighbors, reports):
        cfg = self.config
        p = cfg.params
        claimed = set()
        for i in range(self.n):
            agent = self.agents[i]
            if (agent.finished or agent.mode != ctrl.NORMAL or i in claimed
                    or agent.episode is not None):
                continue
            if not detect_deadlock(reports[i],
                                   [reports[int(j)] for j in neighbors[i]],
                                   p.v_low):
                continue
            eligible = {
                j for j in range(self.n)
                if not self.agents[j].finished and self.agents[j].mode == ctrl.NORMAL
                and self.agents[j].episode is None and j not in claimed
            }
            proximity = {j: [int(k) for k in neighbors[j] if int(k) in eligible]
                         for j in eligible}
            participants = frozenset(
                {i} | set(proximity[i])
                | {k for j in proximity[i] for k in proximity[j]})
            claimed |= participants
            episode = self._build_and_solve(participants)
            if episode is not None:
                self._adopt_episode(episode)
            else:
                self._abandon_group(participants)

    # -- one simulation step --------------------------------------------------

    def step(self):
        cfg = self.config
        p = cfg.params
        neighbors, dists = self._neighbor_lists()
        reports = self._reported()

        # current waypoint for every normal-mode agent (also feeds instances);
        # a lone agent that made no net progress over a whole window has
        # nobody to coordinate with, so it replans its geometric path from
        # where it actually stands, detouring around parked agents (agents
        # in company stall instead, which is what the deadlock detector
        # needs to see)
        for a in self.agents:
            if not a.finished and a.mode == ctrl.NORMAL:
                alone = not any(not self.agents[int(j)].finished
                                for j in neighbors[a.idx])
                if self.step_count - a.anchor_step >= p.window_k:
                    moved = math.hypot(self.pos[a.idx, 0] - a.anchor_pos[0],
                                       self.pos[a.idx, 1] - a.anchor_pos[1])
                    # an unobstructed agent covers ~window_k * v_max cells;
                    # a couple of cells of net progress means truly wedged
                    if alone and moved < 2.0:
                        self._replan_around_parked(a)
                    a.anchor_step = self.step_count
                    a.anchor_pos = (self.pos[a.idx, 0], self.pos[a.idx, 1])
                a.target = next_waypoint(a.path, tuple(self.pos[a.idx]),
                                         self.grid, delta_wp=p.r_phys)
            else:
                a.anchor_step = self.step_count
                a.anchor_pos = (self.pos[a.idx, 0], self.pos[a.idx, 1])

        if cfg.mapf_enabled:
            self._update_external(neighbors)
            self._detect_deadlocks(neighbors, reports)

        # group readiness / completion (same snapshot for every participant)
        positions = {i: (self.pos[i, 0], self.pos[i, 1]) for i in range(self.n)}
        for ep in self._active_episodes():
            if ep.phase == ctrl.MOVE_TO_START:
                if self.step_count - ep.phase_started > ctrl.MOVE_TO_START_TIMEOUT:
                    self._dissolve(ep)
                    continue
                if ctrl.all_ready(ep, positions):
                    for aid in ep.participants:
                        cx, cy = center_of(ep.starts[aid])
                        self.pos[aid, 0] = cx
                        self.pos[aid, 1] = cy
                        self.agents[aid].mode = ctrl.MAPF
                    ep.phase = ctrl.MAPF
                    ep.phase_started = self.step_count
                    ep.sync_step = 0
                    ep.substep = 0
            elif ep.phase == ctrl.MAPF and ep.sync_step >= ep.makespan:
                self._dissolve(ep)
                for aid in ep.participants:
                    a = self.agents[aid]
                    a.target = next_waypoint(a.path, tuple(self.pos[aid]),
                                             self.grid, delta_wp=p.r_phys)

        # velocity commands (all read the frozen pos/vel arrays)
        newvel = np.zeros((self.n, 2), dtype=np.float64)
        orca_mask = np.zeros(self.n, dtype=np.uint8)
        targets = np.zeros((self.n, 2), dtype=np.float64)
        for a in self.agents:
            i = a.idx
            if a.finished:
                continue
            if a.mode == ctrl.MAPF:
                newvel[i] = ctrl.plan_velocity(a.episode, i, self.pos[i], p.v_max)
            else:
                orca_mask[i] = 1
                tgt = a.target if a.mode == ctrl.NORMAL else center_of(a.episode.starts[i])
                targets[i, 0] = tgt[0]
                targets[i, 1] = tgt[1]
        if orca_mask.any():
            nbr_idx = []
            nbr_start = np.zeros(self.n + 1, dtype=np.int64)
            cand_idx = []
            cand_start = np.zeros(self.n + 1, dtype=np.int64)
            for i in range(self.n):
                if orca_mask[i]:
                    nbr_idx.append(neighbors[i].astype(np.int64))
                    cand_idx.append(self.obstacles.candidates(self.pos[i]))
                else:
                    nbr_idx.append(np.empty(0, dtype=np.int64))
                    cand_idx.append(np.empty(0, dtype=np.int64))
                nbr_start[i + 1] = nbr_start[i] + len(nbr_idx[-1])
                cand_start[i + 1] = cand_start[i] + len(cand_idx[-1])
            step_velocities_kernel(
                self.pos, self.vel, self.radius, self.ids, orca_mask, targets,
                nbr_start, np.concatenate(nbr_idx) if nbr_idx else np.empty(0, np.int64),
                self.obstacles.segs, cand_start,
                np.concatenate(cand_idx) if cand_idx else np.empty(0, np.int64),
                TAU_AGENT, TAU_OBSTACLE, 1.0, p.v_max, self.r_obst, newvel)

        # apply controls exactly; velocities never exceed v_max
        speeds = np.hypot(newvel[:, 0], newvel[:, 1])
        over = speeds > p.v_max
        if over.any():
            assert speeds.max() <= p.v_max + 1e-9, "velocity bound violated"
            newvel[over] *= (p.v_max / speeds[over])[:, None]
            speeds[over] = p.v_max
        self.vel = newvel
        self.pos += newvel
        self.step_count += 1

        # advance executing plans in lockstep
        for ep in self._active_episodes():
            if ep.phase == ctrl.MAPF:
                ep.substep += 1
                if ep.substep >= self.substeps:
                    ep.substep = 0
                    ep.sync_step += 1

        # bookkeeping: windows, mode time, arrivals, collisions
        n_plan = 0
        for a in self.agents:
            record_speed(a.window, float(speeds[a.idx]))
            if a.mode == ctrl.NORMAL:
                self.normal_mode_steps += 1
            else:
                n_plan += 1
            if (not a.finished and a.mode == ctrl.NORMAL and a.path.done):
                gx, gy = a.path.goal
                if math.hypot(self.pos[a.idx, 0] - gx, self.pos[a.idx, 1] - gy) <= p.r_phys:
                    a.finished = True
                    a.finish_step = self.step_count
        self.mapf_mode_steps += n_plan
        self.collisions += check_collisions(self.pos, p.r_phys)
        self.mean_speeds.append(float(speeds.mean()) if self.n else 0.0)
        if len(self.mean_speeds) > cfg.stall_window:
            self.mean_speeds.pop(0)

    # -- termination ----------------------------------------------------------

    def finished(self) -> bool:
        return all(a.finished for a in self.agents)

    def stalled(self) -> bool:
        if len(self.mean_speeds) < self.config.stall_window:
            return False
        return (sum(self.mean_speeds) / len(self.mean_speeds)
                < self.config.stall_threshold)

    def result(self, reason: str) -> RunResult:
        cfg = self.config
        finish = [a.finish_step if a.finish_step is not None else cfg.max_steps
                  for a in self.agents]
        calls = self.n_mapf_calls
        return RunResult(
            success=(reason == "all-goals"),
            reason=reason,
            steps=self.step_count,
            flowtime=sum(finish),
            makespan=max(finish, default=0),
            n_mapf_calls=calls,
            mean_mapf_agents=(self.mapf_agents_total / calls) if calls else 0.0,
            mapf_mode_steps=self.mapf_mode_steps,
            normal_mode_steps=self.normal_mode_steps,
            collisions=self.collisions,
        )


def run(scenario: Scenario, config: SimConfig | None = None,
        on_step=None) -> RunResult:
    """Simulate until all goals are reached, the world stalls, or steps run out."""
    world = World(scenario, config)
    if world.n == 0:
        return world.result("all-goals")
    while True:
        if world.finished():
            return world.result("all-goals")
        if world.step_count >= world.config.max_steps:
            return world.result("step-limit")
        if world.stalled():
            return world.result("stall")
        world.step()
        if on_step is not None:
            on_step(world)


def generate_scenario(g: GridMap, n_agents: int, seed: int,
                      map_kind: str = "random") -> Scenario:
    """Random distinct starts and goals on the largest free component.

    Gaps-style maps split the agents: half start in the left hall with goals
    in the right hall, half the other way around.
    """
    rng = random.Random(seed)
    free = g.free_cells()
    comp = _largest_component(g, free)
    if map_kind == "gaps":
        wall_col = _wall_column(g)
        # endpoints live in the halls proper, clear of the wall; an agent
        # parked right beside the passage would seal it for everyone
        margin = 2
        left = sorted(c for c in comp if c.col < wall_col - margin)
        right = sorted(c for c in comp if c.col > wall_col + margin)
        n_lr = (n_agents + 1) // 2
        n_rl = n_agents - n_lr
        if n_lr > min(len(left), len(right)) or n_rl > min(len(left), len(right)):
            raise ValueError("not enough free cells in the halls")
        starts = rng.sample(left, n_lr)
        goals = rng.sample(right, n_lr)
        starts += rng.sample([c for c in right if c not in goals], n_rl)
        goals += rng.sample([c for c in left if c not in starts], n_rl)
        return Scenario(g, starts, goals)
    cells = sorted(comp)
    if n_agents > len(cells):
        raise ValueError(f"{n_agents} agents need {n_agents} free cells, "
                         f"map has {len(cells)} connected")
    starts = rng.sample(cells, n_agents)
    goals = rng.sample(cells, n_agents)
    return Scenario(g, starts, goals)


def _largest_component(g: GridMap, free):
    from collections import deque
    free_set = set(free)
    seen = set()
    best: set = set()
    for cell in free:
        if cell in seen:
            continue
        comp = {cell}
        queue = deque([cell])
        seen.add(cell)
        while queue:
            c, r = queue.popleft()
            for nxt in (Cell(c, r - 1), Cell(c - 1, r), Cell(c + 1, r), Cell(c, r + 1)):
                if nxt in free_set and nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    queue.append(nxt)
        if len(comp) > len(best):
            best = comp
    return best


def _wall_column(g: GridMap) -> int:
    counts = np.asarray(g.mask).sum(axis=0)
    return int(np.argmax(counts))
