"""Per-agent mode management and coordinated plan execution.

Modes: normal (follow the geometric path under collision avoidance),
move_to_start (head to the assigned discrete start, still avoiding), mapf
(execute the shared discrete plan in lockstep).  Legal transitions:
normal -> move_to_start -> mapf -> normal, mapf -> move_to_start on an
external-agent update, and either coordination mode -> normal on
abandonment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .grid import Cell, center_of

NORMAL = "normal"
MOVE_TO_START = "move_to_start"
MAPF = "mapf"

# Arrival tolerance at the assigned discrete start; on the group becoming
# ready, positions snap to exact cell centers so plan interpolation starts
# on-grid.
DELTA_START = 0.05

# A group stuck approaching its starts for this many steps abandons the
# episode (downgrade to normal); the deadlock gets re-detected with fresh
# geometry.  60 cells of travel at v_max = 0.1 is far beyond any start
# assignment, so this only fires on genuine transition livelocks.
MOVE_TO_START_TIMEOUT = 600


def substeps_per_move(v_max: float) -> int:
    """Simulation steps per discrete plan step (all moves take equally long)."""
    return math.ceil(1.0 / v_max)


@dataclass
class MAPFEpisode:
    """Shared coordination state; field-identical across all participants."""

    episode_id: int
    instance: object            # MAPFInstance
    solution: object            # MAPFSolution, plans padded to equal length
    plans: dict                 # agent id -> list of Cell
    starts: dict                # agent id -> Cell
    participants: frozenset
    phase: str = MOVE_TO_START
    sync_step: int = 0
    substep: int = 0
    phase_started: int = 0

    @property
    def makespan(self) -> int:
        return self.solution.makespan

    def fingerprint(self):
        """Hashable content view; used to assert episode consistency."""
        return (self.episode_id, self.phase, self.sync_step, self.substep,
                tuple(sorted(self.participants)),
                tuple((a.agent_id, tuple(a.start), tuple(a.goal))
                      for a in self.instance.agents))


def make_episode(episode_id: int, instance, solution) -> MAPFEpisode:
    padded = solution.padded()
    plans = {agent.agent_id: padded.plans[i]
             for i, agent in enumerate(instance.agents)}
    starts = {agent.agent_id: Cell(*agent.start) for agent in instance.agents}
    return MAPFEpisode(
        episode_id=episode_id,
        instance=instance,
        solution=padded,
        plans=plans,
        starts=starts,
        participants=frozenset(starts),
    )


def all_ready(episode: MAPFEpisode, positions, delta_start: float = DELTA_START) -> bool:
    """True iff every participant stands within delta_start of its start center."""
    for aid in episode.participants:
        cx, cy = center_of(episode.starts[aid])
        px, py = positions[aid]
        if math.hypot(px - cx, py - cy) > delta_start:
            return False
    return True


def all_done(episode: MAPFEpisode, sync_steps) -> bool:
    """True iff every participant has executed its full plan."""
    return all(sync_steps[aid] >= episode.makespan for aid in episode.participants)


def plan_velocity(episode: MAPFEpisode, agent_id: int, position, v_max: float):
    """Velocity command while executing the shared plan.

    Each plan step spans ceil(1/v_max) simulation steps for every
    participant.  The command aims at the next cell center from the current
    interpolation point, self-correcting so the agent lands exactly on
    centers; wait steps command zero velocity.
    """
    plan = episode.plans[agent_id]
    step = episode.sync_step
    if step >= len(plan) - 1:
        return (0.0, 0.0)
    cur = plan[step]
    nxt = plan[step + 1]
    if nxt == cur:
        return (0.0, 0.0)
    remaining = substeps_per_move(v_max) - episode.substep
    tx, ty = center_of(nxt)
    vx = (tx - position[0]) / remaining
    vy = (ty - position[1]) / remaining
    speed = math.hypot(vx, vy)
    if speed > v_max:
        vx *= v_max / speed
        vy *= v_max / speed
    return (vx, vy)
