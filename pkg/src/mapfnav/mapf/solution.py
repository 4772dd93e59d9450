"""Discrete plans, synchronized solutions, and the conflict validator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..grid import Cell


class Violation(NamedTuple):
    kind: str          # vertex, edge, illegal-move, blocked-cell, start, goal, length
    step: int
    agents: tuple
    where: tuple


@dataclass
class MAPFSolution:
    """One plan per agent, all padded to a common length (one cell per step)."""

    plans: list  # plans[i][t] = Cell of agent i at plan step t; len = makespan + 1

    @property
    def makespan(self) -> int:
        return max((len(p) - 1 for p in self.plans), default=0)

    @property
    def flowtime(self) -> int:
        """Sum of last-move indices; waiting at the goal after arrival is free."""
        total = 0
        for plan in self.plans:
            last = 0
            for t in range(1, len(plan)):
                if plan[t] != plan[t - 1]:
                    last = t
            total += last
        return total

    def padded(self) -> "MAPFSolution":
        t = self.makespan
        return MAPFSolution([list(p) + [p[-1]] * (t + 1 - len(p)) for p in self.plans])


def validate_solution(inst, sol: MAPFSolution) -> list[Violation]:
    """Every conflict and contract breach in a solution; empty iff valid.

    Checks vertex conflicts, edge conflicts (swaps), non-cardinal moves,
    blocked or out-of-area cells, and start/goal endpoints against the
    instance.  Pairwise scans are vectorized; plans with thousands of steps
    validate in milliseconds.
    """
    out: list[Violation] = []
    plans = sol.plans
    if len(plans) != len(inst.agents):
        out.append(Violation("length", 0, (), (len(plans), len(inst.agents))))
        return out
    T = max(len(p) for p in plans) - 1
    n = len(plans)
    arr = np.empty((n, T + 1, 2), dtype=np.int64)
    for i, plan in enumerate(plans):
        if len(plan) - 1 != T:
            out.append(Violation("length", len(plan) - 1, (i,), (T,)))
        for t, cell in enumerate(plan):
            arr[i, t, 0] = cell[0]
            arr[i, t, 1] = cell[1]
        arr[i, len(plan):, :] = arr[i, len(plan) - 1, :]

    for i, (agent, plan) in enumerate(zip(inst.agents, plans)):
        if Cell(*plan[0]) != Cell(*agent.start):
            out.append(Violation("start", 0, (i,), tuple(plan[0])))
        if Cell(*plan[-1]) != Cell(*agent.goal):
            out.append(Violation("goal", len(plan) - 1, (i,), tuple(plan[-1])))

    area = inst.area
    # blocked / out-of-area cells, vectorized against a local mask
    local = np.zeros((area.height, area.width), dtype=bool)
    for c, r in area.local_blocked:
        local[r, c] = True
    lc = arr[:, :, 0] - area.origin.col
    lr = arr[:, :, 1] - area.origin.row
    oob = (lc < 0) | (lc >= area.width) | (lr < 0) | (lr >= area.height)
    lookup = local[np.clip(lr, 0, area.height - 1), np.clip(lc, 0, area.width - 1)]
    hit = oob | (lookup & ~oob)
    for i, t in zip(*np.nonzero(hit)):
        if t < len(plans[i]):
            out.append(Violation("blocked-cell", int(t), (int(i),), tuple(plans[i][t])))

    # move legality: identical or 4-adjacent
    step = np.abs(np.diff(arr, axis=1)).sum(axis=2)
    for i, t in zip(*np.nonzero(step > 1)):
        if t + 1 < len(plans[i]):
            out.append(Violation("illegal-move", int(t) + 1, (int(i),),
                                 (tuple(plans[i][t]), tuple(plans[i][t + 1]))))

    for i in range(n):
        for j in range(i + 1, n):
            same = (arr[i] == arr[j]).all(axis=1)
            for t in np.nonzero(same)[0]:
                out.append(Violation("vertex", int(t), (i, j), tuple(arr[i, t])))
            swap = ((arr[i, 1:] == arr[j, :-1]).all(axis=1)
                    & (arr[j, 1:] == arr[i, :-1]).all(axis=1)
                    & ~same[1:] & ~same[:-1])
            for t in np.nonzero(swap)[0]:
                out.append(Violation("edge", int(t) + 1, (i, j),
                                     (tuple(arr[i, t]), tuple(arr[i, t + 1]))))
    return out
