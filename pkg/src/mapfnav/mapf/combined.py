"""Solver cascade under a shared wall-clock cap.

Push and Rotate runs first on a small slice of the budget for a guaranteed
(if costly) answer; ECBS uses the remainder for a bounded-suboptimal one.
If ECBS finishes, its solution wins; otherwise the Push and Rotate solution
is used; if neither solves, the caller abandons the coordination attempt.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .ecbs import solve_ecbs
from .push_rotate import solve_push_and_rotate
from .solution import MAPFSolution, validate_solution

# Push and Rotate's slice of the shared cap, seconds.
PR_BUDGET = 0.2
# Deterministic ECBS budget: expansions per second of wall-clock cap, set
# conservatively below the observed rate so the work cap binds before the
# wall clock and replays stay bit-identical.
ECBS_WORK_PER_SECOND = 20_000


@dataclass
class CombinedResult:
    solution: MAPFSolution | None
    solver: str | None            # "ecbs" or "push-rotate"
    pr_solved: bool = False
    ecbs_solved: bool = False

    @property
    def ok(self) -> bool:
        return self.solution is not None


def solve_combined(inst, w: float, time_cap: float) -> CombinedResult:
    """Run Push and Rotate then ECBS under one cap; prefer the ECBS solution."""
    if time_cap <= 0:
        raise ValueError("time_cap must be positive")
    t0 = time.perf_counter()
    pr = solve_push_and_rotate(inst, deadline=t0 + min(PR_BUDGET, time_cap / 2))
    ecbs = solve_ecbs(inst, w, deadline=t0 + time_cap,
                      work_cap=int(time_cap * ECBS_WORK_PER_SECOND))
    chosen, name = (ecbs, "ecbs") if ecbs is not None else (pr, "push-rotate")
    if chosen is None:
        return CombinedResult(None, None, False, False)
    bad = validate_solution(inst, chosen)
    if bad:  # solver bug; surface loudly rather than execute a broken plan
        raise RuntimeError(f"{name} produced an invalid solution: {bad[:3]}")
    return CombinedResult(chosen, name, pr is not None, ecbs is not None)
