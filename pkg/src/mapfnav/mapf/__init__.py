"""Locally-confined discrete MAPF: instance construction, solvers, validation."""

from .solution import MAPFSolution, Violation, validate_solution
from .instance import (
    MAPFArea,
    MAPFAgent,
    MAPFInstance,
    InstanceError,
    gather_participants,
    assign_priorities,
    compute_area,
    assign_starts,
    assign_goals,
    build_instance,
    mix_seed,
)
from .push_rotate import solve_push_and_rotate
from .ecbs import solve_ecbs
from .oracle import solve_optimal_oracle, joint_bfs_solvable, OracleLimit
from .combined import CombinedResult, solve_combined

__all__ = [
    "MAPFSolution", "Violation", "validate_solution",
    "MAPFArea", "MAPFAgent", "MAPFInstance", "InstanceError",
    "gather_participants", "assign_priorities", "compute_area",
    "assign_starts", "assign_goals", "build_instance", "mix_seed",
    "solve_push_and_rotate", "solve_ecbs",
    "solve_optimal_oracle", "joint_bfs_solvable", "OracleLimit",
    "CombinedResult", "solve_combined",
]
