"""Delay-only scheduling for drone flocks flying straight-line paths.

Every drone flies start -> target on a straight segment with a trapezoidal
speed profile.  The planner orders drones by their pairwise constraints and
gives each one the smallest start delay that keeps it clear of every drone
scheduled before it.
"""

from tps.collision import CollisionTables, SafetyParams, build_tables
from tps.delays import Schedule, SearchParams, assign_delay, forbidden_interval, schedule_all
from tps.errors import (
    BlockedPairError,
    CycleDetectedError,
    InfeasiblePairError,
    InvalidInputError,
    SchedulingError,
    TPSError,
)
from tps.geometry import closest_approach
from tps.kinematics import DelayedTrajectory, DronePath, KinematicLimits, build_profile, position_at
from tps.metrics import RunMetrics, compute_metrics, verify
from tps.planner import PlanResult, plan
from tps.priority import PriorityVector, compute_priority, detect_cycle
from tps.scenario import Scenario, ScenarioConfig, density, generate

__version__ = "0.1.0"

__all__ = [
    "BlockedPairError", "CollisionTables", "CycleDetectedError", "DelayedTrajectory", "DronePath",
    "InfeasiblePairError", "InvalidInputError", "KinematicLimits", "PlanResult", "PriorityVector",
    "RunMetrics", "SafetyParams", "Scenario", "ScenarioConfig", "Schedule", "SchedulingError",
    "SearchParams", "TPSError", "assign_delay", "build_profile", "build_tables", "closest_approach",
    "compute_metrics", "compute_priority", "density", "detect_cycle", "forbidden_interval", "generate",
    "plan", "position_at", "schedule_all", "verify",
]
