"""End-to-end planning: tables -> cycle check -> priority -> delays."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

from tps.collision import CollisionTables, SafetyParams, build_tables
from tps.delays import Schedule, SearchParams, schedule_all
from tps.errors import CycleDetectedError
from tps.kinematics import DronePath
from tps.priority import PriorityVector, compute_priority, detect_cycle


@dataclass(frozen=True, eq=False)
class PlanResult:
    tables: CollisionTables
    pv: PriorityVector
    schedule: Schedule
    calc_time: float


def plan(paths: Sequence[DronePath], safety: SafetyParams = SafetyParams(),
         search: SearchParams = SearchParams(), trace: Optional[list] = None) -> PlanResult:
    """Compute a collision-free delay schedule for straight-line paths.

    Raises :class:`CycleDetectedError` when hard constraints are circular and
    :class:`InfeasiblePairError` for pairs no delay can separate.
    ``calc_time`` covers everything done here and nothing else.
    """
    t_start = time.perf_counter()
    tables = build_tables(paths, safety)
    cycles = detect_cycle(tables)
    if cycles:
        raise CycleDetectedError(cycles)
    pv = compute_priority(tables, trace=trace)
    schedule = schedule_all(paths, tables, pv, safety, search)
    return PlanResult(tables, pv, schedule, time.perf_counter() - t_start)
