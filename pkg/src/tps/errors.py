"""Exception hierarchy shared by the planner, the verifier and the CLI."""

from __future__ import annotations


class TPSError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(TPSError, ValueError):
    pass


class DegeneratePathError(TPSError, ValueError):
    pass


class InfeasiblePairError(TPSError):
    """A pair of paths no start delay can separate (whole path inside the corridor)."""

    def __init__(self, pairs, tables=None):
        self.pairs = [tuple(int(i) for i in pair) for pair in pairs]
        self.tables = tables
        shown = ", ".join(f"({p}, {q})" for p, q in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" and {len(self.pairs) - 10} more"
        super().__init__(f"infeasible drone pairs: {shown}{more}")


class CycleDetectedError(TPSError):
    def __init__(self, cycles):
        self.cycles = [list(c) for c in cycles]
        super().__init__(f"circular hard-constraint dependency: {self.cycles[:5]}")


class BlockedPairError(TPSError):
    def __init__(self, higher: int, lower: int, message: str = ""):
        self.higher = higher
        self.lower = lower
        super().__init__(
            message or f"no collision-free relative delay for drone {lower} behind drone {higher}"
        )


class SchedulingError(TPSError):
    """Wraps a failure inside the delay loop together with the partial schedule."""

    def __init__(self, cause: Exception, partial_delays: dict):
        self.cause = cause
        self.partial_delays = dict(partial_delays)
        super().__init__(f"{cause} (scheduled {len(self.partial_delays)} drones before failing)")


class ScenarioGenerationError(TPSError):
    pass
