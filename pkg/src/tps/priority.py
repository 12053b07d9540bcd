"""Priority ordering from the collision-limit matrix.

Hard constraints (``cl[p, q] == 1``) form a dependency graph with edges
``q -> p``.  A cycle makes delay-only scheduling impossible, so cycles are
detected first and reported.  The order itself is built greedily: free
drones first, then the unblocked drone with the most soft constraints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from tps.errors import TPSError

log = logging.getLogger(__name__)

GAMMA = 0.5
ENUMERATE_CYCLES_MAX_N = 50


def _cl_matrix(cl) -> np.ndarray:
    return np.asarray(getattr(cl, "cl", cl), dtype=float)


def _successors(cl: np.ndarray) -> list[np.ndarray]:
    # edge q -> p whenever cl[p, q] == 1
    hard = cl == 1.0
    np.fill_diagonal(hard, False)
    return [np.flatnonzero(hard[:, q]) for q in range(cl.shape[0])]


def _dfs_back_edge_cycles(succ: list[np.ndarray]) -> list[list[int]]:
    """One cycle per back edge found by an iterative three-colour DFS."""
    n = len(succ)
    colour = np.zeros(n, dtype=np.int8)  # 0 white, 1 grey, 2 black
    parent = np.full(n, -1)
    cycles = []
    for root in range(n):
        if colour[root]:
            continue
        colour[root] = 1
        stack = [(root, 0)]
        while stack:
            node, idx = stack[-1]
            nbrs = succ[node]
            if idx < len(nbrs):
                stack[-1] = (node, idx + 1)
                nxt = int(nbrs[idx])
                if colour[nxt] == 0:
                    colour[nxt] = 1
                    parent[nxt] = node
                    stack.append((nxt, 0))
                elif colour[nxt] == 1:
                    cycle = [node]
                    while cycle[-1] != nxt:
                        cycle.append(int(parent[cycle[-1]]))
                    cycles.append(cycle[::-1])
            else:
                colour[node] = 2
                stack.pop()
    return cycles


def detect_cycle(cl) -> list[list[int]]:
    """Cycles in the hard-constraint graph; an empty list means schedulable.

    Each cycle is listed in precedence order (each drone must go before the
    next one, and the last before the first).  Small instances get every
    elementary cycle; larger ones get one witness cycle per DFS back edge.
    """
    mat = _cl_matrix(cl)
    succ = _successors(mat)
    cycles = _dfs_back_edge_cycles(succ)
    if not cycles or mat.shape[0] > ENUMERATE_CYCLES_MAX_N:
        return cycles
    import networkx as nx

    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(succ)))
    graph.add_edges_from((q, int(p)) for q, ps in enumerate(succ) for p in ps)
    found = [list(c) for c in nx.simple_cycles(graph)]
    # rotate so each cycle starts at its smallest member
    found = [c[c.index(min(c)):] + c[:c.index(min(c))] for c in found]
    return sorted(found, key=lambda c: (len(c), c))


@dataclass
class ExtendedCollision:
    """Working copy of CL plus the three bookkeeping columns."""

    base: np.ndarray
    count_col: np.ndarray = field(init=False)
    max_col: np.ndarray = field(init=False)
    blocks_col: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.base = np.array(self.base, dtype=float)
        np.fill_diagonal(self.base, 0.0)
        soft = (self.base > 0.0) & (self.base < 1.0)
        self.count_col = soft.sum(axis=1)
        self.blocks_col = (self.base == 1.0).sum(axis=1)
        self.max_col = np.zeros(len(self.base))
        for j in range(len(self.base)):
            self.refresh_max(j)

    def refresh_max(self, j: int) -> None:
        row = self.base[j]
        below = row[row < 1.0]
        self.max_col[j] = below.max() if below.size else 0.0


@dataclass(frozen=True)
class PriorityVector:
    pv: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.pv) != list(range(len(self.pv))):
            raise TPSError(f"priority vector is not a permutation: {self.pv}")

    def __len__(self) -> int:
        return len(self.pv)

    def __iter__(self):
        return iter(self.pv)

    def __getitem__(self, i):
        return self.pv[i]

    def rank(self) -> np.ndarray:
        out = np.empty(len(self.pv), dtype=int)
        out[list(self.pv)] = np.arange(len(self.pv))
        return out


def compute_priority(cl, gamma: float = GAMMA, trace: list | None = None) -> PriorityVector:
    """Greedy priority assignment over the extended collision matrix.

    ``trace``, if given, receives one dict per round with the selected drone
    and the rule that picked it.
    """
    ecl = ExtendedCollision(_cl_matrix(cl))
    n = len(ecl.base)
    processed = np.zeros(n, dtype=bool)
    pv: list[int] = []
    for round_ in range(n):
        free = np.flatnonzero(~processed & (ecl.count_col == 0) & (ecl.blocks_col == 0))
        if free.size:
            selected = int(free[0])
            reason = "zero-constraint"
        else:
            eligible = np.flatnonzero(~processed & (ecl.blocks_col == 0))
            if not eligible.size:
                raise TPSError(
                    f"round {round_}: every remaining drone is hard-blocked; "
                    "run detect_cycle before compute_priority"
                )
            counts = ecl.count_col[eligible]
            candidates = eligible[counts == counts.max()]
            if candidates.size == 1:
                selected = int(candidates[0])
                reason = "max-count"
            else:
                maxes = ecl.max_col[candidates]
                selected = int(candidates[np.flatnonzero(maxes == maxes.min())[0]])
                reason = "tie-break"
        pv.append(selected)
        processed[selected] = True
        ecl.base[selected, :] = 0.0
        ecl.refresh_max(selected)

        unblocked = np.flatnonzero(ecl.base[:, selected] == 1.0)
        ecl.base[unblocked, selected] = gamma
        ecl.count_col[unblocked] += 1
        ecl.blocks_col[unblocked] -= 1
        for j in unblocked:
            ecl.refresh_max(int(j))

        if trace is not None:
            trace.append({"round": round_, "drone": selected, "reason": reason})
        log.debug("priority round %d: drone %d (%s)", round_, selected, reason)
    return PriorityVector(tuple(pv))
