"""All-pairs collision tables: distance, risk, closest-position and constraint matrices.

Row ``p`` / column ``q`` always describes the pair from drone ``p``'s point of
view.  ``cl[p, q] == 1`` means drone ``q`` must be given priority over ``p``
(a hard constraint); values strictly between 0 and 1 are soft constraints.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tps.errors import InfeasiblePairError, InvalidInputError
from tps.geometry import PairGeometry, closest_approach_batch, point_segment_distance
from tps.kinematics import DronePath

# Table-1 configuration IDs, from drone p's point of view
PARALLEL_CLEAR = 1
WHOLE_PATH_INSIDE = 2
SKEW_CLEAR = 3
CROSSING = 4
TARGET_AT_CLOSEST = 5
TARGET_NEAR = 6
START_AT_CLOSEST = 7
START_NEAR = 8

HARD_CONFIGS = frozenset({TARGET_AT_CLOSEST, TARGET_NEAR, START_AT_CLOSEST, START_NEAR})

_CHUNK = 200_000


@dataclass(frozen=True)
class SafetyParams:
    r_col: float = 1.0
    sf: float = 1.5
    lam: float = 0.5

    def __post_init__(self) -> None:
        if not self.r_col > 0:
            raise InvalidInputError(f"r_col must be positive, got {self.r_col}")
        if not self.sf > 1:
            raise InvalidInputError(f"safety factor must exceed 1, got {self.sf}")
        if not 0 < self.lam < 1:
            raise InvalidInputError(f"lambda must lie in (0, 1), got {self.lam}")

    @property
    def threshold(self) -> float:
        return self.sf * self.r_col


@dataclass(frozen=True, eq=False)
class EndpointDistances:
    """Distances from p's endpoints to q's segment and from q's start to p's segment."""

    p_start: float
    p_target: float
    q_start: float


@dataclass(frozen=True, eq=False)
class CollisionTables:
    n: int
    mu: np.ndarray
    pb: np.ndarray
    r: np.ndarray
    s_mat: np.ndarray
    cl: np.ndarray
    config: np.ndarray
    parallel: np.ndarray
    threshold: float

    def conflicts(self, p: int, q: int) -> bool:
        return bool(self.pb[p, q])

    def hard_edges(self) -> list[tuple[int, int]]:
        """``(before, after)`` pairs implied by ``cl == 1``."""
        rows, cols = np.nonzero(self.cl == 1.0)
        return [(int(q), int(p)) for p, q in zip(rows, cols)]

    def dump_csv(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in ("mu", "pb", "r", "s_mat", "cl", "config"):
            path = out / f"{name}.csv"
            mat = getattr(self, name)
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                for row in mat:
                    writer.writerow([repr(x.item()) for x in row])
            written.append(path)
        return written


def classify_pair(pg: PairGeometry, endpoints: EndpointDistances, params: SafetyParams) -> int:
    """Table-1 configuration of the pair as seen from drone p."""
    thr = params.threshold
    if pg.mu > thr:
        return PARALLEL_CLEAR if pg.parallel else SKEW_CLEAR
    start_near = endpoints.p_start <= thr or pg.s == 0.0
    target_near = endpoints.p_target <= thr or pg.s == 1.0
    if start_near and target_near:
        return WHOLE_PATH_INSIDE
    if target_near:
        return TARGET_AT_CLOSEST if pg.s == 1.0 else TARGET_NEAR
    if start_near:
        return START_AT_CLOSEST if pg.s == 0.0 else START_NEAR
    return CROSSING


def _classify_arrays(mu, s, parallel, d_pstart, d_ptarget, thr):
    start_near = (d_pstart <= thr) | (s == 0.0)
    target_near = (d_ptarget <= thr) | (s == 1.0)
    config = np.where(parallel, PARALLEL_CLEAR, SKEW_CLEAR)
    close = mu <= thr
    config = np.where(close, CROSSING, config)
    config = np.where(close & start_near, np.where(s == 0.0, START_AT_CLOSEST, START_NEAR), config)
    config = np.where(close & target_near, np.where(s == 1.0, TARGET_AT_CLOSEST, TARGET_NEAR), config)
    config = np.where(close & start_near & target_near, WHOLE_PATH_INSIDE, config)
    return config, start_near, target_near


def build_tables(paths: Sequence[DronePath], params: SafetyParams, strict: bool = True) -> CollisionTables:
    """Build mu, Pb, R, S, CL and configuration matrices for all drone pairs.

    With ``strict`` set, a pair whose whole path lies inside the other's
    corridor raises :class:`InfeasiblePairError` (the tables ride along on the
    exception).
    """
    n = len(paths)
    if n < 1:
        raise InvalidInputError("need at least one drone")
    thr = params.threshold
    starts = np.array([p.start for p in paths], dtype=float)
    targets = np.array([p.target for p in paths], dtype=float)

    mu = np.zeros((n, n))
    r = np.zeros((n, n))
    parallel = np.zeros((n, n), dtype=bool)
    d_start = np.full((n, n), math.inf)  # d_start[p, q]: p's start to q's segment
    d_target = np.full((n, n), math.inf)

    iu, ju = np.triu_indices(n, 1)
    for lo in range(0, len(iu), _CHUNK):
        i = iu[lo:lo + _CHUNK]
        j = ju[lo:lo + _CHUNK]
        si, ti, sj, tj = starts[i], targets[i], starts[j], targets[j]
        s, t, _, _, m, par = closest_approach_batch(si, ti, sj, tj)
        mu[i, j] = mu[j, i] = m
        r[i, j] = s
        r[j, i] = t
        parallel[i, j] = parallel[j, i] = par
        d_start[i, j] = point_segment_distance(si, sj, tj)
        d_target[i, j] = point_segment_distance(ti, sj, tj)
        d_start[j, i] = point_segment_distance(sj, si, ti)
        d_target[j, i] = point_segment_distance(tj, si, ti)

    off = ~np.eye(n, dtype=bool)
    pb = (mu <= thr) & off
    s_mat = r * pb
    config, start_near, target_near = _classify_arrays(mu, r, parallel, d_start, d_target, thr)
    config = np.where(off, config, 0).astype(np.int8)

    # q's start near p's segment, i.e. d_start transposed
    q_start_near = d_start.T <= thr
    cl = np.where(pb & (target_near | q_start_near), 1.0,
                  np.where(pb & start_near, params.lam, s_mat))
    cl[~off] = 0.0

    tables = CollisionTables(n, mu, pb, r, s_mat, cl, config, parallel, thr)
    if strict:
        bad = np.argwhere(config == WHOLE_PATH_INSIDE)
        if len(bad):
            raise InfeasiblePairError(bad.tolist(), tables)
    return tables
