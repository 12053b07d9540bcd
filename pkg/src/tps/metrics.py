"""Independent trajectory verifier and per-run metrics.

The verifier deliberately re-implements the piecewise position equation and
uses its own minimisation (grid sampling, KD-tree pair screening, bounded
Brent refinement), so it shares no predicate code with the scheduler it
checks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from tps.delays import Schedule
from tps.scenario import Scenario

METRICS_SCHEMA_VERSION = 1
_SAMPLE_BUDGET = 2_000_000


class _Fleet:
    """Per-drone motion parameters as flat arrays for vectorised evaluation."""

    def __init__(self, scenario: Scenario, delays: np.ndarray):
        paths = scenario.paths
        self.start = np.array([p.start for p in paths])
        self.vec = np.array([p.target - p.start for p in paths])
        self.target = np.array([p.target for p in paths])
        self.length = np.linalg.norm(self.vec, axis=1)
        a = np.array([p.limits.a_max for p in paths])
        v = np.array([p.limits.v_max for p in paths])
        d = np.array([p.limits.d_max for p in paths])
        cruise = self.length >= 0.5 * v * v * (1.0 / a + 1.0 / d)
        peak = np.where(cruise, v, np.sqrt(2.0 * self.length * a * d / (a + d)))
        self.t1 = peak / a
        self.t3 = peak / d
        s_acc = 0.5 * a * self.t1 ** 2
        s_dec = 0.5 * d * self.t3 ** 2
        self.t2 = np.where(cruise, (self.length - s_acc - s_dec) / np.where(peak > 0, peak, 1.0), 0.0)
        self.a, self.d, self.peak = a, d, peak
        self.s_a = s_acc
        self.s_d = self.length - s_dec
        self.t0 = np.asarray(delays, dtype=float)
        self.end = self.t0 + self.t1 + self.t2 + self.t3
        self.v_max = float(v.max()) if len(v) else 0.0

    def positions(self, ids: np.ndarray, t: np.ndarray) -> np.ndarray:
        tau = t - self.t0[ids]
        t1, t2, t3 = self.t1[ids], self.t2[ids], self.t3[ids]
        u2 = tau - t1
        u3 = tau - t1 - t2
        arc = np.select(
            [tau <= 0.0, tau <= t1, tau <= t1 + t2, tau <= t1 + t2 + t3],
            [
                0.0,
                0.5 * self.a[ids] * tau * tau,
                self.s_a[ids] + self.peak[ids] * u2,
                self.s_d[ids] + self.peak[ids] * u3 - 0.5 * self.d[ids] * u3 * u3,
            ],
            default=self.length[ids],
        )
        length = self.length[ids]
        frac = np.divide(arc, length, out=np.ones_like(arc), where=length > 0)
        pos = self.start[ids] + frac[:, None] * self.vec[ids]
        arrived = tau >= t1 + t2 + t3
        pos[arrived] = self.target[ids][arrived]
        return pos

    def snapshot(self, t: float) -> np.ndarray:
        ids = np.arange(len(self.t0))
        return self.positions(ids, np.full(len(ids), t))


@dataclass(frozen=True)
class Verification:
    collision_free: bool
    min_distance: float
    first_violation: Optional[tuple] = None  # ((i, j), time)
    closest_pair: Optional[tuple] = None


def _merge_runs(ks: np.ndarray) -> list[tuple[int, int]]:
    ks = np.unique(ks)
    breaks = np.flatnonzero(np.diff(ks) > 1)
    starts = np.concatenate([[0], breaks + 1])
    stops = np.concatenate([breaks, [len(ks) - 1]])
    return [(int(ks[a]), int(ks[b])) for a, b in zip(starts, stops)]


def verify(scenario: Scenario, schedule: Schedule, r_col: float = 1.0,
           resolution: float = 1e-3, coarse_step: float = 0.05,
           watch_radius: Optional[float] = None) -> Verification:
    """Check every pair of drones stays more than ``r_col`` apart.

    Pairs are screened on a coarse time grid with a KD-tree: anything that
    could dip below ``watch_radius`` between coarse samples is resampled at
    ``resolution`` and each sampled local minimum below the watch radius is
    refined.  ``min_distance`` is exact (to resolution) when it is below the
    watch radius; otherwise it is the coarse-grid nearest-neighbour distance.
    """
    n = scenario.n
    if n < 2:
        return Verification(True, math.inf)
    fleet = _Fleet(scenario, schedule.delays)
    horizon = float(fleet.end.max())
    watch = 2.0 * r_col if watch_radius is None else watch_radius
    coarse_step = max(coarse_step, resolution)
    screen = watch + 2.0 * fleet.v_max * coarse_step / 2.0

    k_count = int(math.ceil(horizon / coarse_step)) + 1
    coarse_t = np.minimum(np.arange(k_count) * coarse_step, horizon)
    coarse_best = math.inf
    flagged_pairs = []
    flagged_k = []
    for k, t in enumerate(coarse_t):
        pts = fleet.snapshot(float(t))
        tree = cKDTree(pts)
        dist, _ = tree.query(pts, k=2)
        coarse_best = min(coarse_best, float(dist[:, 1].min()))
        pairs = tree.query_pairs(screen, output_type="ndarray")
        if len(pairs):
            flagged_pairs.append(pairs)
            flagged_k.append(np.full(len(pairs), k))

    best = coarse_best
    best_pair = None
    violation = None
    if flagged_pairs:
        pairs = np.vstack(flagged_pairs)
        ks = np.concatenate(flagged_k)
        key = pairs[:, 0] * n + pairs[:, 1]
        order = np.lexsort((ks, key))
        key, ks = key[order], ks[order]
        bounds = np.flatnonzero(np.diff(key)) + 1
        windows = []
        for grp_key, grp_k in zip(np.split(key, bounds), np.split(ks, bounds)):
            i, j = divmod(int(grp_key[0]), n)
            for k0, k1 in _merge_runs(grp_k):
                lo = max(coarse_t[k0] - coarse_step, 0.0)
                hi = min(coarse_t[k1] + coarse_step, horizon)
                windows.append((i, j, lo, hi))
        fine_best, best_pair_fine, violation = _scan_windows(fleet, windows, resolution, watch, r_col)
        if fine_best < best or best_pair is None:
            best = min(best, fine_best)
            best_pair = best_pair_fine
    return Verification(best > r_col, best, violation, best_pair)


def _scan_windows(fleet: _Fleet, windows, resolution, watch, r_col):
    best = math.inf
    best_pair = None
    violation = None
    batch = []
    batch_size = 0

    def flush():
        nonlocal best, best_pair, violation
        if not batch:
            return
        ii = np.concatenate([np.full(len(ts), i) for i, _, ts in batch])
        jj = np.concatenate([np.full(len(ts), j) for _, j, ts in batch])
        tt = np.concatenate([ts for _, _, ts in batch])
        dist = np.linalg.norm(fleet.positions(ii, tt) - fleet.positions(jj, tt), axis=1)
        offset = 0
        for i, j, ts in batch:
            seg = dist[offset:offset + len(ts)]
            offset += len(ts)
            m = float(seg.min())
            cand = _refine_minima(fleet, i, j, ts, seg, resolution, watch)
            if cand is not None and cand[0] < m:
                m, t_min = cand
            else:
                t_min = float(ts[int(np.argmin(seg))])
            if m < best:
                best, best_pair = m, (i, j)
            if m <= r_col and (violation is None or t_min < violation[1]):
                violation = ((i, j), t_min)
        batch.clear()

    for i, j, lo, hi in windows:
        count = max(int(math.ceil((hi - lo) / resolution)), 1) + 1
        ts = np.linspace(lo, hi, count)
        batch.append((i, j, ts))
        batch_size += count
        if batch_size >= _SAMPLE_BUDGET:
            flush()
            batch_size = 0
    flush()
    return best, best_pair, violation


def _refine_minima(fleet, i, j, ts, seg, resolution, watch):
    if len(seg) < 3:
        return None
    mid = seg[1:-1]
    local = np.flatnonzero((mid < seg[:-2]) & (mid <= seg[2:]) & (mid < watch)) + 1
    if not len(local):
        return None
    ids_i = np.array([i])
    ids_j = np.array([j])

    def dist(t):
        tt = np.array([t])
        return float(np.linalg.norm(fleet.positions(ids_i, tt) - fleet.positions(ids_j, tt)))

    out = None
    for k in local:
        res = minimize_scalar(dist, bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                              options={"xatol": resolution * 1e-3})
        if out is None or res.fun < out[0]:
            out = (float(res.fun), float(res.x))
    return out


def pair_min_distance(scenario: Scenario, delays, i: int, j: int, resolution: float = 1e-3) -> float:
    """Verifier-model minimum separation of drones ``i`` and ``j`` over the whole flight."""
    fleet = _Fleet(scenario, np.asarray(delays, dtype=float))
    horizon = float(max(fleet.end[i], fleet.end[j], 0.0))
    best, _, _ = _scan_windows(fleet, [(i, j, 0.0, horizon)], resolution, math.inf, -math.inf)
    return best


def flock_time(scenario: Scenario, schedule: Schedule) -> float:
    """Time from the first departure to the last arrival."""
    if scenario.n == 0:
        return 0.0
    fleet = _Fleet(scenario, schedule.delays)
    return float(fleet.end.max())


def overheads(scenario: Scenario, schedule: Schedule) -> tuple[float, float]:
    """Flock-time and flown-distance overheads in percent (100 is ideal)."""
    fleet = _Fleet(scenario, schedule.delays)
    longest = float((fleet.t1 + fleet.t2 + fleet.t3).max())
    t_oh = 100.0 * (float(fleet.end.max()) / longest) if longest > 0 else 100.0
    straight = float(np.linalg.norm(scenario.targets - scenario.starts, axis=1).sum())
    # a delayed straight-line flight covers exactly its segment
    flown = float(fleet.length.sum())
    d_oh = 100.0 * (flown / straight) if straight > 0 else 100.0
    return t_oh, d_oh


@dataclass(frozen=True)
class RunMetrics:
    seed: int
    n: int
    delta: float
    flock_time: float
    mean_delay: float
    max_delay: float
    overhead_time_pct: float
    overhead_distance_pct: float
    calc_time: float
    min_observed_pair_distance: float
    collision_free: bool

    @classmethod
    def csv_header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def csv_row(self) -> list:
        return [repr(v) if isinstance(v, float) else v for v in asdict(self).values()]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        if header:
            writer.writerow(self.csv_header())
        writer.writerow(self.csv_row())
        return buf.getvalue()


def compute_metrics(scenario: Scenario, schedule: Schedule, calc_time: float,
                    verification: Optional[Verification] = None) -> RunMetrics:
    t_oh, d_oh = overheads(scenario, schedule)
    delays = schedule.delays
    cfg = scenario.config
    return RunMetrics(
        seed=cfg.seed,
        n=scenario.n,
        delta=cfg.delta_value,
        flock_time=flock_time(scenario, schedule),
        mean_delay=float(delays.mean()) if len(delays) else 0.0,
        max_delay=float(delays.max()) if len(delays) else 0.0,
        overhead_time_pct=t_oh,
        overhead_distance_pct=d_oh,
        calc_time=calc_time,
        min_observed_pair_distance=verification.min_distance if verification else math.nan,
        collision_free=verification.collision_free if verification else False,
    )
