"""Start-delay assignment in priority order.

For each lower-priority drone ``q`` and each already scheduled drone ``p``
whose path comes within the safety threshold, the set of relative start
delays that bring the two drones too close is a single interval (the
distance between two straight-line parameterisations is jointly convex, and
delaying ``q`` sweeps its space-time curve monotonically).  Its ends are
found by binary search on a sampled collision predicate, shifted by ``p``'s
absolute delay, and the smallest non-negative delay outside the union of
all such intervals is taken.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from tps.collision import CollisionTables, SafetyParams
from tps.errors import BlockedPairError, InvalidInputError, SchedulingError
from tps.geometry import point_segment_distance
from tps.kinematics import DelayedTrajectory, DronePath, MotionTable, VelocityProfile, build_profile
from tps.priority import PriorityVector

log = logging.getLogger(__name__)

SCHEDULE_SCHEMA_VERSION = 1
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SAMPLE_BUDGET = 1_000_000


@dataclass(frozen=True)
class SearchParams:
    dt_step: float = 1e-3
    t_sample: float = 1e-2
    refine_tol: float = 1e-5
    expansion_cap: float = 16.0

    def __post_init__(self) -> None:
        if not (self.dt_step > 0 and self.t_sample > 0 and self.refine_tol > 0):
            raise InvalidInputError("dt_step, t_sample and refine_tol must be positive")
        if not self.expansion_cap >= 1:
            raise InvalidInputError("expansion_cap must be >= 1")


@dataclass(frozen=True)
class ForbiddenInterval:
    """Start delays in ``[lower, upper)`` collide; ``upper`` itself is safe."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise InvalidInputError(f"interval lower {self.lower} exceeds upper {self.upper}")

    def shifted(self, offset: float) -> "ForbiddenInterval":
        return ForbiddenInterval(self.lower + offset, self.upper + offset)

    def __contains__(self, value: float) -> bool:
        return self.lower <= value < self.upper


# ---------------------------------------------------------------------------
# sampled minimum of a smooth distance function


def _golden_refine(fn, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised golden-section search; returns the minimum value per bracket."""
    width = float(np.max(hi - lo)) if lo.size else 0.0
    iters = max(int(math.ceil(math.log(max(width, tol) / tol) / -math.log(_GOLDEN))), 1)
    for _ in range(iters):
        span = hi - lo
        c = hi - _GOLDEN * span
        d = lo + _GOLDEN * span
        left = fn(c) <= fn(d)
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    return fn(0.5 * (lo + hi))


def sampled_minimum(fn, lo: float, hi: float, step: float, tol: float,
                    extra=(), refine_below: float = math.inf) -> float:
    """Minimum of ``fn`` on ``[lo, hi]``: grid samples plus golden-section refinement.

    Local minima of the samples whose value is below ``refine_below`` are
    refined inside their bracketing sample triple.
    """
    count = max(int(math.ceil((hi - lo) / step)), 1) + 1
    times = np.linspace(lo, hi, count)
    extra = [x for x in extra if lo < x < hi]
    if extra:
        times = np.sort(np.concatenate([times, extra]))
    vals = fn(times)
    best = float(vals.min())
    if len(vals) < 3 and len(vals) > 1:
        return min(best, float(_golden_refine(fn, times[:1], times[-1:], tol).min()))
    if len(vals) < 2:
        return best
    interior = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:]) & (vals[1:-1] < refine_below)
    idx = np.flatnonzero(interior) + 1
    edges = []
    if vals[0] <= vals[1] and vals[0] < refine_below:
        edges.append((times[0], times[1]))
    if vals[-1] <= vals[-2] and vals[-1] < refine_below:
        edges.append((times[-2], times[-1]))
    lows = [times[idx - 1]]
    highs = [times[idx + 1]]
    if edges:
        lows.append(np.array([e[0] for e in edges]))
        highs.append(np.array([e[1] for e in edges]))
    blo = np.concatenate(lows)
    bhi = np.concatenate(highs)
    if blo.size:
        best = min(best, float(_golden_refine(fn, blo, bhi, tol).min()))
    return best


def _pair_distance_fn(traj_p: DelayedTrajectory, traj_q: DelayedTrajectory):
    def fn(t):
        return np.linalg.norm(traj_p.positions(t) - traj_q.positions(t), axis=-1)

    return fn


def min_pair_distance(traj_p: DelayedTrajectory, traj_q: DelayedTrajectory,
                      params: SearchParams = SearchParams()) -> float:
    """Minimum separation of two delayed drones over their joint flight.

    Parked phases (before start, after arrival) are included: a drone sitting
    at an endpoint is still an obstacle.
    """
    end = max(traj_p.end_time, traj_q.end_time)
    extra = [traj_p.t0, traj_p.end_time, traj_q.t0, traj_q.end_time]
    return sampled_minimum(_pair_distance_fn(traj_p, traj_q), 0.0, max(end, 0.0),
                           params.t_sample, params.refine_tol, extra)


# ---------------------------------------------------------------------------
# per-pair search


def critical_times(s: float, t: float, profile_p: VelocityProfile,
                   profile_q: VelocityProfile) -> tuple[float, float, float]:
    """Zero-delay arrival times at the closest points and their difference.

    Returns ``(t_cr_p, t_cr_q, T_cr)`` with ``T_cr = t_cr_p - t_cr_q``: the
    relative start delay of q that puts both drones at their closest points
    at the same instant.
    """
    t_cr_p = profile_p.time_at_distance(s * profile_p.length)
    t_cr_q = profile_q.time_at_distance(t * profile_q.length)
    return t_cr_p, t_cr_q, t_cr_p - t_cr_q


def corridor_param_range(x0, x1, seg_a, seg_b, s_star, radius, iters: int = 60):
    """Sub-range of each path ``x0 -> x1`` lying within ``radius`` of segment ``[a, b]``.

    Distance from a point moving along a line to a fixed segment is convex,
    and ``s_star`` is its minimiser; both crossings are found by bisection
    and reported on the outer side.  Vectorised over rows.
    """
    x0, x1, seg_a, seg_b = (np.atleast_2d(v) for v in (x0, x1, seg_a, seg_b))
    s_star = np.atleast_1d(np.asarray(s_star, dtype=float))
    vec = x1 - x0

    def dist(s):
        return point_segment_distance(x0 + s[:, None] * vec, seg_a, seg_b)

    inside_lo = dist(np.zeros_like(s_star)) <= radius
    inside_hi = dist(np.ones_like(s_star)) <= radius
    # bisection brackets: [out, in] on each side
    a_lo, b_lo = np.zeros_like(s_star), s_star.copy()
    a_hi, b_hi = np.ones_like(s_star), s_star.copy()
    for _ in range(iters):
        m_lo = 0.5 * (a_lo + b_lo)
        m_hi = 0.5 * (a_hi + b_hi)
        in_lo = dist(m_lo) <= radius
        in_hi = dist(m_hi) <= radius
        b_lo = np.where(in_lo, m_lo, b_lo)
        a_lo = np.where(in_lo, a_lo, m_lo)
        b_hi = np.where(in_hi, m_hi, b_hi)
        a_hi = np.where(in_hi, a_hi, m_hi)
    s_lo = np.where(inside_lo, 0.0, a_lo)
    s_hi = np.where(inside_hi, 1.0, a_hi)
    return s_lo, s_hi


def _time_window(profile: VelocityProfile, s_lo: float, s_hi: float) -> tuple[float, float]:
    lo = -math.inf if s_lo <= 0.0 else profile.time_at_distance(s_lo * profile.length)
    hi = math.inf if s_hi >= 1.0 else profile.time_at_distance(s_hi * profile.length)
    return lo, hi


class PairBatch:
    """Collision predicate and forbidden-interval search for many ordered pairs.

    Row ``k`` pairs a higher-priority drone ``p`` (fixed at delay 0) with a
    lower one ``q`` delayed by ``delta`` relative to it.  Every pair runs the
    same bracketing and bisection steps, so the work is done in lockstep
    over numpy arrays.
    """

    def __init__(self, motion_p: MotionTable, motion_q: MotionTable, s, t,
                 window_p, window_q, threshold: float, params: SearchParams):
        self.mp, self.mq = motion_p, motion_q
        self.m = len(motion_p.length)
        self.threshold = threshold
        self.params = params
        self.travel_p, self.travel_q = motion_p.travel, motion_q.travel
        self.wp_lo, self.wp_hi = (np.asarray(w, dtype=float) for w in window_p)
        self.wq_lo, self.wq_hi = (np.asarray(w, dtype=float) for w in window_q)
        self.t_cr_p = _times_at_fraction(motion_p, np.asarray(s, dtype=float))
        self.t_cr_q = _times_at_fraction(motion_q, np.asarray(t, dtype=float))
        self.T_cr = self.t_cr_p - self.t_cr_q
        self.vrel = motion_p.peak + motion_q.peak

    def distance(self, rows: np.ndarray, times: np.ndarray, delta: np.ndarray) -> np.ndarray:
        gap = self.mp.positions(rows, times) - self.mq.positions(rows, times - delta)
        return np.sqrt(np.einsum("ij,ij->i", gap, gap))

    def collision_free(self, idx: np.ndarray, delta: np.ndarray) -> np.ndarray:
        """Per pair in ``idx``: never within the threshold at relative delay ``delta``."""
        idx = np.asarray(idx, dtype=int)
        delta = np.asarray(delta, dtype=float)
        lo = np.maximum.reduce([self.wp_lo[idx], delta + self.wq_lo[idx], np.minimum(0.0, delta)])
        hi = np.minimum.reduce([self.wp_hi[idx], delta + self.wq_hi[idx],
                                np.maximum(self.travel_p[idx], delta + self.travel_q[idx])])
        free = np.ones(len(idx), dtype=bool)
        live = np.flatnonzero(lo <= hi)
        if not live.size:
            return free
        step = self.params.t_sample
        counts = np.maximum(np.ceil((hi[live] - lo[live]) / step).astype(int), 1) + 1
        start = 0
        while start < live.size:
            # keep each evaluation under the sample budget
            stop = start + max(int(np.searchsorted(np.cumsum(counts[start:]), _SAMPLE_BUDGET)), 1)
            chunk = live[start:stop]
            free[chunk] = self._chunk_minimum(idx[chunk], delta[chunk], lo[chunk], hi[chunk],
                                              counts[start:stop]) > self.threshold
            start = stop
        return free

    def _chunk_minimum(self, rows, delta, lo, hi, counts) -> np.ndarray:
        params = self.params
        firsts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        seg = np.repeat(np.arange(len(rows)), counts)
        k = np.arange(int(counts.sum())) - firsts[seg]
        last = (counts - 1)[seg]
        times = lo[seg] + (hi - lo)[seg] * (k / last)
        vals = self.distance(rows[seg], times, delta[seg])
        best = np.minimum.reduceat(vals, firsts)

        crit = self.t_cr_p[rows]
        inside = np.flatnonzero((crit > lo) & (crit < hi))
        if inside.size:
            at_crit = self.distance(rows[inside], crit[inside], delta[inside])
            best[inside] = np.minimum(best[inside], at_crit)

        # refine sampled local minima that could hide a dip below the threshold
        limit = self.threshold + 0.5 * self.vrel[rows] * params.t_sample
        prev_ok = np.ones(len(vals), dtype=bool)
        next_ok = np.ones(len(vals), dtype=bool)
        prev_ok[1:] = vals[1:] <= vals[:-1]
        next_ok[:-1] = vals[:-1] <= vals[1:]
        prev_ok[k == 0] = True
        next_ok[k == last] = True
        cand = np.flatnonzero(prev_ok & next_ok & (vals < limit[seg]))
        if cand.size:
            left = np.where(k[cand] == 0, cand, cand - 1)
            right = np.where(k[cand] == last[cand], cand, cand + 1)
            cseg = seg[cand]
            crow, cdelta = rows[cseg], delta[cseg]
            refined = _golden_refine(lambda tt: self.distance(crow, tt, cdelta),
                                     times[left], times[right], params.refine_tol)
            np.minimum.at(best, cseg, refined)
        return best

    def _search(self, idx: np.ndarray, direction: int):
        """Nearest collision-free relative delay from T_cr, up (+1) or down (-1).

        Returns the bounds and a mask of pairs with no free delay within the
        expansion cap.
        """
        p = self.params
        span = (self.t_cr_q + self.travel_p) if direction > 0 else (self.t_cr_p + self.travel_q)
        span = np.maximum(span, p.dt_step)
        cr = self.T_cr
        far = cr + direction * span
        factor = np.ones(self.m)
        blocked = np.zeros(self.m, dtype=bool)
        pending = idx
        while pending.size:
            bad = pending[~self.collision_free(pending, far[pending])]
            factor[bad] *= 2.0
            over = bad[factor[bad] > p.expansion_cap]
            blocked[over] = True
            pending = bad[factor[bad] <= p.expansion_cap]
            far[pending] = cr[pending] + direction * span[pending] * factor[pending]
        near = cr.copy()
        active = idx[~blocked[idx]]
        active = active[np.abs(far[active] - near[active]) >= p.dt_step]
        while active.size:
            mid = 0.5 * (near[active] + far[active])
            ok = self.collision_free(active, mid)
            far[active[ok]] = mid[ok]
            near[active[~ok]] = mid[~ok]
            active = active[np.abs(far[active] - near[active]) >= p.dt_step]
        return far, blocked

    def forbidden_intervals(self, hard) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(lower, upper, blocked)`` of q's colliding relative delays, per pair.

        ``hard`` pairs (q must wait for p) get an unbounded lower end.  Pairs
        already clear at ``T_cr`` get the empty interval ``[T_cr, T_cr]``.
        """
        hard = np.broadcast_to(np.asarray(hard, dtype=bool), (self.m,))
        every = np.arange(self.m)
        clash = every[~self.collision_free(every, self.T_cr)]
        lower = self.T_cr.copy()
        upper = self.T_cr.copy()
        up, blocked_up = self._search(clash, +1)
        upper[clash] = up[clash]
        soft = clash[~hard[clash]]
        down, blocked_down = self._search(soft, -1)
        lower[soft] = down[soft]
        lower[clash[hard[clash]]] = -math.inf
        return lower, upper, blocked_up | blocked_down


def _times_at_fraction(motion: MotionTable, frac: np.ndarray) -> np.ndarray:
    out = np.empty(len(frac))
    for k, f in enumerate(frac):
        prof = VelocityProfile(motion.t1[k], motion.t2[k], motion.t3[k], motion.peak[k],
                               motion.s_a[k], motion.s_d[k], motion.length[k],
                               motion.accel[k], motion.decel[k])
        out[k] = prof.time_at_distance(f * prof.length)
    return out


class PairSearch:
    """Single-pair view of :class:`PairBatch`, plus a whole-flight distance probe."""

    def __init__(self, path_p: DronePath, path_q: DronePath, s: float, t: float,
                 threshold: float, params: SearchParams,
                 window_p=(-math.inf, math.inf), window_q=(-math.inf, math.inf),
                 profile_p: VelocityProfile | None = None,
                 profile_q: VelocityProfile | None = None):
        self.path_p, self.path_q = path_p, path_q
        self.prof_p = profile_p or build_profile(path_p.length, path_p.limits)
        self.prof_q = profile_q or build_profile(path_q.length, path_q.limits)
        self.params = params
        self.threshold = threshold
        self.batch = PairBatch(MotionTable.build([path_p], [self.prof_p]),
                               MotionTable.build([path_q], [self.prof_q]),
                               [s], [t], ([window_p[0]], [window_p[1]]),
                               ([window_q[0]], [window_q[1]]), threshold, params)
        self.t_cr_p, self.t_cr_q, self.T_cr = critical_times(s, t, self.prof_p, self.prof_q)

    def min_distance(self, delta: float) -> float:
        """Separation minimum at relative delay ``delta``, searched over the whole flight."""
        traj_p = DelayedTrajectory(self.path_p, self.prof_p, 0.0)
        traj_q = DelayedTrajectory(self.path_q, self.prof_q, delta)
        lo = min(0.0, delta)
        hi = max(self.prof_p.travel_time, delta + self.prof_q.travel_time)
        extra = [self.t_cr_p, 0.0, delta, self.prof_p.travel_time, delta + self.prof_q.travel_time]
        return sampled_minimum(_pair_distance_fn(traj_p, traj_q), lo, hi,
                               self.params.t_sample, self.params.refine_tol, extra)

    def collision_free(self, delta: float) -> bool:
        return bool(self.batch.collision_free(np.array([0]), np.array([float(delta)]))[0])

    def forbidden_interval(self, hard: bool) -> ForbiddenInterval:
        lower, upper, blocked = self.batch.forbidden_intervals(hard)
        if blocked[0]:
            raise BlockedPairError(-1, -1, "no collision-free delay within the expanded bound")
        return ForbiddenInterval(float(lower[0]), float(upper[0]))


def forbidden_interval(path_p: DronePath, path_q: DronePath, s: float, t: float,
                       cl_entry: float, safety: SafetyParams,
                       params: SearchParams = SearchParams()) -> ForbiddenInterval:
    """Relative forbidden delays of lower drone q against higher drone p.

    ``s``/``t`` are the closest-approach parameters on p's and q's paths and
    ``cl_entry`` is ``cl[q, p]``.
    """
    search = _pair_search(path_p, path_q, s, t, safety.threshold, params)
    return search.forbidden_interval(cl_entry >= 1.0)


def _pair_search(path_p, path_q, s, t, threshold, params, prof_p=None, prof_q=None):
    radius = threshold * (1.0 + 1e-9) + 1e-9
    sp_lo, sp_hi = corridor_param_range(path_p.start, path_p.target, path_q.start, path_q.target, s, radius)
    sq_lo, sq_hi = corridor_param_range(path_q.start, path_q.target, path_p.start, path_p.target, t, radius)
    prof_p = prof_p or build_profile(path_p.length, path_p.limits)
    prof_q = prof_q or build_profile(path_q.length, path_q.limits)
    return PairSearch(path_p, path_q, s, t, threshold, params,
                      _pad(_time_window(prof_p, float(sp_lo[0]), float(sp_hi[0]))),
                      _pad(_time_window(prof_q, float(sq_lo[0]), float(sq_hi[0]))),
                      prof_p, prof_q)


def _pad(window, pad: float = 1e-6):
    return window[0] - pad, window[1] + pad


def assign_delay(intervals: Sequence[ForbiddenInterval]) -> float:
    """Smallest non-negative delay outside every ``[lower, upper)`` interval."""
    delay = 0.0
    for iv in sorted(intervals, key=lambda iv: (iv.lower, iv.upper)):
        if delay < iv.lower:
            break
        if delay < iv.upper:
            delay = iv.upper
    return delay


# ---------------------------------------------------------------------------
# whole-flock schedule


@dataclass(frozen=True, eq=False)
class Schedule:
    pv: PriorityVector
    delays: np.ndarray
    travel_times: np.ndarray
    intervals: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.delays)

    @property
    def flock_time(self) -> float:
        return float(np.max(self.delays + self.travel_times)) if self.n else 0.0

    def to_json(self) -> str:
        drones = [
            {"drone_id": i, "delay_s": float(self.delays[i]), "travel_time_s": float(self.travel_times[i])}
            for i in range(self.n)
        ]
        doc = {"schema_version": SCHEDULE_SCHEMA_VERSION, "priority": list(self.pv), "drones": drones}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEDULE_SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported schedule schema_version {doc.get('schema_version')!r}")
        drones = sorted(doc["drones"], key=lambda d: d["drone_id"])
        if [d["drone_id"] for d in drones] != list(range(len(drones))):
            raise InvalidInputError("schedule drone ids must be 0..n-1")
        delays = np.array([d["delay_s"] for d in drones], dtype=float)
        travel = np.array([d["travel_time_s"] for d in drones], dtype=float)
        return cls(PriorityVector(tuple(doc["priority"])), delays, travel)


def schedule_all(paths: Sequence[DronePath], tables: CollisionTables, pv: PriorityVector,
                 safety: SafetyParams = SafetyParams(),
                 params: SearchParams = SearchParams()) -> Schedule:
    """Assign absolute start delays to every drone, walking the priority vector.

    Relative forbidden intervals depend only on the pair, so all of them are
    searched up front in one batch; the walk then only shifts and merges.
    """
    n = len(paths)
    if len(pv) != n or tables.n != n:
        raise InvalidInputError("paths, tables and priority vector disagree on the drone count")
    threshold = safety.threshold
    profiles = [build_profile(p.length, p.limits) for p in paths]
    motion = MotionTable.build(paths, profiles)
    travel = motion.travel
    rank = pv.rank()

    # ordered pairs (higher p, lower q) that come within the threshold
    rows, cols = np.nonzero(np.triu(tables.pb, 1))
    swap = rank[rows] > rank[cols]
    hi_drone = np.where(swap, cols, rows)
    lo_drone = np.where(swap, rows, cols)

    radius = threshold * (1.0 + 1e-9) + 1e-9
    sp_lo, sp_hi = corridor_param_range(motion.start[hi_drone], motion.target[hi_drone],
                                        motion.start[lo_drone], motion.target[lo_drone],
                                        tables.r[hi_drone, lo_drone], radius)
    sq_lo, sq_hi = corridor_param_range(motion.start[lo_drone], motion.target[lo_drone],
                                        motion.start[hi_drone], motion.target[hi_drone],
                                        tables.r[lo_drone, hi_drone], radius)
    mp = _take(motion, hi_drone)
    mq = _take(motion, lo_drone)
    batch = PairBatch(mp, mq, tables.r[hi_drone, lo_drone], tables.r[lo_drone, hi_drone],
                      _window_arrays(mp, sp_lo, sp_hi), _window_arrays(mq, sq_lo, sq_hi),
                      threshold, params)
    lower, upper, blocked = batch.forbidden_intervals(tables.cl[lo_drone, hi_drone] >= 1.0)

    by_lower: dict[int, list[int]] = {}
    for k, x in enumerate(lo_drone):
        by_lower.setdefault(int(x), []).append(k)

    delays = np.zeros(n)
    done: dict[int, float] = {}
    intervals: dict[int, list] = {}
    for x in pv:
        x = int(x)
        collected = []
        for k in by_lower.get(x, ()):
            j = int(hi_drone[k])
            if blocked[k]:
                raise SchedulingError(
                    BlockedPairError(j, x, "no collision-free delay within the expanded bound"), done)
            rel = ForbiddenInterval(float(lower[k]), float(upper[k]))
            collected.append((j, rel.shifted(delays[j])))
        delays[x] = assign_delay([iv for _, iv in collected])
        done[x] = float(delays[x])
        intervals[x] = collected
    return Schedule(pv, delays, travel, intervals)


def _take(motion: MotionTable, idx: np.ndarray) -> MotionTable:
    return MotionTable(*(getattr(motion, f.name)[idx] for f in fields(MotionTable)))


def _window_arrays(motion: MotionTable, s_lo: np.ndarray, s_hi: np.ndarray):
    """Time windows (padded) during which each drone is inside the other's corridor."""
    lo = np.full(len(s_lo), -math.inf)
    hi = np.full(len(s_hi), math.inf)
    for k in range(len(s_lo)):
        prof = VelocityProfile(motion.t1[k], motion.t2[k], motion.t3[k], motion.peak[k],
                               motion.s_a[k], motion.s_d[k], motion.length[k],
                               motion.accel[k], motion.decel[k])
        lo[k], hi[k] = _pad(_time_window(prof, float(s_lo[k]), float(s_hi[k])))
    return lo, hi
