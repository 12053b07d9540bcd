"""Straight-line motion model with a trapezoidal (or triangular) speed profile.

Every drone flies along the segment from its start to its target, accelerating
at ``a_max``, cruising at ``v_max`` if the path is long enough, and braking at
``d_max``.  The only free variable per drone is its start delay ``t0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tps.errors import InvalidInputError


@dataclass(frozen=True)
class KinematicLimits:
    a_max: float = 3.0
    v_max: float = 20.0
    d_max: float = 3.0

    def __post_init__(self) -> None:
        for name in ("a_max", "v_max", "d_max"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")


def _as_point(value) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise InvalidInputError(f"expected a 3D point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"non-finite coordinate in {arr}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DronePath:
    """Straight segment from ``start`` to ``target``.

    Zero-length paths are accepted; they produce a zero profile and the
    drone simply stays put.
    """

    start: np.ndarray
    target: np.ndarray
    limits: KinematicLimits = field(default_factory=KinematicLimits)

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _as_point(self.start))
        object.__setattr__(self, "target", _as_point(self.target))

    @property
    def vector(self) -> np.ndarray:
        return self.target - self.start

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.target - self.start))

    @property
    def direction(self) -> np.ndarray:
        length = self.length
        if length == 0.0:
            return np.zeros(3)
        return self.vector / length

    @property
    def is_degenerate(self) -> bool:
        return self.length == 0.0


@dataclass(frozen=True)
class VelocityProfile:
    """Phase timing of one straight-line move.

    ``s_a`` and ``s_d`` are the arc lengths at the end of the acceleration
    phase and at the start of the deceleration phase.
    """

    t1: float
    t2: float
    t3: float
    v_peak: float
    s_a: float
    s_d: float
    length: float
    accel: float
    decel: float

    @property
    def travel_time(self) -> float:
        return self.t1 + self.t2 + self.t3

    def distance_at(self, tau):
        """Arc length covered ``tau`` seconds after the drone starts moving.

        Accepts scalars or arrays; negative ``tau`` means not started yet.
        """
        tau = np.asarray(tau, dtype=float)
        t1, t12, total = self.t1, self.t1 + self.t2, self.travel_time
        if total == 0.0:
            return np.zeros_like(tau) if tau.ndim else 0.0
        tc = np.clip(tau, 0.0, total)
        accel = 0.5 * self.accel * tc * tc
        cruise = self.s_a + self.v_peak * (tc - t1)
        u = tc - t12
        decel = self.s_d + self.v_peak * u - 0.5 * self.decel * u * u
        out = np.where(tc <= t1, accel, np.where(tc <= t12, cruise, decel))
        out = np.where(tau >= total, self.length, np.minimum(out, self.length))
        return out if out.ndim else float(out)

    def time_at_distance(self, s: float) -> float:
        """Inverse of :meth:`distance_at` on ``[0, length]``."""
        if s <= 0.0:
            return 0.0
        if s >= self.length:
            return self.travel_time
        if s <= self.s_a:
            return math.sqrt(2.0 * s / self.accel)
        if s <= self.s_d:
            return self.t1 + (s - self.s_a) / self.v_peak
        disc = max(self.v_peak * self.v_peak - 2.0 * self.decel * (s - self.s_d), 0.0)
        # numerically stable root of s_d + v u - d u^2 / 2 = s
        u = 2.0 * (s - self.s_d) / (self.v_peak + math.sqrt(disc))
        return min(self.t1 + self.t2 + u, self.travel_time)


def build_profile(length: float, limits: KinematicLimits) -> VelocityProfile:
    """Minimum-time rest-to-rest profile for a straight move of ``length`` metres."""
    if not (length >= 0.0 and math.isfinite(length)):
        raise InvalidInputError(f"path length must be a non-negative finite number, got {length!r}")
    a, v, d = limits.a_max, limits.v_max, limits.d_max
    if length == 0.0:
        return VelocityProfile(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, a, d)
    ramp = 0.5 * v * v * (1.0 / a + 1.0 / d)
    if length >= ramp:
        t1, t3 = v / a, v / d
        s_a = 0.5 * v * t1
        t2 = (length - ramp) / v
        return VelocityProfile(t1, t2, t3, v, s_a, length - 0.5 * v * t3, length, a, d)
    v_peak = math.sqrt(2.0 * length * a * d / (a + d))
    t1, t3 = v_peak / a, v_peak / d
    s_a = 0.5 * v_peak * t1
    return VelocityProfile(t1, 0.0, t3, v_peak, s_a, s_a, length, a, d)


def travel_time(profile: VelocityProfile) -> float:
    return profile.travel_time


@dataclass(frozen=True, eq=False)
class DelayedTrajectory:
    path: DronePath
    profile: VelocityProfile
    t0: float = 0.0

    @classmethod
    def from_path(cls, path: DronePath, t0: float = 0.0) -> "DelayedTrajectory":
        return cls(path, build_profile(path.length, path.limits), t0)

    @property
    def end_time(self) -> float:
        return self.t0 + self.profile.travel_time

    def positions(self, t) -> np.ndarray:
        """Positions at the times in ``t``; returns shape ``t.shape + (3,)``."""
        t = np.asarray(t, dtype=float)
        length = self.profile.length
        if length == 0.0:
            return np.broadcast_to(self.path.start, t.shape + (3,)).copy()
        frac = np.asarray(self.profile.distance_at(t - self.t0)) / length
        pos = self.path.start + frac[..., None] * self.path.vector
        done = frac >= 1.0
        if np.any(done):
            pos[done] = self.path.target
        return pos


def position_at(traj: DelayedTrajectory, t: float) -> np.ndarray:
    """Position of a delayed drone ``t`` seconds after the flock starts."""
    if t <= traj.t0:
        return traj.path.start.copy()
    if t >= traj.end_time:
        return traj.path.target.copy()
    return traj.positions(np.array([t]))[0]


@dataclass(frozen=True, eq=False)
class MotionTable:
    """Paths and profiles of many drones as aligned arrays, one row per drone."""

    start: np.ndarray
    target: np.ndarray
    vec: np.ndarray
    length: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    peak: np.ndarray
    s_a: np.ndarray
    s_d: np.ndarray
    accel: np.ndarray
    decel: np.ndarray

    @classmethod
    def build(cls, paths, profiles=None) -> "MotionTable":
        if profiles is None:
            profiles = [build_profile(p.length, p.limits) for p in paths]
        start = np.array([p.start for p in paths], dtype=float).reshape(-1, 3)
        target = np.array([p.target for p in paths], dtype=float).reshape(-1, 3)

        def col(name):
            return np.array([getattr(pr, name) for pr in profiles], dtype=float)

        return cls(start, target, target - start, col("length"), col("t1"), col("t2"), col("t3"),
                   col("v_peak"), col("s_a"), col("s_d"), col("accel"), col("decel"))

    @property
    def travel(self) -> np.ndarray:
        return self.t1 + self.t2 + self.t3

    def positions(self, rows: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Position of drone ``rows[k]`` at ``tau[k]`` seconds after its own start."""
        t1, t2, t3 = self.t1[rows], self.t2[rows], self.t3[rows]
        total = t1 + t2 + t3
        tc = np.clip(tau, 0.0, total)
        u = tc - t1 - t2
        arc = np.where(
            tc <= t1,
            0.5 * self.accel[rows] * tc * tc,
            np.where(tc <= t1 + t2,
                     self.s_a[rows] + self.peak[rows] * (tc - t1),
                     self.s_d[rows] + self.peak[rows] * u - 0.5 * self.decel[rows] * u * u),
        )
        length = self.length[rows]
        frac = np.divide(arc, length, out=np.zeros_like(arc), where=length > 0)
        pos = self.start[rows] + np.minimum(frac, 1.0)[:, None] * self.vec[rows]
        done = tau >= total
        pos[done] = self.target[rows[done]]
        return pos
