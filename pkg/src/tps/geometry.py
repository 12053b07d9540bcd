"""Closest approach between straight path segments in 3D.

The unconstrained minimiser of ``|P(s) - Q(t)|`` comes from the usual
normal equations; out-of-range parameters are clamped and the other
parameter is re-projected onto its segment, which keeps ``mu`` equal to the
true segment-to-segment distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tps.errors import DegeneratePathError
from tps.kinematics import DronePath

PARALLEL_TOL = 1e-12
_TINY = 1e-24


@dataclass(frozen=True, eq=False)
class PairGeometry:
    s: float
    t: float
    point_p: np.ndarray
    point_q: np.ndarray
    mu: float
    parallel: bool


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", u, v)


def _canonical_swap(p0, p1, q0, q1) -> np.ndarray:
    """True where the q segment sorts before the p segment (lexicographically)."""
    diff = np.hstack([p0 - q0, p1 - q1])
    nonzero = diff != 0.0
    first = np.argmax(nonzero, axis=1)
    lead = diff[np.arange(len(diff)), first]
    return lead > 0.0


def _solve(p0, p1, q0, q1, parallel_tol):
    b1 = p1 - p0
    b2 = q1 - q0
    r = p0 - q0
    a = _dot(b1, b1)
    b = _dot(b1, b2)
    c = _dot(b2, b2)
    d = _dot(b1, r)
    e = _dot(b2, r)
    denom = a * c - b * b

    m = len(a)
    s = np.zeros(m)
    t = np.zeros(m)
    deg_p = a <= _TINY
    deg_q = c <= _TINY
    parallel = ~deg_p & ~deg_q & (np.abs(denom) <= parallel_tol * a * c)
    regular = ~deg_p & ~deg_q & ~parallel

    with np.errstate(divide="ignore", invalid="ignore"):
        # point vs point / point vs segment
        only_p = deg_p & ~deg_q
        t[only_p] = np.clip(e[only_p] / c[only_p], 0.0, 1.0)
        only_q = deg_q & ~deg_p
        s[only_q] = np.clip(-d[only_q] / a[only_q], 0.0, 1.0)

        # skew lines: clamp s, project t, then re-project s if t clamped
        sr = np.clip((b * e - c * d)[regular] / denom[regular], 0.0, 1.0)
        ar, br, cr, dr, er = a[regular], b[regular], c[regular], d[regular], e[regular]
        tr = (br * sr + er) / cr
        low = tr < 0.0
        high = tr > 1.0
        tr = np.clip(tr, 0.0, 1.0)
        sr = np.where(low, np.clip(-dr / ar, 0.0, 1.0), sr)
        sr = np.where(high, np.clip((br - dr) / ar, 0.0, 1.0), sr)
        s[regular] = sr
        t[regular] = tr

        # parallel: midpoint of the overlap of q's projection onto p
        if np.any(parallel):
            ap, bp, cp, dp, ep = a[parallel], b[parallel], c[parallel], d[parallel], e[parallel]
            u0 = -dp / ap
            u1 = (bp - dp) / ap
            lo = np.maximum(0.0, np.minimum(u0, u1))
            hi = np.minimum(1.0, np.maximum(u0, u1))
            overlap = lo <= hi
            sp = np.where(overlap, 0.5 * (lo + hi), np.where(np.maximum(u0, u1) < 0.0, 0.0, 1.0))
            tp = np.clip((bp * sp + ep) / cp, 0.0, 1.0)
            sp = np.where(overlap, sp, np.clip((bp * tp - dp) / ap, 0.0, 1.0))
            s[parallel] = sp
            t[parallel] = tp

    point_p = p0 + s[:, None] * b1
    point_q = q0 + t[:, None] * b2
    mu = np.linalg.norm(point_p - point_q, axis=1)
    return s, t, point_p, point_q, mu, parallel


def closest_approach_batch(p0, p1, q0, q1, parallel_tol: float = PARALLEL_TOL):
    """Vectorised closest approach for ``m`` segment pairs.

    All inputs have shape ``(m, 3)``.  Returns ``(s, t, point_p, point_q, mu,
    parallel)``.  Zero-length segments are treated as points.  The result is
    exactly symmetric: swapping the roles of p and q swaps ``s`` and ``t``.
    """
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    swap = _canonical_swap(p0, p1, q0, q1)
    w = swap[:, None]
    a0, a1 = np.where(w, q0, p0), np.where(w, q1, p1)
    c0, c1 = np.where(w, p0, q0), np.where(w, p1, q1)
    s, t, pt_a, pt_c, mu, parallel = _solve(a0, a1, c0, c1, parallel_tol)
    s_out = np.where(swap, t, s)
    t_out = np.where(swap, s, t)
    point_p = np.where(w, pt_c, pt_a)
    point_q = np.where(w, pt_a, pt_c)
    return s_out, t_out, point_p, point_q, mu, parallel


def closest_approach(path_p: DronePath, path_q: DronePath) -> PairGeometry:
    """Closest points between two drone paths and the distance between them."""
    for name, path in (("p", path_p), ("q", path_q)):
        if path.is_degenerate:
            raise DegeneratePathError(f"path {name} has zero length")
    s, t, pp, pq, mu, par = closest_approach_batch(
        path_p.start[None], path_p.target[None], path_q.start[None], path_q.target[None]
    )
    return PairGeometry(float(s[0]), float(t[0]), pp[0], pq[0], float(mu[0]), bool(par[0]))


def point_segment_distance(x, a, b) -> np.ndarray:
    """Distance from points ``x`` to segments ``[a, b]`` (row-wise, shape ``(m, 3)``)."""
    x, a, b = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (x, a, b))
    ab = b - a
    denom = _dot(ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom > _TINY, _dot(x - a, ab) / denom, 0.0)
    u = np.clip(u, 0.0, 1.0)
    return np.linalg.norm(x - (a + u[:, None] * ab), axis=1)
