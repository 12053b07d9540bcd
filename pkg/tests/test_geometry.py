import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import segment_distance_grid
from scipy.spatial.transform import Rotation

from tps.errors import DegeneratePathError
from tps.geometry import closest_approach, closest_approach_batch, point_segment_distance
from tps.kinematics import DronePath


def test_perpendicular_crossers():
    pg = closest_approach(DronePath([0, 0, 0], [10, 0, 0]), DronePath([5, -5, 1], [5, 5, 1]))
    assert pg.s == pytest.approx(0.5)
    assert pg.t == pytest.approx(0.5)
    assert pg.mu == pytest.approx(1.0)
    assert not pg.parallel
    np.testing.assert_allclose(pg.point_p, [5, 0, 0])
    np.testing.assert_allclose(pg.point_q, [5, 0, 1])


def test_parallel_offset():
    pg = closest_approach(DronePath([0, 0, 0], [10, 0, 0]), DronePath([0, 3, 0], [10, 3, 0]))
    assert pg.parallel
    assert pg.mu == pytest.approx(3.0)
    assert pg.s == pytest.approx(0.5) and pg.t == pytest.approx(0.5)


def test_collinear_disjoint_clamped():
    pg = closest_approach(DronePath([0, 0, 0], [1, 0, 0]), DronePath([5, 0, 0], [6, 0, 0]))
    assert (pg.s, pg.t) == (1.0, 0.0)
    assert pg.mu == pytest.approx(4.0)


def test_clamp_needs_reprojection():
    # naive clamping of both parameters would overestimate the distance here
    p = DronePath([0, 0, 0], [10, 0, 0])
    q = DronePath([12, 1, 0], [20, 8, 0])
    pg = closest_approach(p, q)
    assert pg.mu == pytest.approx(segment_distance_grid(p.start[None], p.target[None],
                                                        q.start[None], q.target[None])[0], abs=1e-6)


def test_degenerate_rejected():
    with pytest.raises(DegeneratePathError):
        closest_approach(DronePath([0, 0, 0], [0, 0, 0]), DronePath([1, 0, 0], [2, 0, 0]))


def test_batch_matches_grid_oracle(rng):
    m = 400
    p0, p1, q0, q1 = (rng.uniform(-10, 10, (m, 3)) for _ in range(4))
    s, t, pp, pq, mu, _ = closest_approach_batch(p0, p1, q0, q1)
    np.testing.assert_allclose(mu, segment_distance_grid(p0, p1, q0, q1), atol=1e-3)
    np.testing.assert_allclose(pp, p0 + s[:, None] * (p1 - p0), atol=1e-12)
    np.testing.assert_allclose(mu, np.linalg.norm(pp - pq, axis=1), atol=1e-12)
    assert np.all((s >= 0) & (s <= 1) & (t >= 0) & (t <= 1))


coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord, coord)


@given(point, point, point, point)
def test_symmetry_exact(a, b, c, d):
    if a == b or c == d:
        return
    s1, t1, _, _, mu1, _ = closest_approach_batch([a], [b], [c], [d])
    s2, t2, _, _, mu2, _ = closest_approach_batch([c], [d], [a], [b])
    assert s1[0] == t2[0] and t1[0] == s2[0]
    assert mu1[0] == mu2[0]


@given(point, point, point, point, st.integers(0, 2 ** 31))
def test_rigid_motion_invariance(a, b, c, d, seed):
    if a == b or c == d:
        return
    rot = Rotation.random(random_state=seed)
    shift = np.random.default_rng(seed).uniform(-50, 50, 3)
    pts = np.array([a, b, c, d], dtype=float)
    moved = rot.apply(pts) + shift
    mu = closest_approach_batch(*[x[None] for x in pts])[4][0]
    mu2 = closest_approach_batch(*[x[None] for x in moved])[4][0]
    assert mu2 == pytest.approx(mu, rel=1e-9, abs=1e-9)


@given(point, point, point, point, st.floats(0, 1), st.floats(0, 1))
def test_lower_bound_on_sampled_pairs(a, b, c, d, u, v):
    pts = np.array([a, b, c, d], dtype=float)
    mu = closest_approach_batch(*[x[None] for x in pts])[4][0]
    x = pts[0] + u * (pts[1] - pts[0])
    y = pts[2] + v * (pts[3] - pts[2])
    assert mu <= np.linalg.norm(x - y) + 1e-9


def test_point_segment_distance():
    d = point_segment_distance([[0, 1, 0], [-3, 0, 4], [12, 0, 0]], [[0, 0, 0]] * 3, [[10, 0, 0]] * 3)
    np.testing.assert_allclose(d, [1.0, 5.0, 2.0])
