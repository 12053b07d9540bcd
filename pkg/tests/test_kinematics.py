import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from tps.errors import InvalidInputError
from tps.kinematics import (
    DelayedTrajectory,
    DronePath,
    KinematicLimits,
    MotionTable,
    build_profile,
    position_at,
    travel_time,
)

LIMITS = KinematicLimits()


def oracle_speed(t, total, lim):
    # minimum-time rest-to-rest speed: capped by the ramp up, the cruise limit and the ramp down
    return max(0.0, min(lim.a_max * t, lim.v_max, lim.d_max * (total - t)))


def oracle_travel_time(length, lim):
    def covered(total):
        kinks = [k for k in (lim.v_max / lim.a_max, total - lim.v_max / lim.d_max) if 0 < k < total]
        return quad(oracle_speed, 0.0, total, args=(total, lim), points=kinks or None, limit=200)[0] - length

    return brentq(covered, 1e-9, 10 * length / lim.v_max + 10 * lim.v_max / min(lim.a_max, lim.d_max) + 10)


def oracle_distance(tau, total, lim):
    kinks = [k for k in (lim.v_max / lim.a_max, total - lim.v_max / lim.d_max) if 0 < k < tau]
    return quad(oracle_speed, 0.0, tau, args=(total, lim), points=kinks or None, limit=200)[0]


def test_zero_length_profile():
    prof = build_profile(0.0, LIMITS)
    assert (prof.t1, prof.t2, prof.t3, prof.v_peak) == (0.0, 0.0, 0.0, 0.0)
    assert travel_time(prof) == 0.0


def test_negative_length_rejected():
    with pytest.raises(InvalidInputError):
        build_profile(-1.0, LIMITS)


def test_trapezoid_400m():
    prof = build_profile(400.0, LIMITS)
    assert prof.t1 == pytest.approx(20 / 3)
    assert prof.t2 == pytest.approx(40 / 3)
    assert prof.t3 == pytest.approx(20 / 3)
    assert travel_time(prof) == pytest.approx(80 / 3)
    assert travel_time(prof) == pytest.approx(oracle_travel_time(400.0, LIMITS), abs=1e-6)


def test_triangle_short_path():
    prof = build_profile(200 / 3, LIMITS)
    assert prof.t2 == 0.0
    assert prof.v_peak == pytest.approx(math.sqrt(200), rel=1e-9)
    assert travel_time(prof) == pytest.approx(9.428, abs=1e-3)
    assert travel_time(prof) == pytest.approx(oracle_travel_time(200 / 3, LIMITS), abs=1e-6)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_limits_validated(bad):
    with pytest.raises(InvalidInputError):
        KinematicLimits(a_max=bad)


limits_st = st.builds(
    KinematicLimits,
    a_max=st.floats(0.5, 10), v_max=st.floats(1, 40), d_max=st.floats(0.5, 10),
)


@given(length=st.floats(0.01, 2000), lim=limits_st)
def test_profile_matches_integration_oracle(length, lim):
    prof = build_profile(length, lim)
    assert prof.t2 >= 0
    assert prof.v_peak <= lim.v_max * (1 + 1e-12)
    if prof.t2 > 0:
        assert prof.v_peak == lim.v_max
    total = oracle_travel_time(length, lim)
    assert travel_time(prof) == pytest.approx(total, rel=1e-6, abs=1e-9)
    for frac in (0.1, 0.37, 0.5, 0.81):
        tau = frac * total
        assert prof.distance_at(tau) == pytest.approx(oracle_distance(tau, total, lim), rel=1e-6, abs=1e-8)
    # phases add back up to the full length
    s_end = prof.s_d + prof.v_peak * prof.t3 - 0.5 * prof.decel * prof.t3 ** 2
    assert s_end == pytest.approx(length, rel=1e-9)


@given(length=st.floats(0.01, 2000), lim=limits_st, frac=st.floats(0, 1))
def test_time_at_distance_inverts(length, lim, frac):
    prof = build_profile(length, lim)
    s = frac * length
    t = prof.time_at_distance(s)
    assert prof.distance_at(t) == pytest.approx(s, rel=1e-9, abs=1e-9)


def _random_path(rng, lim=LIMITS):
    return DronePath(rng.uniform(-50, 50, 3), rng.uniform(-50, 50, 3) + [0, 0, 200], lim)


def test_position_endpoints_and_phase_boundary():
    path = DronePath([0, 0, 0], [400, 0, 0])
    traj = DelayedTrajectory.from_path(path, t0=5.0)
    np.testing.assert_array_equal(position_at(traj, 0.0), path.start)
    np.testing.assert_array_equal(position_at(traj, traj.end_time + 1), path.target)
    np.testing.assert_array_equal(position_at(traj, traj.end_time), path.target)
    np.testing.assert_allclose(position_at(traj, 5.0 + 20 / 3), [200 / 3, 0, 0], rtol=1e-12)


def test_monotone_progress_and_speed_bound(rng):
    for _ in range(20):
        path = _random_path(rng)
        traj = DelayedTrajectory.from_path(path, t0=rng.uniform(0, 3))
        t = np.arange(0.0, traj.end_time + 1.0, 1e-4)
        pos = traj.positions(t)
        arc = (pos - path.start) @ path.direction
        assert np.all(np.diff(arc) >= -1e-9)
        speed = np.linalg.norm(np.diff(pos, axis=0), axis=1) / 1e-4
        assert speed.max() <= LIMITS.v_max + 1e-6


@given(length=st.floats(1, 1500), t0=st.floats(0, 20), lim=limits_st)
def test_delay_shift(length, t0, lim):
    path = DronePath([0, 0, 0], [length, 0, 0], lim)
    base = DelayedTrajectory.from_path(path, 0.0)
    late = DelayedTrajectory.from_path(path, t0)
    t = np.linspace(t0, late.end_time + 1, 50)
    np.testing.assert_allclose(late.positions(t), base.positions(t - t0), atol=1e-9)
    assert np.linalg.norm(late.positions(np.array([late.end_time]))[0] - path.target) < 1e-6


def test_degenerate_path_stays_put():
    path = DronePath([1, 2, 3], [1, 2, 3])
    assert path.is_degenerate
    traj = DelayedTrajectory.from_path(path)
    np.testing.assert_array_equal(traj.positions(np.array([0.0, 1.0])), [[1, 2, 3], [1, 2, 3]])


def test_path_rejects_bad_points():
    with pytest.raises(InvalidInputError):
        DronePath([0, 0], [1, 1, 1])
    with pytest.raises(InvalidInputError):
        DronePath([0, 0, math.nan], [1, 1, 1])


def test_motion_table_matches_trajectories(rng):
    paths = [_random_path(rng) for _ in range(8)]
    table = MotionTable.build(paths)
    rows = np.repeat(np.arange(8), 40)
    tau = np.tile(np.linspace(-1, 40, 40), 8)
    expected = np.vstack([DelayedTrajectory.from_path(p).positions(np.linspace(-1, 40, 40)) for p in paths])
    np.testing.assert_allclose(table.positions(rows, tau), expected, atol=1e-9)
