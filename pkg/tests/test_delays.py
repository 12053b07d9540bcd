import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import pair_min_distance_dense

from tps.collision import SafetyParams, build_tables
from tps.delays import (
    ForbiddenInterval,
    PairSearch,
    Schedule,
    SearchParams,
    assign_delay,
    critical_times,
    forbidden_interval,
    min_pair_distance,
    schedule_all,
)
from tps.errors import InvalidInputError
from tps.geometry import closest_approach, point_segment_distance
from tps.kinematics import DelayedTrajectory, DronePath, KinematicLimits, build_profile
from tps.priority import PriorityVector, compute_priority
from tps.scenario import ScenarioConfig, generate

SAFETY = SafetyParams()
PARAMS = SearchParams()
LIMITS = KinematicLimits()


def iv(lo, hi):
    return ForbiddenInterval(lo, hi)


@pytest.mark.parametrize("intervals, expected", [
    ([(-2, -1)], 0.0),
    ([(-1, 2), (3, 5)], 2.0),
    ([(0, 1), (1, 4)], 4.0),
    ([], 0.0),
    ([(3, 5), (-1, 2)], 2.0),
    ([(-math.inf, 1.5)], 1.5),
])
def test_assign_delay_examples(intervals, expected):
    assert assign_delay([iv(*x) for x in intervals]) == expected


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0, 5)), max_size=8))
def test_assign_delay_against_scan(raw):
    intervals = [iv(lo, lo + w) for lo, w in raw]
    got = assign_delay(intervals)
    assert got >= 0
    assert not any(got in x for x in intervals)
    grid = np.arange(0.0, got, 1e-3)
    for c in grid[::7]:
        assert any(c in x for x in intervals)


def test_interval_validation_and_half_open():
    with pytest.raises(InvalidInputError):
        iv(2, 1)
    x = iv(1, 2)
    assert 1 in x and 2 not in x
    assert x.shifted(3) == iv(4, 5)


def test_critical_times_on_trapezoid():
    prof = build_profile(400.0, LIMITS)
    assert critical_times(0.0, 0.0, prof, prof)[0] == 0.0
    assert critical_times(1.0, 0.0, prof, prof)[0] == pytest.approx(prof.travel_time)
    t_p, t_q, t_cr = critical_times(0.5, 0.25, prof, prof)
    assert t_p == pytest.approx(20 / 3 + (200 - 200 / 3) / 20)
    assert t_cr == pytest.approx(t_p - t_q)


def crossers(gap=0.5):
    return DronePath([-50, 0, 0], [50, 0, 0]), DronePath([0, -50, gap], [0, 50, gap])


def test_min_pair_distance_examples():
    p, q = crossers(0.0)
    tp = DelayedTrajectory.from_path(p)
    tq = DelayedTrajectory.from_path(q)
    assert min_pair_distance(tp, tq) < 1e-3
    late = DelayedTrajectory.from_path(q, 10 * tp.profile.travel_time)
    # p is parked at its target by the time q moves
    expected = float(point_segment_distance(p.target, q.start, q.target)[0])
    assert min_pair_distance(tp, late) == pytest.approx(expected, abs=1e-6)
    a = DronePath([0, 0, 0], [0, 0, 30])
    b = DronePath([12, 0, 0], [12, 5, 40])
    ta = DelayedTrajectory.from_path(a)
    tb = DelayedTrajectory.from_path(b, 20.0)
    dense = pair_min_distance_dense(a.start, a.target, b.start, b.target, 0.0, 20.0, LIMITS)
    assert min_pair_distance(ta, tb) == pytest.approx(dense, abs=1e-4)


def collision_set(p, q, deltas):
    thr = SAFETY.threshold
    return np.array([pair_min_distance_dense(p.start, p.target, q.start, q.target, 0.0, d, LIMITS) <= thr
                     for d in deltas])


def test_symmetric_crossers_interval():
    p, q = crossers()
    pg = closest_approach(p, q)
    got = forbidden_interval(p, q, pg.s, pg.t, 0.5, SAFETY, PARAMS)
    assert got.lower == pytest.approx(-got.upper, abs=2 * PARAMS.dt_step)
    deltas = np.arange(-1.0, 1.0, 2e-3)
    hit = collision_set(p, q, deltas)
    lo, hi = deltas[hit].min(), deltas[hit].max()
    assert got.lower == pytest.approx(lo, abs=2 * PARAMS.dt_step + 2e-3)
    assert got.upper == pytest.approx(hi, abs=2 * PARAMS.dt_step + 2e-3)


def target_blocker():
    # p lands on q's path, so p must wait for q to pass
    return DronePath([0, 0, 0], [100, 0, 0]), DronePath([100, -50, 0], [100, 50, 0])


def test_hard_pair_has_open_lower_end_and_monotone_predicate():
    lower_drone, higher_drone = target_blocker()
    tables = build_tables([lower_drone, higher_drone], SAFETY)
    assert tables.cl[0, 1] == 1.0
    search = PairSearch(higher_drone, lower_drone, tables.r[1, 0], tables.r[0, 1], SAFETY.threshold, PARAMS)
    got = search.forbidden_interval(hard=True)
    assert got.lower == -math.inf
    assert not search.collision_free(search.T_cr)
    deltas = np.arange(search.T_cr, got.upper + 5.0, PARAMS.dt_step)
    free = search.batch.collision_free(np.zeros(len(deltas), dtype=int), deltas)
    first = int(np.argmax(free))
    assert free[first] and np.all(free[first:])
    assert deltas[first] == pytest.approx(got.upper, abs=PARAMS.dt_step)


def test_interval_ends_checked_by_dense_oracle():
    sc = generate(ScenarioConfig(n=30, seed=11))
    tables = build_tables(sc.paths, SAFETY, strict=False)
    rows, cols = np.nonzero(np.triu(tables.pb, 1))
    thr = SAFETY.threshold
    for p_id, q_id in list(zip(rows, cols))[:6]:
        p, q = sc.paths[p_id], sc.paths[q_id]
        got = forbidden_interval(p, q, tables.r[p_id, q_id], tables.r[q_id, p_id],
                                 tables.cl[q_id, p_id], SAFETY, PARAMS)
        if got.lower == got.upper:
            continue

        def dist(d):
            return pair_min_distance_dense(p.start, p.target, q.start, q.target, 0.0, d, LIMITS)

        assert dist(got.upper) > thr - 1e-3
        assert dist(got.upper - PARAMS.dt_step) <= thr + 1e-3
        if math.isfinite(got.lower):
            assert dist(got.lower) > thr - 1e-3
            assert dist(got.lower + PARAMS.dt_step) <= thr + 1e-3


def test_schedule_trivial_cases():
    single = [DronePath([0, 0, 0], [0, 0, 50])]
    tables = build_tables(single, SAFETY)
    sched = schedule_all(single, tables, compute_priority(tables))
    np.testing.assert_array_equal(sched.delays, [0.0])
    apart = [DronePath([0, 0, 0], [0, 0, 50]), DronePath([30, 0, 0], [30, 0, 50])]
    tables = build_tables(apart, SAFETY)
    np.testing.assert_array_equal(schedule_all(apart, tables, compute_priority(tables)).delays, [0, 0])


def test_schedule_respects_every_interval():
    sc = generate(ScenarioConfig(n=20, seed=5))
    tables = build_tables(sc.paths, SAFETY)
    pv = compute_priority(tables)
    sched = schedule_all(sc.paths, tables, pv)
    assert sched.delays[pv[0]] == 0.0
    assert np.all(sched.delays >= 0)
    assert sched.flock_time >= sched.travel_times.max()
    for x, collected in sched.intervals.items():
        for _, absolute in collected:
            assert sched.delays[x] not in absolute
        # nothing earlier on the dt grid is feasible
        for c in np.arange(0.0, sched.delays[x] - PARAMS.dt_step, PARAMS.dt_step):
            assert any(c in a for _, a in collected)


def test_schedule_json_round_trip():
    sc = generate(ScenarioConfig(n=12, seed=2))
    tables = build_tables(sc.paths, SAFETY)
    sched = schedule_all(sc.paths, tables, compute_priority(tables))
    back = Schedule.from_json(sched.to_json())
    assert back.pv == sched.pv
    assert np.array_equal(back.delays, sched.delays)
    assert np.array_equal(back.travel_times, sched.travel_times)
    doc = json.loads(sched.to_json())
    assert doc["schema_version"] == 1
    assert {"drone_id", "delay_s", "travel_time_s"} == set(doc["drones"][0])


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=6))
def test_schedule_json_bit_exact(values):
    n = len(values)
    sched = Schedule(PriorityVector(tuple(range(n))), np.array(values), np.array(values[::-1]))
    back = Schedule.from_json(sched.to_json())
    assert back.delays.tobytes() == sched.delays.tobytes()
    assert back.travel_times.tobytes() == sched.travel_times.tobytes()


def test_schedule_json_rejects_bad_version():
    with pytest.raises(InvalidInputError):
        Schedule.from_json(json.dumps({"schema_version": 99, "priority": [], "drones": []}))


def test_search_params_validated():
    with pytest.raises(InvalidInputError):
        SearchParams(dt_step=0)
    with pytest.raises(InvalidInputError):
        SearchParams(expansion_cap=0.5)
