import csv
import io
import math

import numpy as np
import pytest
from oracles import pair_min_distance_dense

from tps.delays import Schedule
from tps.kinematics import KinematicLimits
from tps.metrics import RunMetrics, compute_metrics, flock_time, overheads, verify
from tps.planner import plan
from tps.priority import PriorityVector
from tps.scenario import Scenario, ScenarioConfig, generate


def manual(starts, targets, delays):
    cfg = ScenarioConfig(n=len(starts), min_spacing=0.0)
    sc = Scenario.from_points(starts, targets, cfg)
    from tps.kinematics import build_profile

    travel = np.array([build_profile(p.length, p.limits).travel_time for p in sc.paths])
    return sc, Schedule(PriorityVector(tuple(range(len(starts)))), np.array(delays, float), travel)


def test_verifier_catches_collision():
    sc, sched = manual([[-50, 0, 0], [0, -50, 0.2]], [[50, 0, 0], [0, 50, 0.2]], [0.0, 0.0])
    check = verify(sc, sched)
    assert not check.collision_free
    assert check.first_violation[0] == (0, 1)
    assert check.min_distance == pytest.approx(0.2, abs=1e-3)


@pytest.mark.parametrize("delay", [0.14, 3.0])
def test_verifier_clears_separated_crossing(delay):
    sc, sched = manual([[-50, 0, 0], [0, -50, 0.2]], [[50, 0, 0], [0, 50, 0.2]], [0.0, delay])
    check = verify(sc, sched)
    assert check.collision_free
    dense = pair_min_distance_dense(sc.starts[0], sc.targets[0], sc.starts[1], sc.targets[1],
                                    0.0, delay, KinematicLimits())
    if dense < 2.0:
        # inside the watch radius the minimum is refined
        assert check.min_distance == pytest.approx(dense, abs=1e-4)
    else:
        assert check.min_distance >= dense - 1e-9


def test_verifier_matches_dense_oracle_on_planned_scenario():
    sc = generate(ScenarioConfig(n=10, seed=3))
    res = plan(sc.paths)
    check = verify(sc, res.schedule)
    assert check.collision_free
    i, j = check.closest_pair
    dense = pair_min_distance_dense(sc.starts[i], sc.targets[i], sc.starts[j], sc.targets[j],
                                    res.schedule.delays[i], res.schedule.delays[j], KinematicLimits())
    assert check.min_distance == pytest.approx(dense, abs=1e-4)
    assert check.min_distance > 1.5 - 1e-3


def test_overheads_and_metrics_row():
    sc = generate(ScenarioConfig(n=10, seed=8))
    res = plan(sc.paths)
    t_oh, d_oh = overheads(sc, res.schedule)
    assert t_oh >= 100.0
    assert d_oh == 100.0
    assert flock_time(sc, res.schedule) == pytest.approx(res.schedule.flock_time)
    m = compute_metrics(sc, res.schedule, res.calc_time, verify(sc, res.schedule))
    assert m.mean_delay <= m.max_delay
    rows = list(csv.reader(io.StringIO(m.to_csv())))
    assert rows[0] == RunMetrics.csv_header()
    assert rows[0][:4] == ["seed", "n", "delta", "flock_time"]
    assert rows[1][-1] == "True"


def test_all_zero_delays_give_ideal_overhead():
    sc, sched = manual([[0, 0, 0], [40, 0, 0]], [[0, 0, 100], [40, 0, 80]], [0.0, 0.0])
    t_oh, d_oh = overheads(sc, sched)
    assert (t_oh, d_oh) == (100.0, 100.0)
    m = compute_metrics(sc, sched, 0.0)
    assert m.mean_delay == m.max_delay == 0.0
    assert math.isnan(m.min_observed_pair_distance) and not m.collision_free


def test_single_drone():
    sc, sched = manual([[0, 0, 0]], [[0, 0, 10]], [0.0])
    assert verify(sc, sched).collision_free
