import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from tps.errors import InvalidInputError, ScenarioGenerationError
from tps.scenario import (
    SCALABILITY_CORNER,
    Scenario,
    ScenarioConfig,
    _offsets,
    cube_side,
    density,
    generate,
    square_side,
)


@pytest.mark.parametrize("n, delta, side", [(10, 10, 10), (1, 1, 1), (30, 10, 18)])
def test_square_side(n, delta, side):
    assert square_side(n, delta) == side


@pytest.mark.parametrize("n, delta, side", [(10, 10, 7), (1, 1 / 3, 1), (5000, 99.1944, 115), (100, 12.3341, 16)])
def test_cube_side(n, delta, side):
    assert cube_side(n, delta) == side


@pytest.mark.parametrize("n, value", [(30, 6.493), (50, 8.5249), (1, 1.06), (100, 12.3341), (1000, 42.0732)])
def test_density(n, value):
    assert density(n) == pytest.approx(value, abs=6e-4)


def test_bad_sizes_rejected():
    with pytest.raises(InvalidInputError):
        square_side(0, 10)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(n=0)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(n=3, delta="dense")


def test_generated_layout():
    sc = generate(ScenarioConfig(n=10, delta=10, seed=7))
    starts, targets = sc.starts, sc.targets
    assert sc.n == 10
    assert pdist(starts).min() >= 2.0 and pdist(targets).min() >= 2.0
    assert np.all(starts[:, 2] == 0)
    assert np.all(np.abs(starts[:, :2]) <= 5)
    assert np.all((targets >= 200 - 6) & (targets <= 200))
    assert np.all(starts == np.round(starts)) and np.all(targets == np.round(targets))


def test_scalability_cube_contains_targets():
    sc = generate(ScenarioConfig(n=100, delta="auto", cube_far_corner=SCALABILITY_CORNER, seed=1))
    side = cube_side(100, density(100))
    assert side == 16
    assert np.all((sc.targets >= 500 - (side - 1)) & (sc.targets <= 500))


def test_same_seed_same_bytes():
    a = generate(ScenarioConfig(n=25, seed=99)).to_json()
    b = generate(ScenarioConfig(n=25, seed=99)).to_json()
    c = generate(ScenarioConfig(n=25, seed=100)).to_json()
    assert a == b and a != c


def test_round_trip_and_validation(tmp_path):
    sc = generate(ScenarioConfig(n=15, seed=4))
    path = tmp_path / "s.json"
    sc.save(path)
    back = Scenario.load(path)
    assert np.array_equal(back.starts, sc.starts) and np.array_equal(back.targets, sc.targets)
    assert back.config == sc.config
    doc = json.loads(path.read_text())
    doc["starts"][1] = [doc["starts"][0][0] + 1, doc["starts"][0][1], 0]
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidInputError):
        Scenario.load(path)
    doc["schema_version"] = 7
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidInputError):
        Scenario.load(path)


def test_overfull_grid_fails_with_fill_ratio():
    with pytest.raises(ScenarioGenerationError, match="fill ratio"):
        generate(ScenarioConfig(n=30, delta=1.0))


@given(st.integers(2, 3))
def test_spacing_metrics_coincide_on_integer_grid(dims):
    # any integer offset with Euclidean norm < 2 has every coordinate in {-1, 0, 1}
    eu = {tuple(o) for o in _offsets(2.0, dims, "euclidean")}
    ch = {tuple(o) for o in _offsets(2.0, dims, "chebyshev")}
    assert eu == ch
    assert len(eu) == 3 ** dims - 1
