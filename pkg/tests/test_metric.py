import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarselab.metric import (
    FiniteMetricSpace,
    MetricError,
    diameter,
    distance_to_set,
    neighborhood,
    set_distance,
)

from conftest import spaces


def test_set_distance_examples(line4):
    assert set_distance(line4, {0}, {2, 3}) == 2
    assert set_distance(line4, {1, 2}, {1, 2}) == 0
    assert set_distance(line4, {0, 1}, {1, 2}) == 0


def test_set_distance_empty(line4):
    with pytest.raises(MetricError, match="empty set distance undefined"):
        set_distance(line4, set(), {1})


def test_neighborhood_examples(line4):
    assert neighborhood(line4, {1}, 1.5) == {0, 1, 2}
    assert neighborhood(line4, {2}, 0) == {2}
    assert neighborhood(line4, {0, 1}, -0.5) == {0, 1}
    # open ball: distance exactly r is excluded
    assert neighborhood(line4, {1}, 1.0) == {1}
    assert neighborhood(line4, set(), 2.0) == frozenset()


def test_diameter_examples(line4):
    assert diameter(line4, {0, 3}) == 3
    assert diameter(line4, {2}) == 0
    assert diameter(line4, set()) == 0
    assert diameter(line4, range(4)) == line4.diam


@pytest.mark.parametrize("bad, msg", [
    ([[0, 1], [2, 0]], "symmetric"),
    ([[1, 0], [0, 0]], "diagonal"),
    ([[0, -1], [-1, 0]], "nonnegative"),
    ([[0, 1, 5], [1, 0, 1], [5, 1, 0]], "triangle"),
    ([[0, 1, 2]], "square"),
])
def test_validation_rejects(bad, msg):
    with pytest.raises(MetricError, match=msg):
        FiniteMetricSpace(np.array(bad, dtype=float))


def test_triangle_tolerance():
    eps = 5e-10
    FiniteMetricSpace(np.array([[0, 1, 2 + eps], [1, 0, 1], [2 + eps, 1, 0]]))


def test_json_round_trip(tmp_path, line4):
    p = tmp_path / "s.json"
    line4.save(p)
    data = json.loads(p.read_text())
    assert set(data) == {"n", "dist"}
    back = FiniteMetricSpace.load(p)
    assert np.array_equal(back.dist, line4.dist)


def test_subspace_and_scaled(line4):
    sub = line4.subspace([0, 3])
    assert sub.n == 2 and sub.diam == 3
    assert line4.scaled(2).diam == 6
    with pytest.raises(MetricError):
        line4.scaled(0)


@given(spaces(), st.integers(0, 2**16), st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=6))
def test_neighborhood_monotone(space, seed, radii):
    U = frozenset(np.flatnonzero(np.random.default_rng(seed).random(space.n) < 0.5).tolist())
    radii = sorted(radii)
    hoods = [neighborhood(space, U, r) for r in radii]
    assert all(a <= b for a, b in zip(hoods, hoods[1:]))


@given(spaces(), st.integers(0, 2**16), st.floats(0, 1.5))
def test_shrink_then_fatten_inside(space, seed, s):
    U = frozenset(np.flatnonzero(np.random.default_rng(seed).random(space.n) < 0.6).tolist())
    assert neighborhood(space, neighborhood(space, U, -s), s) <= U


@given(spaces(), st.integers(0, 2**16))
def test_set_distance_symmetric(space, seed):
    rng = np.random.default_rng(seed)
    U = {int(rng.integers(0, space.n))} | set(np.flatnonzero(rng.random(space.n) < 0.3).tolist())
    V = {int(rng.integers(0, space.n))} | set(np.flatnonzero(rng.random(space.n) < 0.3).tolist())
    assert set_distance(space, U, V) == set_distance(space, V, U)
    assert (set_distance(space, U, V) == 0) == bool(U & V) or space.dist[np.ix_(sorted(U), sorted(V))].min() == 0
    assert np.array_equal(distance_to_set(space, U)[sorted(V)].min(), set_distance(space, U, V))
