import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarselab.fixtures import binary_tree, circle, random_tree, star_tree
from coarselab.hypcone import (
    LOG_SWITCH,
    SENTINEL,
    ConePoint,
    HyperbolicCone,
    TreeError,
    _dist_direct,
    _dist_log,
    chord_length,
    chord_two_term,
    cone_distance,
    cone_distance_arrays,
    cone_sample_space,
    delta_certificate,
    gromov_matrix,
    gromov_product,
    hyperbolicity_comparison,
    level_space,
    rough_embed,
    visual_product,
    visual_sandwich_check,
)
from coarselab.metric import FiniteMetricSpace, from_points

import oracles
from conftest import line

mpmath.mp.dps = 60


def mp_dist(t1, t2, alpha):
    return float(oracles.hyperbolic_chord_mp(t1, t2, alpha, mpmath.mp))


def two_point(d=1.0):
    return FiniteMetricSpace(np.array([[0.0, d], [d, 0.0]]))


def test_cone_distance_examples():
    cone = HyperbolicCone(two_point())
    assert cone.mu == math.pi
    assert cone_distance(cone, ConePoint(0, 2.0), ConePoint(0, 5.5)) == 3.5
    for t in (0.3, 1.0, 7.0, 30.0):
        assert cone_distance(cone, ConePoint(0, t), ConePoint(1, t)) == pytest.approx(2 * t, rel=1e-14)
    # law-of-cosines oracle: arccosh(cosh^2 1) = 1.513374...
    assert cone_distance_arrays(1.0, 1.0, math.pi / 2) == pytest.approx(mp_dist(1, 1, math.pi / 2), rel=1e-14)
    assert cone_distance(cone, ConePoint(0, 0.0), ConePoint(1, 4.0)) == 4.0


@given(st.floats(0.0, 18.0), st.floats(0.0, 18.0), st.floats(0.0, math.pi))
def test_direct_branch_matches_oracle(t1, t2, alpha):
    exact = mp_dist(t1, t2, alpha)
    got = float(cone_distance_arrays(t1, t2, alpha))
    assert got == pytest.approx(exact, rel=1e-10, abs=1e-13)


@given(st.floats(20.5, 300.0), st.floats(20.5, 300.0), st.floats(1e-6, math.pi))
def test_log_branch_matches_oracle(t1, t2, alpha):
    exact = mp_dist(t1, t2, alpha)
    got = float(cone_distance_arrays(t1, t2, alpha))
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-10)


def test_log_and_direct_agree_on_crossover_band():
    rng = np.random.default_rng(0)
    s = rng.uniform(35, 45, 20000)
    t1 = s * rng.uniform(0.02, 0.98, s.size)
    t2 = s - t1
    alpha = rng.uniform(1e-4, math.pi, s.size)
    rel = np.abs(_dist_direct(t1, t2, alpha) - _dist_log(t1, t2, alpha)) / _dist_direct(t1, t2, alpha)
    assert rel.max() <= 1e-9
    assert LOG_SWITCH == 40.0


def test_no_overflow_far_out():
    assert np.isfinite(cone_distance_arrays(800.0, 900.0, 1.0))
    assert float(cone_distance_arrays(800.0, 800.0, math.pi)) == pytest.approx(1600.0, rel=1e-14)


def test_chord_examples():
    assert chord_length(4.0, 0.0) == 0.0
    assert chord_length(3.0, math.pi) == pytest.approx(6.0, rel=1e-14)
    exact = mp_dist(3, 3, 0.01)
    assert chord_length(3.0, 0.01) == pytest.approx(exact, rel=1e-13)
    assert exact == pytest.approx(0.1001365, abs=1e-7)
    # the truncated small-angle form is close but not exact
    assert abs(chord_two_term(3.0, 0.01) - exact) < 1e-6
    with pytest.raises(ValueError):
        chord_length(1.0, 4.0)


@given(st.floats(1e-6, 5.0), st.floats(1e-8, 0.05))
def test_small_angle_chord_matches_oracle(t, alpha):
    assert chord_length(t, alpha) == pytest.approx(mp_dist(t, t, alpha), rel=1e-12, abs=1e-300)


def test_cone_metric_triangle_inequality():
    cone = HyperbolicCone(circle(32))
    rng = np.random.default_rng(5)
    pts = [ConePoint(int(z), float(t)) for z, t in zip(rng.integers(0, 32, 300), rng.exponential(4.0, 300))]
    d = cone_sample_space(cone, pts).dist
    assert np.array_equal(d, d.T)
    i, j, k = rng.integers(0, 300, size=(3, 20000))
    assert np.all(d[i, k] <= d[i, j] + d[j, k] + 1e-9 * (1 + d[i, k]))


def test_gromov_examples():
    sp = line(6)
    assert gromov_product(sp, 0, 3, 3) == 3
    assert gromov_product(sp, 0, 2, 5) == 2
    # tripod with legs 2, 3, 4: center 0, leaves 1, 2, 3
    from coarselab.fixtures import tree_space

    tri = tree_space([(0, 1, 2.0), (0, 2, 3.0), (0, 3, 4.0)], 4)
    assert gromov_product(tri, 1, 2, 3) == 2
    G = gromov_matrix(tri, 1)
    assert np.all(G >= -1e-12)


def brute_delta(space, o):
    d = space.dist.tolist()
    n = space.n
    g = lambda x, y: 0.5 * (d[x][o] + d[y][o] - d[x][y])
    best = 0.0
    for x in range(n):
        for y in range(n):
            for z in range(n):
                a = sorted((g(x, y), g(y, z), g(x, z)))
                best = max(best, a[1] - a[0])
    return best


def test_delta_examples():
    for tree in (star_tree(3), binary_tree(3), random_tree(25, 4)):
        assert delta_certificate(tree, 0) == pytest.approx(0.0, abs=1e-12)
    square = from_points(np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]]))
    assert delta_certificate(square, 0) == pytest.approx(brute_delta(square, 0), abs=1e-15)


@given(st.integers(3, 7), st.integers(0, 2**32 - 1))
def test_delta_matches_triple_loop(n, seed):
    from conftest import random_space

    sp = random_space(np.random.default_rng(seed), n)
    assert delta_certificate(sp, 0) == pytest.approx(brute_delta(sp, 0), abs=1e-12)


def test_cone_hyperbolicity_by_plane_comparison():
    cone = HyperbolicCone(circle(16))
    rng = np.random.default_rng(2)
    pts = [ConePoint(int(z), float(t)) for z, t in zip(rng.integers(0, 16, 60), rng.uniform(0.1, 8, 60))]
    triples = rng.integers(0, 60, size=(5000, 3))
    rep = hyperbolicity_comparison(cone, pts, triples)
    assert rep.passed and rep.per_triple_exceed == 0


def test_level_space_examples():
    cone = HyperbolicCone(circle(12))
    assert level_space(cone, 1e-9).diam < 1e-8
    assert level_space(HyperbolicCone(two_point()), 1.0).dist[0, 1] == pytest.approx(2.0, rel=1e-14)
    L5 = level_space(cone, 5.0)
    A = cone.angles
    for i in range(12):
        for j in range(12):
            assert L5.dist[i, j] == pytest.approx(chord_length(5.0, A[i, j]), rel=1e-12, abs=1e-14)
    with pytest.raises(ValueError):
        level_space(cone, 0.0)


def test_one_point_cone_is_a_ray():
    cone = HyperbolicCone(FiniteMetricSpace(np.zeros((1, 1))))
    assert cone_distance(cone, ConePoint(0, 1.5), ConePoint(0, 4.0)) == 2.5


def test_gromov_product_monotone_along_rays():
    cone = HyperbolicCone(circle(24))
    ts = np.linspace(0.1, 25, 60)
    for w in range(1, 13):
        prods = [t - chord_length(float(t), cone.angle(0, w)) / 2 for t in ts]
        assert np.all(np.diff(prods) >= -1e-12)


def test_visual_examples():
    cone = HyperbolicCone(two_point())
    assert visual_product(cone, 0, 0, 30.0) == SENTINEL
    assert visual_product(cone, 0, 1, 30.0) == pytest.approx(0.0, abs=1e-12)
    assert math.tan(cone.angle(0, 1) / 4) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="increase T"):
        visual_product(HyperbolicCone(circle(64)), 0, 1, 2.0)
    rep = visual_sandwich_check(HyperbolicCone(circle(64)), T=30.0)
    assert rep.passed and rep.pairs == 64 * 63 // 2


def test_rough_embed_examples():
    edge = rough_embed(line(2))
    assert edge.additive_error == 0
    path = rough_embed(line(5))
    assert path.additive_error == pytest.approx(0.0, abs=1e-12)
    for k in (3, 5):
        star = rough_embed(star_tree(k))
        assert star.leaves == list(range(1, k + 1))
        assert star.additive_error == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(TreeError):
        rough_embed(FiniteMetricSpace(np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0.0]])))


@pytest.mark.parametrize("tree", [binary_tree(4), random_tree(50, 3)], ids=["binary4", "random50"])
def test_rough_embed_bounded_error(tree):
    emb = rough_embed(tree)
    assert emb.formula_error == pytest.approx(0.0, abs=1e-9)
    assert math.isfinite(emb.additive_error) and emb.additive_error > 0


def test_branch_root():
    from coarselab.hypcone import branch_root

    assert branch_root(star_tree(3)) == 0
    assert branch_root(line(4)) == 1
    assert branch_root(line(2)) == 0
