import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarselab.coverings import Covering
from coarselab.fixtures import circle
from coarselab.hypcone import HyperbolicCone
from coarselab.metric import FiniteMetricSpace
from coarselab.witness import (
    APEX,
    ExtendSchedule,
    ScheduleError,
    Witness,
    auto_chain,
    build_schedule,
    certify,
    cosh_lower_bound_gap,
    level_barycentric,
    level_radii,
    run_witness,
    schedule_constants,
    singleton_covering,
    smallest_certifiable_lambda,
)


def test_schedule_constants_examples():
    d, sigma = schedule_constants(0.5, 1)
    assert d == 9 and sigma == pytest.approx(math.exp(-9), rel=1e-15)
    d, sigma = schedule_constants(4.5, 1)
    assert d == 1 and sigma == pytest.approx(0.36787944117144233, rel=1e-15)
    tau, t = level_radii(4.5, 1, 1.0, 3)
    assert t[0] == pytest.approx(math.log(2) + 4, rel=1e-15)
    with pytest.raises(ValueError):
        schedule_constants(0.0, 1)


@given(st.floats(1.0, 50), st.integers(0, 4), st.floats(1e-3, 10), st.integers(1, 8))
def test_schedule_identities(lam, m, tau0, K):
    d, sigma = schedule_constants(lam, m)
    assert d == pytest.approx((m + 2) ** 2 / lam + math.log(sigma), rel=1e-12)
    tau, t = level_radii(lam, m, tau0, K)
    assert np.allclose(np.diff(t), 2 * d, rtol=1e-12)
    assert np.allclose(tau[1:] / tau[:-1], math.exp(-2 * d), rtol=1e-12)


@pytest.fixture(scope="module")
def circle_witness():
    space = circle(64)
    cone = HyperbolicCone(space)
    covs, sat, tau0 = auto_chain(space, 1, 4.5, 4)
    sch = build_schedule(4.5, 1, covs, cone.mu, tau0=tau0, saturated=sat)
    return Witness(cone, sch)


def test_schedule_windows_hold(circle_witness):
    sch = circle_witness.sch
    assert sch.c0 * sch.delta == pytest.approx(sch.sigma, rel=1e-12) and sch.delta <= 1
    for k in range(sch.K + 1):
        if not sch.saturated[k]:
            M = sch.mu * max(sch.coverings[k].diameters)
            assert sch.delta * sch.tau[k] * (1 - 1e-12) <= M <= sch.tau[k] * (1 + 1e-12)


def test_schedule_errors_name_clause(circle_witness):
    sch = circle_witness.sch
    covs, mu = list(sch.coverings), sch.mu
    space = covs[0].space
    # two real levels with equal mesh cannot both sit in windows a factor e^-2d apart
    with pytest.raises(ScheduleError) as e:
        build_schedule(0.5, 1, [covs[0], covs[0]], mu, saturated=[False, False])
    assert e.value.clause == "ii"
    triple = Covering(space, tuple(frozenset(range(64)) for _ in range(3)))
    with pytest.raises(ScheduleError) as e:
        build_schedule(4.5, 1, [triple] + covs[1:], mu, saturated=sch.saturated)
    assert e.value.clause == "i" and e.value.level == 0
    coarse = Covering(space, (frozenset(range(40)), frozenset(range(30, 64))))
    with pytest.raises(ScheduleError) as e:
        build_schedule(4.5, 1, [singleton_covering(space), coarse], mu, saturated=[False, False])
    assert e.value.clause == "iii" and e.value.level == 1


def test_smallest_certifiable_lambda(circle_witness):
    sch = circle_witness.sch
    grid = np.array([0.5, 1.0, 2.0, 3.0, 4.5, 9.0])
    lam = smallest_certifiable_lambda(1, sch.coverings, sch.mu, sch.saturated, grid)
    assert lam is not None and lam <= 4.5
    build_schedule(lam, 1, sch.coverings, sch.mu, saturated=sch.saturated)
    smaller = grid[grid < lam]
    for bad in smaller:
        with pytest.raises(ScheduleError):
            build_schedule(float(bad), 1, sch.coverings, sch.mu, saturated=sch.saturated)


def test_level_barycentric(circle_witness):
    w = circle_witness
    sch = w.sch
    lm = level_barycentric(w.cone, sch, 0, float(sch.t[0]))
    assert lm.passed and lm.lip < 4.5
    with pytest.raises(ValueError, match="outside band"):
        level_barycentric(w.cone, sch, 1, float(sch.t[1]) + 0.5)
    for k in range(sch.K + 1):
        if not sch.saturated[k]:
            assert cosh_lower_bound_gap(sch, k, float(sch.t[k])) >= -1e-12


def test_single_member_level_is_constant():
    space = circle(16)
    cone = HyperbolicCone(space)
    whole = Covering(space, (frozenset(range(16)),))
    sch = build_schedule(4.5, 1, [whole, singleton_covering(space)], cone.mu, saturated=[False, True])
    lm = level_barycentric(cone, sch, 0, float(sch.t[0]))
    assert lm.lip == 0


def test_homotopy_and_leg_endpoints(circle_witness):
    w = circle_witness
    sch = w.sch
    for k in range(sch.K):
        for z in (0, 17, 40):
            x, s = w.homotopy_map(k, z, float(sch.t[k]))
            assert s == 0 and x == w.bary[k][z]
            x1, s1 = w.homotopy_map(k, z, float(sch.mid[k]))
            assert s1 == 1
            # seam A_k / B_k
            assert w.prism_point(k, x1, 1.0) == w.cylinder_leg(k, z, float(sch.mid[k]))
            # the leg ends on the copy of the next nerve
            end = w.cylinder_leg(k, z, float(sch.t[k + 1]))
            assert end == w.prism_point(k + 1, w.bary[k + 1][z], 0.0) if k + 1 < sch.K else True
            assert all(key[0] == k + 1 and key[2] == 0 for key in end.support)
    with pytest.raises(ValueError):
        w.homotopy_map(0, 0, float(sch.t[1]))


def test_f_at_vertex_and_range(circle_witness):
    w = circle_witness
    for z in range(0, 64, 9):
        assert w.f(z, 0.0) == w.f(0, 0.0)
    assert w.f(0, 0.0).support == {APEX}
    with pytest.raises(ExtendSchedule):
        w.f(0, float(w.sch.t[-1]) + 1.0)


def test_seams_and_dimension(circle_witness):
    w = circle_witness
    rep = w.seam_report()
    assert max(rep.values()) == 0.0
    assert w.P.dim <= w.sch.m + 1


def test_broken_projection_is_detected(circle_witness):
    w = circle_witness
    saved = w.rho[0]
    try:
        w.rho[0] = [0] * len(saved)
        with pytest.raises(ValueError, match="share no simplex"):
            w._check_shared_simplices()
    finally:
        w.rho[0] = saved


def test_certify_circle64(circle_witness):
    rep = certify(circle_witness, seed=0, cross_pairs=2000)
    assert rep.passed, rep.failures()
    assert rep.dim == 2 and rep.lip_measured <= rep.lip_bound
    assert rep.cobound_max <= rep.cobound_bound or rep.cone_preimage_max <= rep.cone_bound
    js = rep.to_json()
    for key in ("dim", "lip_measured", "lambda", "cobound_max", "range_t", "per_level"):
        assert key in js
    assert js["range_t"] == pytest.approx(float(circle_witness.sch.t[-1]))


def test_one_point_base_is_a_ray():
    pt = FiniteMetricSpace(np.zeros((1, 1)))
    rep = run_witness(pt, 1, 4.5, K=3, cross_pairs=200)
    assert rep.dim == 1 and rep.lip_measured <= 4.5 and rep.passed
