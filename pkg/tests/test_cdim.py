import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarselab.cdim import (
    ScaleWindow,
    SequenceError,
    check_sequence_properties,
    color_members,
    colored_covering,
    estimate_cdim,
    exact_min_s_multiplicity,
    net_covering,
    plateau,
    separated_sequence,
    validate_base,
)
from coarselab.coverings import Covering, capacity, fatten, is_separated, mesh, multiplicity
from coarselab.fixtures import cantor, circle
from coarselab.metric import FiniteMetricSpace

import oracles
from conftest import line


def test_window_validation():
    with pytest.raises(ValueError):
        ScaleWindow(0.5, 0.1)
    with pytest.raises(ValueError):
        ScaleWindow(0.0, 1.0)
    with pytest.raises(ValueError):
        ScaleWindow(0.1, 10.0).validate(circle(8))
    w = ScaleWindow(0.25, 1.0, 3)
    assert np.allclose(w.grid(), [0.25, 0.5, 1.0])
    assert np.allclose(w.powered(0.5).grid(), [0.5, 0.5**0.5, 1.0])


def test_net_covering_circle64():
    space = circle(64)
    s = math.pi / 16
    res = net_covering(space, s)
    assert res.c <= 6 and mesh(res.covering) <= res.c * s * (1 + 1e-12)
    assert oracles.multiplicity([set(U) for U in fatten(res.covering, s).members], space.n) == res.s_multiplicity == 2
    assert res.bound_holds


def test_net_covering_one_point():
    res = net_covering(FiniteMetricSpace(np.zeros((1, 1))), 0.3)
    assert len(res.covering) == 1 and res.s_multiplicity == 1


def test_net_covering_integer_line():
    L = line(16)
    # open s-balls: at s = 1 the singletons already have s-multiplicity 1
    assert net_covering(L, 1.0).s_multiplicity == 1
    res = net_covering(L, 1.5)
    blocks = [sorted(U) for U in res.covering.members]
    assert all(b == list(range(b[0], b[-1] + 1)) for b in blocks)  # intervals
    assert max(b[-1] - b[0] for b in blocks) <= res.c * 1.5
    assert res.s_multiplicity == 2
    # no covering of the line by c*s-bounded sets has s-multiplicity 1 once s > 1
    assert exact_min_s_multiplicity(L.subspace(range(10)), 1.5, 3.0)[0] == 2


@given(st.integers(4, 9), st.floats(0.6, 2.5))
def test_exact_search_matches_brute_force(n, s):
    # tiny lines: enumerate every set partition
    space = line(n)
    D = space.dist.tolist()
    c = 2.0
    em, members, complete = exact_min_s_multiplicity(space, s, c)
    assert complete

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for p in partitions(rest):
            for i in range(len(p)):
                yield p[:i] + [[first] + p[i]] + p[i + 1:]
            yield [[first]] + p

    best = math.inf
    if n <= 7:
        for p in partitions(list(range(n))):
            if all(oracles.diam(D, b) <= c * s for b in p):
                fat = [oracles.fatten(D, set(b), s) for b in p]
                best = min(best, oracles.multiplicity(fat, n))
        assert em == best
    fat = [oracles.fatten(D, set(b), s) for b in members]
    assert oracles.multiplicity(fat, n) == em


def test_capacity_bound_on_every_cell():
    rep = estimate_cdim(circle(64), ScaleWindow(math.pi / 32, math.pi / 4, 5))
    assert rep.records
    assert all(r.capacity >= r.capacity_bound - 1e-12 or r.multiplicity > 2 for r in rep.records)


def test_colored_covering_examples():
    res = colored_covering(circle(64), math.pi / 8, 1, 0.25)
    assert res.ok and len(set(res.covering.colors)) <= 2 and res.covering.is_properly_colored()
    assert 0.25 * math.pi / 8 <= res.mesh <= math.pi / 8 and res.capacity >= 0.2
    two = FiniteMetricSpace(np.array([[0.0, 1.0], [1.0, 0.0]]))
    res = colored_covering(two, 1.0, 0, 0.25)
    assert res.ok and res.colors_needed == 1
    assert sorted(map(sorted, res.covering.members)) in ([[0, 1]], [[0], [1]])
    res = colored_covering(cantor(7), 3.0**-3, 0, 0.25)
    assert res.ok and res.colors_needed == 1 and res.capacity >= 1 / 3


def test_colored_covering_reports_obstruction():
    # a mesh window no candidate reaches gives a structured failure
    res = colored_covering(line(6), 2.5, 0, 0.99)
    assert not res.ok and res.covering is None and res.reason
    # the intersection graph of three pairwise-overlapping sets needs 3 colors
    tri = Covering(line(3), (frozenset({0, 1}), frozenset({1, 2}), frozenset({0, 2})))
    assert color_members(tri, 2) == (None, 3)
    assert color_members(tri, 3)[1] == 3


def test_estimate_examples():
    assert estimate_cdim(FiniteMetricSpace(np.zeros((1, 1))), ScaleWindow(0.1, 1.0)).estimate == 0
    rep = estimate_cdim(cantor(5), ScaleWindow(3.0**-4, 3.0**-1, 5))
    assert rep.estimate == 0
    rep = estimate_cdim(circle(128), ScaleWindow(2**-5 * math.pi, 2**-2 * math.pi, 5))
    assert rep.estimate == 1
    assert rep.to_csv().splitlines()[0].startswith("s,c,")


def test_plateau_rule():
    assert plateau([2, 2, 2, 1]) == 2
    assert plateau([2, 2, 1, 1]) is None
    assert plateau([]) is None


@pytest.mark.parametrize("fx", ["circle", "cantor"])
def test_monotone_under_subsets(fx):
    rng = np.random.default_rng(3)
    if fx == "circle":
        space, window = circle(96), ScaleWindow(math.pi / 32, math.pi / 8, 5)
    else:
        space, window = cantor(5), ScaleWindow(3.0**-4, 3.0**-1, 5)
    whole = estimate_cdim(space, window).estimate
    idx = np.sort(rng.choice(space.n, size=space.n * 3 // 4, replace=False))
    part = estimate_cdim(space.subspace(idx), window).estimate
    assert whole is not None and part is not None and part <= whole


# --- separated sequences ------------------------------------------------------


def _arcs(n, width, shift, colors):
    return [(frozenset((i * shift + k) % n for k in range(width)), i % colors) for i in range(n // shift)]


def three_level_circle(r=0.1):
    # 330 points on a circle of length 0.33: level 1 arcs of 101 points every 10,
    # level 2 arcs of 11 points every 1, level 3 consecutive pairs; 11 colors
    n = 330
    space = circle(n).scaled(0.33 / (2 * math.pi))
    base = []
    for width, shift in ((101, 10), (11, 1), (2, 1)):
        arcs = _arcs(n, width, shift, 11)
        base.append(Covering(space, tuple(a for a, _ in arcs), tuple(c for _, c in arcs)))
    return space, base


@pytest.fixture(scope="module")
def circle_sequence():
    space, base = three_level_circle()
    return space, base, separated_sequence(space, 0.1, base)


def test_three_level_base_is_valid(circle_sequence):
    space, base, seq = circle_sequence
    c0, delta = validate_base(base, 0.1, m=10)
    assert c0 == pytest.approx(0.46, abs=1e-9) and delta == pytest.approx(1.0, abs=1e-9)
    assert c0 * delta / 4 > 0.1


def test_separated_sequence_properties(circle_sequence):
    space, base, seq = circle_sequence
    props = seq.check()
    assert all(props.values()), props
    assert seq.c0 == seq.delta == pytest.approx(0.23, abs=1e-9)
    for j, U in enumerate(seq.coverings, start=1):
        me = mesh(U)
        assert seq.delta * 0.1**j * (1 - 1e-9) <= me <= 0.1**j * (1 + 1e-9)
    # brute force: per color, all sets across levels are pairwise disjoint or nested
    by_color = {}
    for U in seq.coverings:
        for V, c in zip(U.members, U.colors):
            by_color.setdefault(c, []).append(V)
    for fam in by_color.values():
        assert oracles.separated(fam)
    for j in range(1, len(seq.coverings)):
        for V in seq.coverings[j].members:
            assert any(V <= W for W in seq.coverings[j - 1].members)


def test_trivial_base():
    r = 0.1
    space = line(4).scaled(r / 3)
    base = [Covering(space, (frozenset(range(4)),), (0,))]
    seq = separated_sequence(space, r, base)
    assert [sorted(V) for V in seq.coverings[0].members] == [[0, 1, 2, 3]]
    assert all(seq.check().values())


def test_base_errors_name_clause():
    space, base = three_level_circle()
    with pytest.raises(SequenceError) as e:
        validate_base(base[::-1], 0.1)
    assert e.value.clause == "ii"
    bad = Covering(space, base[0].members, (0,) * len(base[0]))
    with pytest.raises(SequenceError) as e:
        validate_base([bad] + base[1:], 0.1)
    assert e.value.clause == "i" and e.value.level == 1
    with pytest.raises(SequenceError) as e:
        validate_base(base, 0.2)
    assert e.value.clause in ("ii", "r")
