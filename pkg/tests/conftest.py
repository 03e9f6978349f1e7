import numpy as np
import pytest
from hypothesis import settings, strategies as st

from coarselab.coverings import Covering
from coarselab.metric import FiniteMetricSpace, from_points

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def line(n=4):
    k = np.arange(n, dtype=float)
    return FiniteMetricSpace(np.abs(k[:, None] - k[None, :]))


@pytest.fixture
def line4():
    return line(4)


@pytest.fixture
def running_example(line4):
    return Covering(line4, ({0, 1}, {1, 2, 3}))


def random_space(rng, n, dim=2):
    return from_points(rng.random((n, dim)))


def random_covering(rng, space, members=None):
    """Random members, then patch uncovered points into a random member."""
    n = space.n
    k = members or int(rng.integers(1, n + 1))
    mask = rng.random((k, n)) < rng.uniform(0.1, 0.6)
    for z in range(n):
        if not mask[:, z].any():
            mask[rng.integers(0, k), z] = True
    return Covering(space, tuple(frozenset(np.flatnonzero(row).tolist()) for row in mask if row.any()))


@st.composite
def spaces(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_space(np.random.default_rng(seed), n)


@st.composite
def coverings(draw, min_n=2, max_n=10):
    space = draw(spaces(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_covering(np.random.default_rng(seed), space)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
