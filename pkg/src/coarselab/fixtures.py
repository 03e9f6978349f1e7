"""Model spaces for tests and the command line, seeded by a portable generator.

Fixture strings:

    circle:n                 geodesic circle of circumference 2 pi
    cantor:level[:ratio]     middle-interval Cantor set, ratio 1/3 by default
    sphere-sample:n          n random points on the unit 2-sphere, angle metric
    tree:star3|starK         K legs of length 1
    tree:binary:depth        complete binary tree, unit edges
    tree:random:n            random recursive tree, edge lengths in {1, 2, 3}
    snowflake-of:p:<inner>   inner fixture with distances raised to p
    file:path                JSON file written by FiniteMetricSpace.save
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .metric import FiniteMetricSpace, MetricError

MASK64 = (1 << 64) - 1


class FixtureError(ValueError):
    pass


class SplitMix64:
    """64-bit splitmix generator; identical streams on every platform."""

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def integers(self, lo: int, hi: int) -> int:
        """Uniform on [lo, hi) by rejection."""
        span = hi - lo
        if span <= 0:
            raise ValueError("empty range")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span

    def normal(self) -> float:
        u = 1.0 - self.random()
        return math.sqrt(-2 * math.log(u)) * math.cos(2 * math.pi * self.random())


def circle(n: int) -> FiniteMetricSpace:
    if n < 1:
        raise FixtureError("circle needs n >= 1")
    k = np.arange(n)
    d = np.abs(k[:, None] - k[None, :])
    return FiniteMetricSpace(np.minimum(d, n - d) * (2 * np.pi / n), validate=False)


def cantor_points(level: int, ratio: float = 1 / 3) -> np.ndarray:
    if level < 0 or not 0 < ratio < 0.5:
        raise FixtureError("cantor needs level >= 0 and 0 < ratio < 1/2")
    pts = np.zeros(1)
    for i in range(level):
        pts = np.concatenate([pts, pts + (1 - ratio) * ratio**i])
    return np.sort(pts)


def cantor(level: int, ratio: float = 1 / 3) -> FiniteMetricSpace:
    pts = cantor_points(level, ratio)
    return FiniteMetricSpace(np.abs(pts[:, None] - pts[None, :]), validate=False)


def sphere_sample(n: int, seed: int = 0) -> FiniteMetricSpace:
    rng = SplitMix64(seed)
    x = np.array([[rng.normal() for _ in range(3)] for _ in range(n)])
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    d = np.arccos(np.clip(x @ x.T, -1.0, 1.0))
    np.fill_diagonal(d, 0.0)
    return FiniteMetricSpace(0.5 * (d + d.T), validate=False)


def tree_space(edges, n: int) -> FiniteMetricSpace:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_weighted_edges_from(edges)
    if not nx.is_tree(g):
        raise FixtureError("edges do not form a tree")
    lengths = dict(nx.all_pairs_dijkstra_path_length(g))
    d = np.array([[lengths[i][j] for j in range(n)] for i in range(n)], dtype=float)
    return FiniteMetricSpace(d, validate=False)


def star_tree(legs: int) -> FiniteMetricSpace:
    return tree_space([(0, i, 1.0) for i in range(1, legs + 1)], legs + 1)


def binary_tree(depth: int) -> FiniteMetricSpace:
    n = 2 ** (depth + 1) - 1
    return tree_space([(i, (i - 1) // 2, 1.0) for i in range(1, n)], n)


def random_tree(n: int, seed: int = 0) -> FiniteMetricSpace:
    rng = SplitMix64(seed)
    return tree_space([(i, rng.integers(0, i), float(rng.integers(1, 4))) for i in range(1, n)], n)


def snowflake_space(space: FiniteMetricSpace, p: float) -> FiniteMetricSpace:
    if not 0 < p <= 1:
        raise FixtureError("snowflake exponent must lie in (0, 1]")
    return FiniteMetricSpace(space.dist**p, validate=False)


@dataclass(frozen=True)
class Fixture:
    kind: str
    params: tuple
    seed: int = 0

    def generate(self) -> FiniteMetricSpace:
        return generate(self)


def parse_fixture(text: str, seed: int = 0) -> Fixture:
    kind, _, rest = text.partition(":")
    if kind == "snowflake-of":
        p, _, inner = rest.partition(":")
        return Fixture(kind, (p, inner), seed)
    return Fixture(kind, tuple(rest.split(":")) if rest else (), seed)


def _int(s, name):
    try:
        return int(s)
    except (TypeError, ValueError):
        raise FixtureError(f"{name} must be an integer, got {s!r}") from None


def _float(s, name):
    try:
        if "/" in str(s):
            a, b = str(s).split("/")
            return float(a) / float(b)
        return float(s)
    except (TypeError, ValueError, ZeroDivisionError):
        raise FixtureError(f"{name} must be a number, got {s!r}") from None


def generate(fx: Fixture | str, seed: int = 0) -> FiniteMetricSpace:
    if isinstance(fx, str):
        fx = parse_fixture(fx, seed)
    k, p = fx.kind, fx.params
    if k == "circle" and len(p) == 1:
        return circle(_int(p[0], "n"))
    if k == "cantor" and 1 <= len(p) <= 2:
        return cantor(_int(p[0], "level"), _float(p[1], "ratio") if len(p) == 2 else 1 / 3)
    if k == "sphere-sample" and len(p) == 1:
        return sphere_sample(_int(p[0], "n"), fx.seed)
    if k == "tree" and p:
        if p[0].startswith("star"):
            return star_tree(_int(p[0][4:] or 3, "legs"))
        if p[0] == "binary" and len(p) == 2:
            return binary_tree(_int(p[1], "depth"))
        if p[0] == "random" and len(p) == 2:
            return random_tree(_int(p[1], "n"), fx.seed)
    if k == "snowflake-of" and len(p) == 2:
        return snowflake_space(generate(parse_fixture(p[1], fx.seed)), _float(p[0], "p"))
    if k == "file" and len(p) >= 1:
        try:
            return FiniteMetricSpace.load(":".join(p))
        except OSError as e:
            raise
        except (MetricError, KeyError, ValueError) as e:
            raise FixtureError(f"bad space file: {e}") from e
    raise FixtureError(f"unknown fixture {':'.join((k,) + tuple(p))!r}")
