"""Finite metric spaces, point sets, set distances and signed neighborhoods."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

TRIANGLE_TOL = 1e-9

PointSet = frozenset


class MetricError(ValueError):
    pass


def as_pointset(points: Iterable[int]) -> frozenset:
    return frozenset(int(p) for p in points)


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """n points with a symmetric distance matrix.

    Construction validates zero diagonal, symmetry, nonnegativity and the
    triangle inequality (absolute tolerance ``TRIANGLE_TOL``).
    """

    dist: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError("distance matrix must be square")
        if self.validate:
            _check_metric(d)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diam(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    @property
    def points(self) -> frozenset:
        return frozenset(range(self.n))

    def subspace(self, idx: Iterable[int]) -> "FiniteMetricSpace":
        idx = sorted(as_pointset(idx))
        return FiniteMetricSpace(self.dist[np.ix_(idx, idx)], validate=False)

    def scaled(self, lam: float) -> "FiniteMetricSpace":
        if lam <= 0:
            raise MetricError("scale factor must be positive")
        return FiniteMetricSpace(self.dist * lam, validate=False)

    def to_json(self) -> dict:
        return {"n": self.n, "dist": self.dist.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteMetricSpace":
        if "dist" not in data and isinstance(data.get("space"), dict):
            data = data["space"]  # a generate report
        if "dist" not in data or "n" not in data:
            raise MetricError("space JSON needs n and dist")
        d = np.asarray(data["dist"], dtype=float)
        if d.shape != (data["n"], data["n"]):
            raise MetricError("dist shape does not match n")
        return cls(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "FiniteMetricSpace":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_metric(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)):
        raise MetricError("distances must be finite")
    if np.any(d < 0):
        raise MetricError("distances must be nonnegative")
    if np.any(np.diag(d) != 0):
        raise MetricError("diagonal must be zero")
    if not np.allclose(d, d.T, rtol=0, atol=0):
        raise MetricError("distance matrix is not symmetric")
    n = d.shape[0]
    # d[i,k] <= d[i,j] + d[j,k], one pivot j at a time
    for j in range(n):
        if np.any(d > d[:, j][:, None] + d[j, :][None, :] + TRIANGLE_TOL):
            raise MetricError(f"triangle inequality violated through point {j}")


def from_points(coords: np.ndarray) -> FiniteMetricSpace:
    """Euclidean distance matrix of a point cloud."""
    x = np.asarray(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    return FiniteMetricSpace(d, validate=False)


def set_distance(space: FiniteMetricSpace, U, V) -> float:
    U, V = sorted(as_pointset(U)), sorted(as_pointset(V))
    if not U or not V:
        raise MetricError("empty set distance undefined")
    return float(space.dist[np.ix_(U, V)].min())


def distance_to_set(space: FiniteMetricSpace, U) -> np.ndarray:
    """dist(z, U) for every point z; +inf where U is empty."""
    U = sorted(as_pointset(U))
    if not U:
        return np.full(space.n, np.inf)
    return space.dist[:, U].min(axis=1)


def neighborhood(space: FiniteMetricSpace, U, r: float) -> frozenset:
    """Open r-neighborhood for r > 0, U for r = 0, and for r < 0 the
    complement of the closed |r|-neighborhood of the complement."""
    U = as_pointset(U)
    if r == 0:
        return U
    if r > 0:
        return frozenset(np.flatnonzero(distance_to_set(space, U) < r).tolist())
    comp = space.points - U
    closed = distance_to_set(space, comp) <= -r
    return frozenset(np.flatnonzero(~closed).tolist())


def diameter(space: FiniteMetricSpace, U) -> float:
    U = sorted(as_pointset(U))
    if len(U) < 2:
        return 0.0
    return float(space.dist[np.ix_(U, U)].max())
