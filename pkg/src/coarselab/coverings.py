"""Coverings of finite metric spaces and their invariants.

Members are frozensets of point indices. Every subset of a finite space is
open, so the open/closed distinction only survives in the strict versus
non-strict comparisons of :func:`coarselab.metric.neighborhood`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .metric import FiniteMetricSpace, as_pointset, diameter, neighborhood


class CoveringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Covering:
    space: FiniteMetricSpace
    members: tuple
    colors: Optional[tuple] = None
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(as_pointset(m) for m in self.members))
        if self.colors is not None:
            colors = tuple(int(c) for c in self.colors)
            if len(colors) != len(self.members):
                raise CoveringError("one color per member required")
            object.__setattr__(self, "colors", colors)
        n = self.space.n
        for m in self.members:
            if any(p < 0 or p >= n for p in m):
                raise CoveringError("member index out of range")

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean incidence matrix, shape (members, points)."""
        m = np.zeros((len(self.members), self.space.n), dtype=bool)
        for j, U in enumerate(self.members):
            m[j, list(U)] = True
        return m

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.array([diameter(self.space, U) for U in self.members])

    @cached_property
    def depth(self) -> np.ndarray:
        """dist(z, Z minus U_j) with dist(z, empty) := diam Z, shape (members, points)."""
        d = self.space.dist
        out = np.empty((len(self.members), self.space.n))
        for j in range(len(self.members)):
            comp = ~self.mask[j]
            out[j] = d[:, comp].min(axis=1) if comp.any() else self.space.diam
        return out

    def is_covering(self) -> bool:
        return bool(self.mask.any(axis=0).all()) if self.space.n else True

    def is_properly_colored(self) -> bool:
        if self.colors is None:
            return False
        for (i, U), (j, V) in combinations(enumerate(self.members), 2):
            if self.colors[i] == self.colors[j] and U & V:
                return False
        return True

    def color_classes(self) -> dict:
        out: dict = {}
        for U, c in zip(self.members, self.colors or [0] * len(self)):
            out.setdefault(c, []).append(U)
        return out

    def with_members(self, members, colors=None, dropped=0) -> "Covering":
        return Covering(self.space, tuple(members), colors, dropped)

    def to_json(self) -> dict:
        return {
            "members": [sorted(U) for U in self.members],
            "colors": list(self.colors) if self.colors is not None else None,
        }

    @classmethod
    def from_json(cls, space: FiniteMetricSpace, data: dict) -> "Covering":
        return cls(space, tuple(data["members"]), data.get("colors"))


def _require_covering(cov: Covering) -> None:
    if not cov.is_covering():
        raise CoveringError("family is not a covering")


def mesh(cov: Covering) -> float:
    return float(cov.diameters.max()) if len(cov) else 0.0


def mesh_at(cov: Covering, z: int) -> float:
    inside = cov.mask[:, z]
    if not inside.any():
        raise CoveringError("point not covered")
    return float(cov.diameters[inside].max())


def _mesh_at_all(cov: Covering) -> np.ndarray:
    return np.where(cov.mask, cov.diameters[:, None], -np.inf).max(axis=0)


def _lebesgue_all(cov: Covering) -> np.ndarray:
    _require_covering(cov)
    return np.minimum(cov.depth.max(axis=0), _mesh_at_all(cov))


def lebesgue_at(cov: Covering, z: int) -> float:
    _require_covering(cov)
    return float(min(cov.depth[:, z].max(), mesh_at(cov, z)))


def lebesgue(cov: Covering) -> float:
    return float(_lebesgue_all(cov).min())


def multiplicity(cov: Covering) -> int:
    if not len(cov):
        return 0
    return int(cov.mask.sum(axis=0).max())


def family_multiplicity(space: FiniteMetricSpace, family) -> int:
    if not family:
        return 0
    counts = np.zeros(space.n, dtype=int)
    for U in family:
        counts[list(U)] += 1
    return int(counts.max())


def fatten(cov: Covering, r: float) -> Covering:
    return cov.with_members([neighborhood(cov.space, U, r) for U in cov.members], cov.colors)


def r_multiplicity(cov: Covering, r: float) -> int:
    return multiplicity(fatten(cov, r))


def capacity(cov: Covering) -> float:
    m = mesh(cov)
    if m == 0:
        return 1.0
    return lebesgue(cov) / m


def local_capacity(cov: Covering) -> float:
    L = _lebesgue_all(cov)
    M = _mesh_at_all(cov)
    ratio = np.where(M > 0, L / np.where(M > 0, M, 1.0), 1.0)
    return float(ratio.min())


def shrink(cov: Covering, s: float) -> Covering:
    """Member-wise B_{-s}; empty members are dropped and counted."""
    if not 0 < s < lebesgue(cov):
        raise CoveringError("shrink exceeds Lebesgue number")
    members, colors, dropped = [], [], 0
    for j, U in enumerate(cov.members):
        V = neighborhood(cov.space, U, -s)
        if not V:
            dropped += 1
            continue
        members.append(V)
        if cov.colors is not None:
            colors.append(cov.colors[j])
    return cov.with_members(members, colors if cov.colors is not None else None, dropped)


def shrink_family(space: FiniteMetricSpace, family, s: float) -> list:
    """B_{-s} applied member-wise with no Lebesgue precondition; keeps empties."""
    return [neighborhood(space, U, -s) for U in family]


def star_merge(U: Sequence, W: Sequence) -> list:
    out = []
    for A in U:
        A = as_pointset(A)
        V = set(A)
        for B in W:
            if A & B:
                V |= B
        out.append(frozenset(V))
    return out


def is_separated(family) -> bool:
    fam = [as_pointset(U) for U in family]
    for A, B in combinations(fam, 2):
        if A & B and not (A <= B or B <= A):
            return False
    return True


def is_inscribed(fine, coarse) -> bool:
    coarse = [as_pointset(U) for U in coarse]
    return all(any(as_pointset(A) <= B for B in coarse) for A in fine)


def is_balanced(cov: Covering, c: float) -> bool:
    if not len(cov):
        return True
    return bool(cov.diameters.min() >= c * mesh(cov))


def balance_constant(cov: Covering) -> float:
    m = mesh(cov)
    return 1.0 if m == 0 else float(cov.diameters.min() / m)


def invariants_report(cov: Covering) -> dict:
    return {
        "members": len(cov),
        "mesh": mesh(cov),
        "lebesgue": lebesgue(cov),
        "multiplicity": multiplicity(cov),
        "capacity": capacity(cov),
        "local_capacity": local_capacity(cov),
        "separated": is_separated(cov.members),
        "colored": cov.is_properly_colored(),
        "colors": len(set(cov.colors)) if cov.colors is not None else None,
    }
