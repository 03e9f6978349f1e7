"""Uniform simplicial polyhedra, nerves, barycentric maps and mapping cylinders.

A uniform polyhedron is a simplicial complex sitting inside the standard
simplex of R^J, J its vertex set; points are finitely supported barycentric
coordinate vectors and distances are Euclidean in R^J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .coverings import Covering, CoveringError, is_inscribed, lebesgue, multiplicity

WEIGHT_TOL = 1e-12


class ComplexError(ValueError):
    pass


def _faces(simplex: frozenset):
    items = sorted(simplex, key=repr)
    for k in range(1, len(items) + 1):
        for c in combinations(items, k):
            yield frozenset(c)


def _maximal(simplices) -> list:
    simplices = sorted(set(simplices), key=len, reverse=True)
    out: list = []
    for s in simplices:
        if not any(s < t for t in out):
            out.append(s)
    return out


@dataclass(frozen=True, eq=False)
class UniformComplex:
    vertices: tuple
    maximal_simplices: tuple

    @classmethod
    def from_simplices(cls, simplices: Iterable[Iterable[Hashable]], vertices=()) -> "UniformComplex":
        simplices = [frozenset(s) for s in simplices if s]
        verts = set(vertices)
        for s in simplices:
            verts |= s
        simplices += [frozenset([v]) for v in verts]
        return cls(tuple(sorted(verts, key=repr)), tuple(_maximal(simplices)))

    @cached_property
    def simplices(self) -> frozenset:
        out = set()
        for s in self.maximal_simplices:
            out.update(_faces(s))
        return frozenset(out)

    @property
    def dim(self) -> int:
        return max((len(s) for s in self.maximal_simplices), default=0) - 1

    def contains(self, simplex) -> bool:
        simplex = frozenset(simplex)
        return any(simplex <= s for s in self.maximal_simplices)

    def subcomplex_of(self, other: "UniformComplex") -> bool:
        return all(other.contains(s) for s in self.maximal_simplices)

    def is_full_subcomplex(self, vertices) -> bool:
        vs = frozenset(vertices)
        sub = [s for s in self.simplices if s <= vs]
        return all(self.contains(s) for s in sub)

    def to_json(self) -> dict:
        return {
            "vertices": [str(v) for v in self.vertices],
            "maximal_simplices": sorted(sorted(str(v) for v in s) for s in self.maximal_simplices),
        }


class BaryPoint(Mapping):
    """Finitely supported barycentric coordinates; zero weights are not stored."""

    __slots__ = ("_w",)

    def __init__(self, weights: Mapping):
        w = {k: float(v) for k, v in weights.items() if v > 0}
        if any(v < -WEIGHT_TOL for v in weights.values()):
            raise ComplexError("negative barycentric weight")
        if abs(sum(w.values()) - 1.0) > WEIGHT_TOL * max(1, len(w)) * 10:
            raise ComplexError("weights must sum to 1")
        self._w = w

    def __getitem__(self, k):
        return self._w.get(k, 0.0)

    def __iter__(self):
        return iter(self._w)

    def __len__(self):
        return len(self._w)

    def __repr__(self):
        return f"BaryPoint({self._w!r})"

    @property
    def support(self) -> frozenset:
        return frozenset(self._w)

    @classmethod
    def vertex(cls, v) -> "BaryPoint":
        return cls({v: 1.0})


def euclid(x: Mapping, y: Mapping) -> float:
    keys = set(x) | set(y)
    return math.sqrt(sum((x.get(k, 0.0) - y.get(k, 0.0)) ** 2 for k in keys))


def point_distance(P: UniformComplex, x: BaryPoint, y: BaryPoint) -> float:
    for p in (x, y):
        if not P.contains(p.support):
            raise ComplexError("support outside complex")
    return euclid(x, y)


def lerp(x: Mapping, y: Mapping, s: float) -> BaryPoint:
    keys = set(x) | set(y)
    return BaryPoint({k: (1 - s) * x.get(k, 0.0) + s * y.get(k, 0.0) for k in keys})


# --- nerves and barycentric maps -------------------------------------------


def nerve(cov: Covering) -> UniformComplex:
    """Vertices are member indices; a simplex per nonempty common intersection."""
    cols = {frozenset(np.flatnonzero(cov.mask[:, z]).tolist()) for z in range(cov.space.n)}
    return UniformComplex.from_simplices(cols, vertices=range(len(cov)))


def barycentric_coordinates(cov: Covering) -> np.ndarray:
    """Rows p(z) of the barycentric map, shape (points, members).

    q_j(z) = min(diam Z, dist(z, Z minus U_j)). On a one-point space diam Z is
    zero; there q_j is the indicator of membership.
    """
    if not cov.is_covering():
        raise CoveringError("family is not a covering")
    diam = cov.space.diam
    if diam == 0:
        q = cov.mask.astype(float)
    else:
        q = np.minimum(cov.depth, diam) * cov.mask
    total = q.sum(axis=0)
    if np.any(total <= 0):
        raise RuntimeError("barycentric weights vanish at a covered point")
    return (q / total).T


def barycentric_map(cov: Covering, z: int) -> BaryPoint:
    row = barycentric_coordinates(cov)[z]
    return BaryPoint({j: w for j, w in enumerate(row) if w > 0})


def barycentric_lipschitz_bound(cov: Covering) -> float:
    L = lebesgue(cov)
    m = multiplicity(cov) - 1
    return math.inf if L <= 0 else (m + 2) ** 2 / L


@dataclass
class LipschitzReport:
    measured: float
    bound: float
    worst_pair: tuple | None

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound

    def to_json(self) -> dict:
        return {"measured": self.measured, "bound": self.bound, "passed": self.passed,
                "worst_pair": list(self.worst_pair) if self.worst_pair else None}


def pairwise_ratio(images: np.ndarray, dist: np.ndarray) -> tuple:
    """Max of |f(z) f(z')| / |z z'| over pairs with |z z'| > 0."""
    sq = (images**2).sum(1)
    g = images @ images.T
    d_img = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * g, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dist > 0, d_img / np.where(dist > 0, dist, 1.0), 0.0)
    if r.size == 0:
        return 0.0, None
    k = int(np.argmax(r))
    return float(r.flat[k]), divmod(k, r.shape[1])


def lipschitz_certificate(images, space, bound: float) -> LipschitzReport:
    """Pair-scan Lipschitz constant of a map given by its coordinate rows, or
    by a callable point -> coordinate row."""
    if callable(images):
        images = np.array([images(z) for z in range(space.n)], dtype=float)
    images = np.asarray(images, dtype=float)
    measured, pair = pairwise_ratio(images, space.dist)
    return LipschitzReport(measured, bound, pair if measured > 0 else None)


def simplicial_projection(fine: Covering, coarse: Covering) -> list:
    """Each fine member goes to the lowest-index coarse member containing it."""
    if not is_inscribed(fine.members, coarse.members):
        raise CoveringError("fine covering is not inscribed in coarse covering")
    return [next(j for j, B in enumerate(coarse.members) if A <= B) for A in fine.members]


def push_forward(rho: Sequence | Mapping | Callable, x: Mapping) -> BaryPoint:
    f = rho if callable(rho) else rho.__getitem__
    out: dict = {}
    for v, w in x.items():
        u = f(v)
        out[u] = out.get(u, 0.0) + w
    return BaryPoint(out)


def is_simplicial(rho, K: UniformComplex, L: UniformComplex) -> bool:
    f = rho if callable(rho) else rho.__getitem__
    return all(L.contains({f(v) for v in s}) for s in K.maximal_simplices)


def simplicial_lipschitz_bound(m: int) -> float:
    """Upper bound for the Lipschitz constant of any simplicial map out of a
    uniform complex of dimension <= m.

    The map is the restriction of the linear coordinate-summing map; a
    difference of two points is supported on at most 2(m+1) vertices, so its
    image norm grows by at most sqrt of the largest fiber, sqrt(2(m+1)).
    """
    return math.sqrt(2 * (m + 1))


# --- barycentric subdivision stars ----------------------------------------


@dataclass(frozen=True)
class StarMember:
    """Open star of the barycenter of ``simplex`` in the barycentric subdivision."""

    simplex: frozenset
    color: int

    def contains(self, x: Mapping) -> bool:
        return star_gap(x, self.simplex) > 0


def star_gap(x: Mapping, simplex: frozenset) -> float:
    """min of x over the simplex minus max of x off it (0 for absent vertices)."""
    inside = min(x.get(v, 0.0) for v in simplex)
    outside = max((w for v, w in x.items() if v not in simplex), default=0.0)
    return inside - outside


def colored_star_covering(P: UniformComplex) -> list:
    """The (dim P + 1)-colored covering of P by open stars, colored by dim."""
    return [StarMember(s, len(s) - 1) for s in sorted(P.simplices, key=lambda s: (len(s), sorted(map(repr, s))))]


def star_lebesgue_bound(m: int) -> float:
    """Lower bound l_m for the Lebesgue number of the star covering of an
    m-dimensional uniform polyhedron.

    dist(x, complement of the star of sigma) >= gap_sigma(x)/sqrt(2); sorting
    coordinates y_1 >= ... >= y_{m+1} >= y_{m+2} = 0, the gaps weighted by
    1..m+1 sum to 1, so the largest gap is at least 2/((m+1)(m+2)).
    """
    return math.sqrt(2) / ((m + 1) * (m + 2))


def pullback_star_covering(cov: Covering) -> Covering:
    """Pull the colored star covering of the nerve back through the
    barycentric map of ``cov``."""
    coords = barycentric_coordinates(cov)
    N = nerve(cov)
    members, colors = [], []
    for star in colored_star_covering(N):
        idx = sorted(star.simplex)
        inside = coords[:, idx].min(axis=1)
        rest = coords.copy()
        rest[:, idx] = 0.0
        U = np.flatnonzero(inside - rest.max(axis=1) > 0)
        if len(U):
            members.append(frozenset(U.tolist()))
            colors.append(star.color)
    return Covering(cov.space, tuple(members), tuple(colors))


# --- mapping cylinders ------------------------------------------------------


def staircase(x: Mapping, s: float, order: Callable) -> tuple:
    """Split (x, s) in K x [0,1] into top (level 1) and bottom (level 0) weights
    of the staircase triangulation: low-order vertices fill the top first.

    A vertex whose cumulative mass stays within s moves to the top with its
    exact weight, so s = 0 and s = 1 reproduce x without rounding.
    """
    if not 0 <= s <= 1:
        raise ComplexError("height outside [0, 1]")
    top, bottom = {}, {}
    prev = 0.0
    for v in sorted(x, key=order):
        w = x[v]
        cum = prev + w
        if cum <= s + 1e-12:
            a = w
        elif prev >= s:
            a = 0.0
        else:
            a = s - prev
        prev = cum
        b = w - a
        if a > 0:
            top[v] = a
        if b > 1e-15:
            bottom[v] = b
    return top, bottom


def mapping_cylinder(rho, K: UniformComplex, L: UniformComplex, order: Callable = repr) -> UniformComplex:
    """Simplicial mapping cylinder; vertices are ('K', v) and ('L', w)."""
    if not is_simplicial(rho, K, L):
        raise ComplexError("rho is not simplicial")
    f = rho if callable(rho) else rho.__getitem__
    simplices = [{("K", v) for v in s} for s in K.maximal_simplices]
    simplices += [{("L", w) for w in s} for s in L.maximal_simplices]
    for s in K.maximal_simplices:
        chain = sorted(s, key=order)
        for k in range(len(chain)):
            simplices.append({("K", v) for v in chain[: k + 1]} | {("L", f(v)) for v in chain[k:]})
    return UniformComplex.from_simplices(simplices)


def cylinder_projection(rho, order: Callable = repr) -> Callable:
    """phi: K x [0,1] -> C_rho; level 1 onto K identically, level 0 by rho."""
    f = rho if callable(rho) else rho.__getitem__

    def phi(x: Mapping, s: float) -> BaryPoint:
        top, bottom = staircase(x, s, order)
        out = {("K", v): w for v, w in top.items()}
        for v, w in bottom.items():
            key = ("L", f(v))
            out[key] = out.get(key, 0.0) + w
        return BaryPoint(out)

    return phi


def _dirichlet_on_support(rng, verts: int, m: int, size: int) -> np.ndarray:
    out = np.zeros((size, verts))
    for i in range(size):
        k = rng.integers(1, m + 2)
        supp = rng.choice(verts, size=k, replace=False)
        out[i, supp] = rng.dirichlet(np.ones(k))
    return out


def cylinder_lipschitz_oracle(m: int, samples: int = 4000, seed: int = 0) -> float:
    """Sampled Lipschitz constant of phi o staircase on pairs of points of
    m-dimensional faces of a (2m+1)-simplex times [0,1], under random vertex
    maps; product metric on the source."""
    rng = np.random.default_rng(seed)
    V = 2 * (m + 1)
    best = 0.0
    order = int
    for _ in range(8):
        rho = rng.integers(0, V, size=V).tolist()
        phi = cylinder_projection(rho, order)
        xs = _dirichlet_on_support(rng, V, m, samples)
        ss = rng.random(samples)
        # near pairs probe the local constant, far pairs the global one
        pert = xs + rng.normal(scale=1e-3, size=xs.shape) * (xs > 0)
        pert = np.clip(pert, 0, None)
        pert /= pert.sum(1, keepdims=True)
        ss2 = np.clip(ss + rng.normal(scale=1e-3, size=samples), 0, 1)
        partner = np.where(rng.random(samples)[:, None] < 0.5, pert, xs[rng.permutation(samples)])
        for i in range(samples):
            x = {j: w for j, w in enumerate(xs[i]) if w > 0}
            y = {j: w for j, w in enumerate(partner[i]) if w > 0}
            src = math.hypot(euclid(x, y), ss[i] - ss2[i])
            if src < 1e-12:
                continue
            best = max(best, euclid(phi(x, ss[i]), phi(y, ss2[i])) / src)
    return best
