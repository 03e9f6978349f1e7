"""Hyperbolic cones over finite metric spaces.

Two cone points (z, t), (z', t') are placed in the hyperbolic plane at
distances t, t' from a base point with angle mu * |zz'| between them,
mu = pi / diam Z. Distances use the half-angle form

    sinh^2(d/2) = sinh^2((t - t')/2) + sinh(t) sinh(t') sin^2(alpha/2),

which has no cancellation at small angles, and switch to logarithms once
t + t' exceeds LOG_SWITCH.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .metric import FiniteMetricSpace, MetricError

LOG_SWITCH = 40.0
SENTINEL = 1e300
LN2 = math.log(2.0)


class ConePoint(NamedTuple):
    z: int
    t: float


@dataclass(frozen=True, eq=False)
class HyperbolicCone:
    base: FiniteMetricSpace

    @property
    def mu(self) -> float:
        """Angle scale; 0 on a one-point base, where the cone is a ray."""
        d = self.base.diam
        return math.pi / d if d > 0 else 0.0

    @property
    def angles(self) -> np.ndarray:
        return np.clip(self.mu * self.base.dist, 0.0, math.pi)

    def angle(self, z: int, w: int) -> float:
        return float(self.angles[z, w])


def log_sinh(u):
    """ln sinh u for u >= 0 (-inf at 0), accurate for large u."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        big = u + np.log1p(-np.exp(-2 * u)) - LN2
        small = np.log(np.sinh(np.minimum(u, 20.0)))
    return np.where(u > 20, big, small)


def _dist_direct(t1, t2, alpha):
    s = np.sinh((t1 - t2) / 2) ** 2 + np.sinh(t1) * np.sinh(t2) * np.sin(alpha / 2) ** 2
    return 2 * np.arcsinh(np.sqrt(s))


def _dist_log(t1, t2, alpha):
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = 2 * log_sinh(np.abs(t1 - t2) / 2)
        angular = log_sinh(t1) + log_sinh(t2) + 2 * np.log(np.sin(alpha / 2))
        lx = np.logaddexp(radial, angular)
        # 2 asinh(sqrt(X)) = ln X + 2 ln(1 + sqrt(1 + 1/X))
        return lx + 2 * np.log1p(np.sqrt(1 + np.exp(-lx)))


def cone_distance_arrays(t1, t2, alpha) -> np.ndarray:
    t1, t2, alpha = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t1, t2, alpha)))
    if np.any(t1 < 0) or np.any(t2 < 0):
        raise ValueError("radii must be nonnegative")
    far = (t1 + t2) > LOG_SWITCH
    out = np.empty(t1.shape)
    near = ~far
    out[near] = _dist_direct(t1[near], t2[near], alpha[near])
    if far.any():
        out[far] = _dist_log(t1[far], t2[far], alpha[far])
    ray = alpha == 0
    out[ray] = np.abs(t1[ray] - t2[ray])
    return out


def hyperbolic_distance(t1: float, t2: float, alpha: float) -> float:
    return float(cone_distance_arrays(t1, t2, alpha))


def cone_distance(cone: HyperbolicCone, x: ConePoint, y: ConePoint) -> float:
    if x.t == 0 or y.t == 0:
        return abs(x.t - y.t)
    return hyperbolic_distance(x.t, y.t, cone.angle(x.z, y.z))


def chord_length(t: float, alpha: float) -> float:
    """Distance between two points at radius t separated by angle alpha.

    For sinh^2(t) alpha^2 < 0.01 the half-angle sine is taken as
    (alpha/2) sinc(alpha/2), which stays exact to rounding.
    """
    if not 0 <= alpha <= math.pi + 1e-15:
        raise ValueError("angle must lie in [0, pi]")
    if alpha == 0 or t == 0:
        return 0.0
    if math.sinh(min(t, 350.0)) ** 2 * alpha**2 < 0.01:
        half = (alpha / 2) * float(np.sinc(alpha / (2 * math.pi)))
        return 2 * math.asinh(math.sinh(t) * half)
    return hyperbolic_distance(t, t, alpha)


def chord_two_term(t: float, alpha: float) -> float:
    """arccosh(1 + sinh^2(t) alpha^2 / 2), the truncated small-angle form."""
    return math.acosh(1 + 0.5 * math.sinh(t) ** 2 * alpha**2)


def cone_sample_space(cone: HyperbolicCone, points: Sequence[ConePoint]) -> FiniteMetricSpace:
    z = np.array([p.z for p in points])
    t = np.array([p.t for p in points], dtype=float)
    alpha = cone.angles[np.ix_(z, z)]
    alpha = np.where((t[:, None] == 0) | (t[None, :] == 0), 0.0, alpha)
    d = cone_distance_arrays(t[:, None], t[None, :], alpha)
    np.fill_diagonal(d, 0.0)
    d = 0.5 * (d + d.T)
    return FiniteMetricSpace(d, validate=False)


def level_space(cone: HyperbolicCone, t: float, sample: Optional[Sequence[int]] = None) -> FiniteMetricSpace:
    if t <= 0:
        raise ValueError("level radius must be positive")
    idx = list(range(cone.base.n)) if sample is None else list(sample)
    return cone_sample_space(cone, [ConePoint(z, t) for z in idx])


# --- Gromov products ---------------------------------------------------------


def gromov_product(space: FiniteMetricSpace, o: int, x: int, y: int) -> float:
    d = space.dist
    return 0.5 * (d[x, o] + d[y, o] - d[x, y])


def gromov_matrix(space: FiniteMetricSpace, o: int) -> np.ndarray:
    d = space.dist
    return 0.5 * (d[:, o][:, None] + d[o, :][None, :] - d)


def triple_defect(a, b, c):
    """Second smallest minus smallest of three numbers (arrays broadcast)."""
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    return (a + b + c - hi - lo) - lo


def delta_certificate(space: FiniteMetricSpace, o: int) -> float:
    """Max defect over all point triples of the Gromov products at o."""
    G = gromov_matrix(space, o)
    best = 0.0
    for x in range(space.n):
        row = G[x]
        dfx = triple_defect(row[:, None], G, row[None, :])
        best = max(best, float(dfx.max()))
    return best


def sampled_defects(dist: np.ndarray, o: int, triples: np.ndarray) -> np.ndarray:
    G = 0.5 * (dist[:, o][:, None] + dist[o, :][None, :] - dist)
    x, y, z = triples.T
    return triple_defect(G[x, y], G[y, z], G[x, z])


# --- hyperbolic plane oracle -------------------------------------------------


def hyperboloid_points(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cosh(t), np.sinh(t) * np.cos(theta), np.sinh(t) * np.sin(theta)], axis=-1)


def hyperboloid_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    inner = p[..., 0] * q[..., 0] - p[..., 1] * q[..., 1] - p[..., 2] * q[..., 2]
    return np.arccosh(np.maximum(inner, 1.0))


@dataclass
class ComparisonReport:
    cone_max_defect: float
    plane_max_defect: float
    triples: int
    per_triple_exceed: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.cone_max_defect <= self.plane_max_defect + self.tol

    def to_json(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def _plane_defects(rad: np.ndarray, th: np.ndarray) -> np.ndarray:
    P = hyperboloid_points(rad, th)
    g = lambda a, b: 0.5 * (rad[:, a] + rad[:, b] - hyperboloid_distance(P[:, a], P[:, b]))
    return triple_defect(g(0, 1), g(1, 2), g(0, 2))


def hyperbolicity_comparison(cone: HyperbolicCone, points: Sequence[ConePoint], triples: np.ndarray,
                             tol: float = 1e-9) -> ComparisonReport:
    """Defects at the vertex of sampled cone triples against matched plane triples.

    Each plane copy keeps the three radii and puts one point of the triple
    at angle 0 with the other two on either side at their cone angles to
    it, so two of the three angles are exact and the third is at least the
    cone's. All three choices of the middle point are measured.
    """
    pts = list(points)
    space = cone_sample_space(cone, [ConePoint(0, 0.0)] + pts)
    triples = np.asarray(triples)
    dc = sampled_defects(space.dist, 0, triples + 1)
    z = np.array([p.z for p in pts])
    t = np.array([p.t for p in pts], dtype=float)
    A = cone.angles
    cols = triples.T
    rad = np.stack([t[c] for c in cols], axis=1)
    dp = np.zeros(len(triples))
    for mid in range(3):
        a, b = [k for k in range(3) if k != mid]
        th = np.zeros((len(triples), 3))
        th[:, a] = A[z[cols[a]], z[cols[mid]]]
        th[:, b] = -A[z[cols[mid]], z[cols[b]]]
        dp = np.maximum(dp, _plane_defects(rad, th))
    return ComparisonReport(float(dc.max()), float(dp.max()), len(triples), int(np.sum(dc > dp + tol)), tol)


# --- visual metric -----------------------------------------------------------


def visual_product(cone: HyperbolicCone, z: int, w: int, T: float, dT: float = 1.0, tol: float = 1e-6) -> float:
    """(gamma(T) | gamma'(T)) at the vertex for the rays through z and w."""
    alpha = cone.angle(z, w)
    if alpha == 0:
        return SENTINEL
    p = T - chord_length(T, alpha) / 2
    q = (T + dT) - chord_length(T + dT, alpha) / 2
    if abs(q - p) >= tol:
        raise ValueError("visual product not stabilized; increase T")
    return p


@dataclass
class SandwichReport:
    T: float
    delta: float
    pairs: int
    violations: list
    worst_lower: float
    worst_upper: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"T": self.T, "delta": self.delta, "pairs": self.pairs, "violations": self.violations[:20],
                "violation_count": len(self.violations), "worst_lower": self.worst_lower,
                "worst_upper": self.worst_upper, "passed": self.passed}


def cone_delta(cone: HyperbolicCone, T: float, levels: int = 8) -> float:
    """delta certificate at the vertex of the cone sampled on a radial grid up to T."""
    ts = np.linspace(0, T, levels + 1)[1:]
    pts = [ConePoint(0, 0.0)] + [ConePoint(z, float(t)) for t in ts for z in range(cone.base.n)]
    return delta_certificate(cone_sample_space(cone, pts), 0)


def visual_sandwich_check(cone: HyperbolicCone, T: float = 30.0, delta: Optional[float] = None) -> SandwichReport:
    """e^{-5 delta} e^{-P} <= tan(angle/4) <= e^{-P + 2 delta} over base pairs."""
    if delta is None:
        delta = cone_delta(cone, T)
    n = cone.base.n
    viol, wl, wu = [], math.inf, math.inf
    pairs = 0
    for z in range(n):
        for w in range(z + 1, n):
            alpha = cone.angle(z, w)
            if alpha == 0:
                continue
            pairs += 1
            P = visual_product(cone, z, w, T)
            mid = math.tan(alpha / 4)
            lo = math.exp(-5 * delta - P)
            hi = math.exp(-P + 2 * delta)
            wl = min(wl, mid - lo)
            wu = min(wu, hi - mid)
            if not lo <= mid <= hi:
                viol.append((z, w))
    return SandwichReport(T, delta, pairs, viol, wl, wu)


# --- trees -------------------------------------------------------------------


def tree_edges(space: FiniteMetricSpace, tol: float = 1e-9) -> list:
    """Pairs with no third point between them; a tree metric's edges."""
    d = space.dist
    n = space.n
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            between = d[u] + d[v] <= d[u, v] + tol
            between[[u, v]] = False
            if not between.any():
                edges.append((u, v))
    return edges


class TreeError(ValueError):
    pass


def check_tree(space: FiniteMetricSpace) -> list:
    import networkx as nx

    edges = tree_edges(space)
    g = nx.Graph()
    g.add_nodes_from(range(space.n))
    g.add_weighted_edges_from((u, v, space.dist[u, v]) for u, v in edges)
    if not nx.is_tree(g):
        raise TreeError("input is not a tree metric")
    lengths = dict(nx.all_pairs_dijkstra_path_length(g))
    for u in range(space.n):
        for v in range(space.n):
            if abs(lengths[u][v] - space.dist[u, v]) > 1e-9 * max(1.0, space.dist[u, v]):
                raise TreeError("input is not a tree metric")
    return edges


@dataclass
class RoughEmbedding:
    leaves: list
    leaf_of: list
    radius: np.ndarray
    cone: HyperbolicCone
    additive_error: float
    formula_error: float

    def to_json(self) -> dict:
        return {"leaves": self.leaves, "leaf_of": self.leaf_of, "additive_error": self.additive_error,
                "formula_error": self.formula_error}


def branch_root(tree: FiniteMetricSpace) -> int:
    """Lowest-index vertex of degree >= 2 (0 when there is none)."""
    deg = np.zeros(tree.n, dtype=int)
    for u, v in check_tree(tree):
        deg[u] += 1
        deg[v] += 1
    hits = np.flatnonzero(deg >= 2)
    return int(hits[0]) if hits.size else 0


def rough_embed(tree: FiniteMetricSpace, root: Optional[int] = None) -> RoughEmbedding:
    """x -> (lowest-index leaf below x, |x|) into the cone over the leaves
    with visual metric exp(-(xi|xi')).

    The root defaults to branch_root. A root of degree 1 shifts every leaf
    product by the distance to the first branch point, and the angle
    normalization pi/diam turns that shift into extra additive error.

    additive_error is the max over vertex pairs of | |xx'| - |F(x)F(x')| |;
    formula_error checks |xx'| = |x| + |x'| - 2 min{(xi|xi'), |x|, |x'|}.
    """
    import networkx as nx

    edges = check_tree(tree)
    if root is None:
        root = branch_root(tree)
    g = nx.Graph(edges)
    g.add_nodes_from(range(tree.n))
    d = tree.dist
    leaves = sorted(v for v in g.nodes if g.degree(v) <= 1 and v != root) or [root]
    depth = d[root]
    leaf_of = []
    for x in range(tree.n):
        # x lies on the root-leaf path iff |root x| + |x leaf| = |root leaf|
        below = [l for l in leaves if abs(depth[x] + d[x, l] - depth[l]) <= 1e-9 * max(1.0, depth[l])]
        leaf_of.append(min(below))
    L = np.array(leaves)
    prod = 0.5 * (depth[L][:, None] + depth[L][None, :] - d[np.ix_(L, L)])
    vis = np.exp(-prod)
    np.fill_diagonal(vis, 0.0)
    cone = HyperbolicCone(FiniteMetricSpace(vis, validate=False))
    pos = {l: i for i, l in enumerate(leaves)}
    pts = [ConePoint(pos[leaf_of[x]], float(depth[x])) for x in range(tree.n)]
    img = cone_sample_space(cone, pts).dist
    add = float(np.abs(img - d).max())
    li = np.array([pos[leaf_of[x]] for x in range(tree.n)])
    pp = prod[np.ix_(li, li)]
    est = depth[:, None] + depth[None, :] - 2 * np.minimum(pp, np.minimum(depth[:, None], depth[None, :]))
    return RoughEmbedding(leaves, leaf_of, depth.copy(), cone, add, float(np.abs(est - d).max()))
