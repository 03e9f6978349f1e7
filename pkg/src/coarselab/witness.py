"""Lipschitz, uniformly cobounded maps from a hyperbolic cone to a polyhedron.

A chain of coverings of the base, refining as k grows, is lifted to levels
t_k of the cone. On [t_k, t_k + d] the map runs through the prism N_k x [0,1]
from the barycentric map of level k to the projected one of level k + 1; on
[t_k + d, t_{k+1}] it runs through the mapping cylinder of the projection
N_{k+1} -> N_k. Below t_0 it is the cone over the top nerve.

Vertices of P are ('o',) for the apex and (k, j, side) with side 0 for the
bottom of the prism over N_k and side 1 for its top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .coverings import Covering, is_inscribed, lebesgue, mesh, multiplicity
from .cdim import candidate_coverings, candidate_partitions
from .hypcone import HyperbolicCone, cone_distance_arrays, chord_length, level_space
from .metric import FiniteMetricSpace
from .polyhedra import (
    BaryPoint,
    UniformComplex,
    barycentric_coordinates,
    cylinder_lipschitz_oracle,
    euclid,
    mapping_cylinder,
    nerve,
    pairwise_ratio,
    push_forward,
    simplicial_lipschitz_bound,
    simplicial_projection,
    staircase,
)

APEX = ("o",)
CYLINDER_SLACK = 1.05
GRID_PER_D = 8
CROSS_PAIRS = 10_000
REL = 1e-12


class ScheduleError(ValueError):
    def __init__(self, clause: str, level: int, message: str):
        super().__init__(f"clause ({clause}) fails at k={level}: {message}")
        self.clause = clause
        self.level = level


class ExtendSchedule(ValueError):
    pass


def schedule_constants(lam: float, m: int) -> tuple:
    """Half gap d = (m+2)^2 / 2 lambda and the forced product c0 delta = e^-d."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    d = (m + 2) ** 2 / (2 * lam)
    return d, math.exp(-d)


def level_radii(lam: float, m: int, tau0: float, K: int) -> tuple:
    d, _ = schedule_constants(lam, m)
    tau = tau0 * np.exp(-2 * d * np.arange(K + 1))
    t = np.log(2 / tau) + (m + 2) ** 2 / lam * 2
    return tau, t


@dataclass
class CechSchedule:
    lam: float
    m: int
    d: float
    sigma: float
    c0: float
    delta: float
    mu: float
    tau: np.ndarray
    t: np.ndarray
    coverings: tuple
    saturated: tuple

    @property
    def K(self) -> int:
        return len(self.coverings) - 1

    @property
    def mid(self) -> np.ndarray:
        return self.t[:-1] + self.d

    def band(self, k: int) -> tuple:
        return max(self.t[k] - 2 * self.d, 0.0), float(self.t[k])

    def to_json(self) -> dict:
        return {
            "lambda": self.lam, "m": self.m, "d": self.d, "sigma": self.sigma,
            "c0": self.c0, "delta": self.delta, "K": self.K,
            "tau": self.tau.tolist(), "t": self.t.tolist(),
            "saturated": list(self.saturated),
        }


def _real_levels(coverings, saturated):
    return [k for k in range(len(coverings)) if not saturated[k]]


def attainable(lam: float, m: int, coverings: Sequence[Covering], mu: float, saturated=None):
    """(tau0_lo, tau0_hi, c0, delta) for the supplied chain; empty interval
    or delta > 1 means lambda is not certifiable with these coverings."""
    saturated = tuple(saturated or [False] * len(coverings))
    d, sigma = schedule_constants(lam, m)
    real = _real_levels(coverings, saturated)
    M = {k: mesh(coverings[k]) for k in real}
    if any(M[k] == 0 for k in real):
        k = next(k for k in real if M[k] == 0)
        raise ScheduleError("ii", k, "zero mesh on a level not marked saturated")
    c0 = min(lebesgue(coverings[k]) / M[k] for k in real)
    delta = sigma / c0 if c0 > 0 else math.inf
    lo = max(mu * M[k] * math.exp(2 * d * k) for k in real)
    hi = min(mu * M[k] * math.exp(2 * d * k) / delta for k in real)
    return lo, hi, c0, delta


def build_schedule(lam: float, m: int, coverings: Sequence[Covering], mu: float,
                   tau0: Optional[float] = None, saturated=None) -> CechSchedule:
    """Validate the covering chain and lay out tau_k, t_k.

    Saturated levels sit below sampling resolution (singletons); they skip
    the mesh window but still need (i) and (iii).
    """
    coverings = tuple(coverings)
    if len(coverings) < 2:
        raise ScheduleError("ii", 0, "need at least two levels")
    saturated = tuple(bool(s) for s in (saturated or [False] * len(coverings)))
    for k, cov in enumerate(coverings):
        if multiplicity(cov) > m + 1:
            raise ScheduleError("i", k, f"multiplicity {multiplicity(cov)} exceeds m+1 = {m + 1}")
        if k and not is_inscribed(cov.members, coverings[k - 1].members):
            raise ScheduleError("iii", k, "not inscribed in the previous level")
    d, sigma = schedule_constants(lam, m)
    if mu == 0:
        # one-point base: the cone is a ray; mesh windows are vacuous
        tau0 = 1.0 if tau0 is None else tau0
        tau, t = level_radii(lam, m, tau0, len(coverings) - 1)
        return CechSchedule(lam, m, d, sigma, 1.0, sigma, mu, tau, t, coverings, (True,) * len(coverings))
    if saturated[0]:
        raise ScheduleError("ii", 0, "top level cannot be saturated")
    lo, hi, c0, delta = attainable(lam, m, coverings, mu, saturated)
    real = _real_levels(coverings, saturated)
    if delta > 1:
        k = min(real, key=lambda j: lebesgue(coverings[j]) / mesh(coverings[j]))
        raise ScheduleError("ii", k, f"c0 delta = e^-d = {sigma:.6g} needs capacity {sigma:.6g}, "
                                     f"coverings reach only c0 = {c0:.6g}")
    if tau0 is None:
        if lo > hi * (1 + REL):
            raise ScheduleError("ii", real[-1], f"no tau0 fits every mesh window ({lo:.6g} > {hi:.6g})")
        tau0 = math.sqrt(lo * hi)
    tau, t = level_radii(lam, m, tau0, len(coverings) - 1)
    for k in real:
        M = mu * mesh(coverings[k])
        if not delta * tau[k] <= M * (1 + REL) or not M <= tau[k] * (1 + REL):
            raise ScheduleError("ii", k, f"mu*mesh = {M:.6g} outside [{delta * tau[k]:.6g}, {tau[k]:.6g}]")
    if t[0] <= 0:
        raise ScheduleError("ii", 0, "t_0 must be positive; lower tau0")
    return CechSchedule(lam, m, d, sigma, c0, delta, mu, tau, t, coverings, saturated)


def smallest_certifiable_lambda(m: int, coverings, mu: float, saturated=None,
                                grid: Optional[np.ndarray] = None) -> Optional[float]:
    """Smallest lambda on a grid for which the chain admits a schedule."""
    grid = np.geomspace(0.05, 500, 600) if grid is None else grid
    for lam in grid:
        try:
            lo, hi, c0, delta = attainable(float(lam), m, coverings, mu, saturated)
        except ScheduleError:
            return None
        if delta <= 1 and lo <= hi * (1 + REL):
            return float(lam)
    return None


# --- covering chains ---------------------------------------------------------


def singleton_covering(space: FiniteMetricSpace) -> Covering:
    return Covering(space, tuple(frozenset([z]) for z in range(space.n)))


def merge_singletons(space: FiniteMetricSpace, parts) -> list:
    """Fold each singleton cell into the cell of its nearest other point; a
    singleton has zero local mesh and so forces a zero Lebesgue number."""
    cells = [set(U) for U in parts]
    owner = {z: i for i, U in enumerate(cells) for z in U}
    for i, U in enumerate(cells):
        if len(U) != 1 or space.n < 2:
            continue
        z = next(iter(U))
        row = space.dist[z].copy()
        row[z] = np.inf
        j = owner[int(np.argmin(row))]
        if j != i:
            cells[j] |= U
            owner[z] = j
            U.clear()
    return [frozenset(U) for U in cells if U]


def nearest_pairing(space: FiniteMetricSpace) -> list:
    """Greedy matching along shortest distances; leftovers join their nearest cell."""
    n = space.n
    iu, ju = np.triu_indices(n, 1)
    order = np.lexsort((ju, iu, space.dist[iu, ju]))
    used = np.zeros(n, dtype=bool)
    cells = []
    for e in order:
        a, b = int(iu[e]), int(ju[e])
        if not used[a] and not used[b]:
            used[a] = used[b] = True
            cells.append(frozenset((a, b)))
    cells += [frozenset([z]) for z in np.nonzero(~used)[0].tolist()]
    return merge_singletons(space, cells)


def covering_pool(space: FiniteMetricSpace, m: int, scales: int = 20) -> list:
    """Candidate coverings with multiplicity <= m+1 and positive Lebesgue number."""
    d = space.dist[space.dist > 0]
    if d.size == 0:
        return []
    out, seen = [], set()
    extra = [Covering(space, tuple(nearest_pairing(space)))]
    for tau in np.geomspace(d.min(), space.diam, scales):
        parts = [Covering(space, tuple(merge_singletons(space, P))) for P in candidate_partitions(space, float(tau))]
        for cov in candidate_coverings(space, float(tau)) + parts + extra:
            key = frozenset(cov.members)
            if key in seen:
                continue
            seen.add(key)
            if len(cov) < 2 or multiplicity(cov) > m + 1:
                continue
            M, L = mesh(cov), lebesgue(cov)
            if M > 0 and L > 0:
                out.append((cov, M, L))
    return out


def auto_chain(space: FiniteMetricSpace, m: int, lam: float, K: int, pool=None) -> tuple:
    """Pick coverings for levels 0..K that fit the mesh windows for lambda.

    Longer chains win, then a coarser top level, then higher capacity.
    Levels the sample cannot resolve become singletons, flagged saturated.
    Returns (coverings, saturated, tau0).
    """
    if space.n == 1:
        return [Covering(space, (frozenset([0]),))] * (K + 1), [True] * (K + 1), 1.0
    mu = math.pi / space.diam
    d, sigma = schedule_constants(lam, m)
    pool = covering_pool(space, m) if pool is None else pool
    if not pool:
        raise ScheduleError("ii", 0, "no candidate coverings")
    M = np.array([mu * p[1] for p in pool])
    cap = np.array([p[2] / p[1] for p in pool])
    best = None
    for c0 in sorted(set(np.round(cap[cap >= sigma], 12)), reverse=True):
        delta = sigma / c0
        ok = cap >= c0 * (1 - REL)
        for i in np.nonzero(ok)[0]:
            for tau0 in (M[i], M[i] / delta):
                chain = [i]
                for k in range(1, K + 1):
                    tk = tau0 * math.exp(-2 * d * k)
                    win = ok & (M >= delta * tk * (1 - REL)) & (M <= tk * (1 + REL))
                    prev = pool[chain[-1]][0].members
                    cands = [j for j in np.nonzero(win)[0] if is_inscribed(pool[j][0].members, prev)]
                    if not cands:
                        break
                    chain.append(max(cands, key=lambda j: (cap[j], M[j])))
                key = (len(chain), M[i], c0)
                if best is None or key > best[0]:
                    lo = max(M[j] * math.exp(2 * d * k) for k, j in enumerate(chain))
                    hi = min(M[j] * math.exp(2 * d * k) / delta for k, j in enumerate(chain))
                    best = (key, chain, math.sqrt(lo * hi))
    if best is None:
        raise ScheduleError("ii", 0, f"no covering reaches capacity e^-d = {sigma:.6g}")
    _, chain, tau0 = best
    covs = [pool[j][0] for j in chain]
    sat = [False] * len(covs)
    single = singleton_covering(space)
    while len(covs) < K + 1:
        covs.append(single)
        sat.append(True)
    return covs, sat, float(tau0)


# --- level maps --------------------------------------------------------------


@dataclass
class LevelMap:
    k: int
    t: float
    rows: np.ndarray
    lip: float
    level_mesh: float
    lam: float

    @property
    def passed(self) -> bool:
        return self.lip < self.lam


def _lift(cone: HyperbolicCone, cov: Covering, t: float):
    space = level_space(cone, t)
    return space, Covering(space, cov.members)


def level_barycentric(cone: HyperbolicCone, schedule: CechSchedule, k: int, t: float) -> LevelMap:
    """Barycentric map of the covering of level k lifted to radius t."""
    lo, hi = schedule.band(k)
    if not lo - REL <= t <= hi + REL or t <= 0:
        raise ValueError(f"t = {t} outside band [{lo}, {hi}] of level {k}")
    space, cov = _lift(cone, schedule.coverings[k], t)
    rows = barycentric_coordinates(cov)
    lip, _ = pairwise_ratio(rows, space.dist)
    return LevelMap(k, t, rows, lip, mesh(cov), schedule.lam)


def cosh_lower_bound_gap(schedule: CechSchedule, k: int, t: float) -> float:
    """cosh(L(U_t)) - (1 + sinh^2(t) (sigma tau_k)^2 / 2); nonnegative when
    the exact chord dominates the small-angle estimate."""
    L = schedule.mu * lebesgue(schedule.coverings[k])
    lhs = math.cosh(chord_length(t, min(L, math.pi)))
    rhs = 1 + 0.5 * math.sinh(t) ** 2 * (schedule.sigma * schedule.tau[k]) ** 2
    return (lhs - rhs) / rhs


# --- the map -----------------------------------------------------------------


def _fast_maximal(simplices) -> list:
    simplices = sorted(set(frozenset(s) for s in simplices), key=len, reverse=True)
    by_vertex: dict = {}
    out = []
    for s in simplices:
        v = next(iter(s))
        if any(s < u for u in by_vertex.get(v, ())):
            continue
        out.append(s)
        for v in s:
            by_vertex.setdefault(v, []).append(s)
    return out


class Witness:
    """Polyhedron P and the evaluable map f on Z x [0, t_K]."""

    def __init__(self, cone: HyperbolicCone, schedule: CechSchedule):
        self.cone, self.sch = cone, schedule
        K = schedule.K
        covs = schedule.coverings
        self.rows = []
        for k in range(K + 1):
            _, cov = _lift(cone, covs[k], float(schedule.t[k]))
            self.rows.append(barycentric_coordinates(cov))
        self.bary = [[BaryPoint({j: w for j, w in enumerate(r) if w > 0}) for r in rows] for rows in self.rows]
        self.rho = [simplicial_projection(covs[k + 1], covs[k]) for k in range(K)]
        self.nerves = [nerve(c) for c in covs]
        self._check_shared_simplices()
        self.P, self.pieces = self._assemble()
        self.labels = list(self.P.vertices)
        self.index = {v: i for i, v in enumerate(self.labels)}

    def _check_shared_simplices(self):
        for k, rho in enumerate(self.rho):
            for z in range(self.cone.base.n):
                s = self.bary[k][z].support | push_forward(rho, self.bary[k + 1][z]).support
                if not self.nerves[k].contains(s):
                    raise ValueError(f"endpoint images of z={z} share no simplex of N_{k}; projection is broken")

    def _assemble(self):
        K = self.sch.K
        pieces = {("cone",): [frozenset({APEX} | {(0, j, 0) for j in s}) for s in self.nerves[0].maximal_simplices]}
        for k in range(K):
            prism = mapping_cylinder(list(range(len(self.sch.coverings[k]))), self.nerves[k], self.nerves[k], order=int)
            pieces[("A", k)] = [frozenset((k, v, 1 if side == "K" else 0) for side, v in s)
                                for s in prism.maximal_simplices]
            cyl = mapping_cylinder(self.rho[k], self.nerves[k + 1], self.nerves[k], order=int)
            pieces[("B", k)] = [frozenset((k + 1, v, 0) if side == "K" else (k, v, 1) for side, v in s)
                                for s in cyl.maximal_simplices]
        allmax = _fast_maximal([s for ss in pieces.values() for s in ss])
        verts = set().union(*allmax)
        P = UniformComplex(tuple(sorted(verts, key=repr)), tuple(allmax))
        return P, pieces

    # pieces of f

    def piece(self, t: float) -> tuple:
        sch = self.sch
        if t < 0:
            raise ValueError("negative radius")
        if t > sch.t[-1] * (1 + REL):
            raise ExtendSchedule(f"t = {t} beyond t_K = {sch.t[-1]}; extend schedule")
        if t < sch.t[0]:
            return ("cone",)
        k = int(np.searchsorted(sch.t, t, side="right")) - 1
        k = min(k, sch.K - 1)
        return ("A", k) if t < sch.mid[k] else ("B", k)

    def cone_piece(self, z: int, t: float) -> BaryPoint:
        w = t / self.sch.t[0]
        out = {APEX: 1 - w}
        for j, v in self.bary[0][z].items():
            out[(0, j, 0)] = w * v
        return BaryPoint(out)

    def homotopy_map(self, k: int, z: int, t: float) -> tuple:
        """(point of N_k, s) for t in [t_k, t_k + d]."""
        tk, mk = self.sch.t[k], self.sch.mid[k]
        if not tk - REL <= t <= mk + REL:
            raise ValueError(f"t = {t} outside A_{k}")
        s = min(max((t - tk) / (mk - tk), 0.0), 1.0)
        p = self.bary[k][z]
        q = push_forward(self.rho[k], self.bary[k + 1][z])
        keys = sorted(set(p) | set(q))
        x = BaryPoint({j: (1 - s) * p[j] + s * q[j] for j in keys})
        return x, s

    def prism_point(self, k: int, x, s: float) -> BaryPoint:
        top, bottom = staircase(x, s, int)
        out = {(k, j, 1): w for j, w in top.items()}
        out.update({(k, j, 0): w for j, w in bottom.items()})
        return BaryPoint(out)

    def cylinder_leg(self, k: int, z: int, t: float) -> BaryPoint:
        mk, t1 = self.sch.mid[k], self.sch.t[k + 1]
        if not mk - REL <= t <= t1 * (1 + REL):
            raise ValueError(f"t = {t} outside B_{k}")
        s = min(max((t - mk) / (t1 - mk), 0.0), 1.0)
        top, bottom = staircase(self.bary[k + 1][z], s, int)
        out = {(k + 1, j, 0): w for j, w in top.items()}
        rho = self.rho[k]
        for j, w in bottom.items():
            key = (k, rho[j], 1)
            out[key] = out.get(key, 0.0) + w
        return BaryPoint(out)

    def f(self, z: int, t: float) -> BaryPoint:
        pc = self.piece(t)
        if pc[0] == "cone":
            return self.cone_piece(z, t)
        k = pc[1]
        if pc[0] == "A":
            return self.prism_point(k, *self.homotopy_map(k, z, t))
        return self.cylinder_leg(k, z, t)

    def vector(self, x: BaryPoint) -> np.ndarray:
        v = np.zeros(len(self.labels))
        for key, w in x.items():
            v[self.index[key]] = w
        return v

    def seam_report(self) -> dict:
        """Largest coordinate gap between adjacent pieces on shared levels."""
        n, sch = self.cone.base.n, self.sch
        worst = {}
        for k in range(sch.K):
            pairs = []
            for z in range(n):
                a0 = self.prism_point(k, *self.homotopy_map(k, z, float(sch.t[k])))
                prev = self.cone_piece(z, float(sch.t[0])) if k == 0 else self.cylinder_leg(k - 1, z, float(sch.t[k]))
                a1 = self.prism_point(k, *self.homotopy_map(k, z, float(sch.mid[k])))
                b0 = self.cylinder_leg(k, z, float(sch.mid[k]))
                pairs += [(a0, prev), (a1, b0)]
            worst[k] = max(_dict_gap(x, y) for x, y in pairs)
        return worst


def _dict_gap(x, y) -> float:
    keys = set(x) | set(y)
    return max(abs(x[k] - y[k]) for k in keys)


# --- certification -----------------------------------------------------------


@lru_cache(maxsize=None)
def cylinder_constant(m: int) -> float:
    """Sampled Lipschitz constant of the staircase projection, with slack."""
    return CYLINDER_SLACK * cylinder_lipschitz_oracle(m)


@dataclass
class WitnessReport:
    dim: int
    m: int
    lam: float
    d: float
    lip_measured: float
    lip_bound: float
    c: float
    single_piece_max: float
    cross_piece_max: float
    per_piece: dict
    constants: dict
    cobound_max: float
    cobound_bound: float
    level_mesh_max: float
    range_t: float
    seams: dict
    per_level: list
    cone_preimage_max: float
    cone_bound: float
    samples: dict
    schedule: dict = field(default_factory=dict)

    @property
    def seams_exact(self) -> bool:
        return all(v == 0 for v in self.seams.values())

    @property
    def lip_ok(self) -> bool:
        return self.lip_measured <= self.lip_bound

    @property
    def cobound_ok(self) -> bool:
        # preimages of simplices through the apex contain a whole segment [0, t_0]
        prism = max([v["preimage_max"] for v in self.per_level], default=0.0)
        return prism <= self.cobound_bound and self.cone_preimage_max <= self.cone_bound

    @property
    def passed(self) -> bool:
        return self.dim <= self.m + 1 and self.seams_exact and self.lip_ok and self.cobound_ok

    def failures(self) -> list:
        out = []
        if self.dim > self.m + 1:
            out.append(f"dim P = {self.dim} > m+1")
        if not self.seams_exact:
            out.append("seam mismatch")
        if not self.lip_ok:
            out.append(f"Lipschitz {self.lip_measured:.6g} > c*lambda = {self.lip_bound:.6g}")
        if not self.cobound_ok:
            out.append(f"preimage diameter {self.cobound_max:.6g} exceeds 4d + level mesh = {self.cobound_bound:.6g}"
                       f" (cone simplices: {self.cone_preimage_max:.6g} vs {self.cone_bound:.6g})")
        return out

    def to_json(self) -> dict:
        return {
            "dim": self.dim, "m": self.m, "lip_measured": self.lip_measured, "lambda": self.lam,
            "d": self.d, "c": self.c, "lip_bound": self.lip_bound,
            "single_piece_max": self.single_piece_max, "cross_piece_max": self.cross_piece_max,
            "per_piece": self.per_piece, "constants": self.constants,
            "cobound_max": self.cobound_max, "cobound_bound": self.cobound_bound,
            "level_mesh_max": self.level_mesh_max, "range_t": self.range_t,
            "seams_exact": self.seams_exact, "seams": {str(k): v for k, v in self.seams.items()},
            "per_level": self.per_level, "cone_preimage_max": self.cone_preimage_max,
            "cone_bound": self.cone_bound, "samples": self.samples, "schedule": self.schedule,
            "passed": self.passed,
        }


def _piece_name(pc) -> str:
    return pc[0] if len(pc) == 1 else f"{pc[0]}{pc[1]}"


def sample_grid(schedule: CechSchedule) -> np.ndarray:
    """Step d/8 on [0, t_K] plus every seam level."""
    sch = schedule
    step = sch.d / GRID_PER_D
    base = np.arange(0.0, sch.t[-1], step)
    return np.unique(np.concatenate([base, sch.t, sch.mid, [sch.t[-1]]]))


def _cone_ratio_bound(w: Witness) -> tuple:
    """Level and vertical coefficients for the cone over N_0.

    Level pairs: (t/t0)|p0 z - p0 z'| against the Euclidean chord 2 t sin(alpha/2),
    which the hyperbolic chord dominates. Vertical: sqrt(2) / t0.
    """
    t0 = float(w.sch.t[0])
    rows = w.rows[0]
    sq = (rows**2).sum(1)
    img = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * rows @ rows.T, 0.0))
    chord = 2 * t0 * np.sin(w.cone.angles / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(chord > 0, img / np.where(chord > 0, chord, 1.0), 0.0)
    return float(r.max()) if r.size else 0.0, math.sqrt(2) / t0


def certify(w: Witness, seed: int = 0, cross_pairs: int = CROSS_PAIRS) -> WitnessReport:
    sch, cone = w.sch, w.cone
    n, m, lam = cone.base.n, sch.m, sch.lam
    grid = sample_grid(sch)
    ang = cone.angles
    pcs = [w.piece(float(t)) for t in grid]
    per_piece: dict = {}
    single = cross = 0.0

    def note(pc, r):
        name = _piece_name(pc)
        per_piece[name] = max(per_piece.get(name, 0.0), r)

    # images, kept sparse; dense blocks are built per level and per ray
    V = len(w.labels)
    xs = [[w.f(z, float(t)) for z in range(n)] for t in grid]
    supports = [(a, z, frozenset(w.index[k] for k in xs[a][z].support))
                for a in range(len(grid)) for z in range(n)]

    def dense(points):
        out = np.zeros((len(points), V))
        for i, x in enumerate(points):
            for key, val in x.items():
                out[i, w.index[key]] = val
        return out

    # level pairs
    for a, t in enumerate(grid):
        if t == 0 or n < 2:
            continue
        dist = cone_distance_arrays(t, t, ang)
        np.fill_diagonal(dist, 0.0)
        r, _ = pairwise_ratio(dense(xs[a]), dist)
        single = max(single, r)
        note(pcs[a], r)

    # vertical pairs on each ray
    vdist = np.abs(grid[:, None] - grid[None, :])
    same = np.array([[p == q for q in pcs] for p in pcs])
    for z in range(n):
        rows = dense([xs[a][z] for a in range(len(grid))])
        sq = (rows**2).sum(1)
        dimg = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * rows @ rows.T, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(vdist > 0, dimg / np.where(vdist > 0, vdist, 1.0), 0.0)
        single = max(single, float(r[same].max()))
        if (~same).any():
            cross = max(cross, float(r[~same].max()))
        for a in range(len(grid)):
            note(pcs[a], float(r[a][same[a]].max()))

    # random cross pairs
    rng = np.random.default_rng(seed)
    a1 = rng.integers(0, len(grid), cross_pairs)
    a2 = rng.integers(0, len(grid), cross_pairs)
    z1 = rng.integers(0, n, cross_pairs)
    z2 = rng.integers(0, n, cross_pairs)
    t1, t2 = grid[a1], grid[a2]
    alpha = np.where((t1 == 0) | (t2 == 0), 0.0, ang[z1, z2])
    src = cone_distance_arrays(t1, t2, alpha)
    for i in np.nonzero(src > 1e-12)[0]:
        r = euclid(xs[a1[i]][z1[i]], xs[a2[i]][z2[i]]) / src[i]
        if pcs[a1[i]] == pcs[a2[i]]:
            single = max(single, r)
            note(pcs[a1[i]], r)
        else:
            cross = max(cross, r)

    # composite constant
    lev_freeze = [_frozen_lip(w, k) for k in range(sch.K + 1)]
    lam_eff = max([lam] + [x for x in lev_freeze if x is not None])
    c1 = simplicial_lipschitz_bound(m)
    cphi = cylinder_constant(m)
    cone_lev, cone_vert = _cone_ratio_bound(w)
    levels = {"A": cphi * c1 * lam_eff, "B": cphi * lam_eff, "cone": cone_lev}
    verts = {"A": cphi * math.sqrt(3) / sch.d, "B": cphi / sch.d, "cone": cone_vert}
    bound = max(levels.values()) + max(verts.values())
    c = bound / lam

    # coboundedness per maximal simplex
    cob, level_mesh, per_simplex = _preimages(w, grid, supports)

    per_level = []
    for k in range(sch.K + 1):
        cov = sch.coverings[k]
        lo, hi = sch.band(k)
        band = [t for t in np.linspace(lo, hi, GRID_PER_D + 1) if t > 0]
        lips = [level_barycentric(cone, sch, k, float(t)).lip for t in band]
        gaps = [cosh_lower_bound_gap(sch, k, float(t)) for t in band] if not sch.saturated[k] else []
        per_level.append({
            "k": k, "t": float(sch.t[k]), "tau": float(sch.tau[k]), "saturated": sch.saturated[k],
            "members": len(cov), "mesh": mesh(cov), "lebesgue": lebesgue(cov),
            "multiplicity": multiplicity(cov), "level_mesh": level_mesh[k],
            "lip_band": max(lips) if lips else 0.0, "lip_band_ok": all(x < lam for x in lips),
            "lip_frozen": lev_freeze[k],
            "cosh_gap_min": float(min(gaps)) if gaps else None,
            "preimage_max": per_simplex.get(k, 0.0),
        })

    return WitnessReport(
        dim=w.P.dim, m=m, lam=lam, d=sch.d,
        lip_measured=max(single, cross), lip_bound=bound, c=c,
        single_piece_max=single, cross_piece_max=cross, per_piece=per_piece,
        constants={"c1": c1, "c_phi": cphi, "c2": cphi * (c1 + 2 * math.sqrt(3) / (m + 2) ** 2),
                   "c3": cphi * (1 + 2 / (m + 2) ** 2), "cone_level": cone_lev, "cone_vertical": cone_vert,
                   "lambda_eff": lam_eff},
        cobound_max=cob, cobound_bound=4 * sch.d + max(level_mesh),
        level_mesh_max=max(level_mesh), range_t=float(sch.t[-1]),
        seams={k: float(v) for k, v in w.seam_report().items()},
        per_level=per_level, cone_preimage_max=per_simplex.get(-1, 0.0),
        cone_bound=max(float(sch.t[0]), 4 * sch.d + max(level_mesh)),
        samples={"levels": int(len(grid)), "rays": n, "points": int(len(grid) * n), "cross_pairs": cross_pairs},
        schedule=sch.to_json(),
    )


def _frozen_lip(w: Witness, k: int) -> Optional[float]:
    """Lipschitz constant of z -> p_k(z, t_k) against level-t distances, over
    the radii where f reads it (t_k - 2d .. t_k, clipped at 0)."""
    cone, sch = w.cone, w.sch
    if cone.base.n < 2:
        return 0.0
    lo, hi = sch.band(k)
    out = 0.0
    for t in np.linspace(lo, hi, GRID_PER_D + 1):
        if t <= 0:
            continue
        dist = cone_distance_arrays(t, t, cone.angles)
        np.fill_diagonal(dist, 0.0)
        out = max(out, pairwise_ratio(w.rows[k], dist)[0])
    return out


def _preimages(w: Witness, grid, supports) -> tuple:
    sch, cone = w.sch, w.cone
    by_vertex: dict = {}
    simp = [frozenset(w.index[v] for v in s) for s in w.P.maximal_simplices]
    owner_of = {frozenset(w.index[v] for v in s): (-1 if pc[0] == "cone" else pc[1])
                for pc, ss in w.pieces.items() for s in ss}
    for i, s in enumerate(simp):
        for v in s:
            by_vertex.setdefault(v, []).append(i)
    members: dict = {}
    for a, z, supp in supports:
        v = min(supp, key=lambda u: len(by_vertex[u]))
        hit = False
        for i in by_vertex[v]:
            if supp <= simp[i]:
                members.setdefault(i, []).append((a, z))
                hit = True
        if not hit:
            raise ValueError(f"f({z}, {grid[a]}) leaves P")
    level_mesh = []
    for k in range(sch.K + 1):
        cov = sch.coverings[k]
        level_mesh.append(float(chord_length(float(sch.t[k]), min(sch.mu * mesh(cov), math.pi))))
    cob = 0.0
    per_level: dict = {}
    for i, pts in members.items():
        a = np.array([p[0] for p in pts])
        z = np.array([p[1] for p in pts])
        t = grid[a]
        alpha = cone.angles[np.ix_(z, z)]
        alpha = np.where((t[:, None] == 0) | (t[None, :] == 0), 0.0, alpha)
        diam = float(cone_distance_arrays(t[:, None], t[None, :], alpha).max())
        cob = max(cob, diam)
        k = owner_of.get(simp[i], -1)
        per_level[k] = max(per_level.get(k, 0.0), diam)
    return cob, level_mesh, per_level


def run_witness(space: FiniteMetricSpace, m: int, lam: float, K: int = 6, seed: int = 0,
                cross_pairs: int = CROSS_PAIRS) -> WitnessReport:
    covs, sat, tau0 = auto_chain(space, m, lam, K)
    cone = HyperbolicCone(space)
    sch = build_schedule(lam, m, covs, cone.mu, tau0=tau0, saturated=sat)
    return certify(Witness(cone, sch), seed=seed, cross_pairs=cross_pairs)
