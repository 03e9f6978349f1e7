"""Quasi-symmetric maps between finite spaces.

Moduli, exact triple-scan certification and fitting, covering pushforward,
and the chain that turns a separated covering sequence of X into balanced
coverings of f(X) with capacity bounded below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .coverings import (
    Covering,
    CoveringError,
    balance_constant,
    capacity,
    lebesgue,
    local_capacity,
    mesh,
)
from .metric import FiniteMetricSpace, MetricError, diameter

MAX_TRIPLE_POINTS = 512


def snowflake(space: FiniteMetricSpace, p: float) -> FiniteMetricSpace:
    if not 0 < p < 1:
        raise MetricError("snowflake exponent must lie in (0, 1)")
    return FiniteMetricSpace(space.dist**p, validate=False)


# --- moduli ------------------------------------------------------------------


class Modulus:
    """Increasing homeomorphism of [0, inf) with eta(0) = 0."""

    def __call__(self, t):
        raise NotImplementedError

    def inverse(self, y):
        """Numerical inverse by bisection; subclasses override when closed form."""
        y = float(y)
        if y <= 0:
            return 0.0
        lo, hi = 0.0, 1.0
        while self(hi) < y:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self(mid) < y:
                lo = mid
            else:
                hi = mid
        return hi

    def inverse_modulus(self) -> "Modulus":
        return InverseModulus(self)

    def then(self, outer: "Modulus") -> "Modulus":
        return ComposedModulus(outer, self)


@dataclass(frozen=True)
class EtaModulus(Modulus):
    """eta(t) = C * max(t^alpha, t^(1/alpha)), C >= 1, 0 < alpha <= 1."""

    C: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.C < 1 or not 0 < self.alpha <= 1:
            raise ValueError("need C >= 1 and alpha in (0, 1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self.C * np.maximum(t**self.alpha, t ** (1 / self.alpha))
        return float(out) if out.ndim == 0 else out

    def inverse(self, y):
        u = np.maximum(np.asarray(y, dtype=float), 0.0) / self.C
        out = np.where(u <= 1, u ** (1 / self.alpha), u**self.alpha)
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        return {"family": "power", "C": self.C, "alpha": self.alpha}


class TabulatedModulus(Modulus):
    """Piecewise-linear through (0, 0) and the given knots, linear beyond the last."""

    def __init__(self, ts: Sequence[float], values: Sequence[float]):
        ts = np.concatenate([[0.0], np.asarray(ts, float)])
        vs = np.concatenate([[0.0], np.asarray(values, float)])
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(vs) <= 0):
            raise ValueError("tabulated modulus must be strictly increasing")
        self.ts, self.vs = ts, vs

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        slope = (self.vs[-1] - self.vs[-2]) / (self.ts[-1] - self.ts[-2])
        out = np.where(t <= self.ts[-1], np.interp(t, self.ts, self.vs), self.vs[-1] + slope * (t - self.ts[-1]))
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        return {"family": "table", "t": self.ts[1:].tolist(), "eta": self.vs[1:].tolist()}


class InverseModulus(Modulus):
    """t -> 1 / eta^{-1}(1/t), the modulus of the inverse map."""

    def __init__(self, base: Modulus):
        self.base = base

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if isinstance(self.base, EtaModulus):
            with np.errstate(divide="ignore"):
                out = np.where(t > 0, 1.0 / self.base.inverse(1.0 / np.where(t > 0, t, 1.0)), 0.0)
            return float(out) if out.ndim == 0 else out
        flat = [0.0 if v <= 0 else (math.inf if math.isinf(v) else 1.0 / self.base.inverse(1.0 / v)) for v in t.ravel()]
        out = np.array(flat).reshape(t.shape)
        return float(out) if out.ndim == 0 else out


class ComposedModulus(Modulus):
    def __init__(self, outer: Modulus, inner: Modulus):
        self.outer, self.inner = outer, inner

    def __call__(self, t):
        return self.outer(self.inner(t))


def modulus_from_json(data: dict) -> Modulus:
    if data.get("family", "power") == "power":
        return EtaModulus(data["C"], data["alpha"])
    return TabulatedModulus(data["t"], data["eta"])


# --- maps --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteMap:
    """Bijection source point i -> target point perm[i]."""

    source: FiniteMetricSpace
    target: FiniteMetricSpace
    perm: Optional[tuple] = None

    def __post_init__(self):
        n = self.source.n
        perm = tuple(range(n)) if self.perm is None else tuple(int(p) for p in self.perm)
        if self.target.n != n or sorted(perm) != list(range(n)):
            raise ValueError("map is not a bijection")
        object.__setattr__(self, "perm", perm)

    @property
    def image_dist(self) -> np.ndarray:
        """Target distances pulled back to source indices."""
        p = np.asarray(self.perm)
        return self.target.dist[np.ix_(p, p)]

    def inverse(self) -> "FiniteMap":
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return FiniteMap(self.target, self.source, tuple(inv))

    def then(self, g: "FiniteMap") -> "FiniteMap":
        return FiniteMap(self.source, g.target, tuple(g.perm[p] for p in self.perm))

    def image(self, U) -> frozenset:
        return frozenset(self.perm[i] for i in U)


def snowflake_map(space: FiniteMetricSpace, p: float) -> FiniteMap:
    return FiniteMap(space, snowflake(space, p))


@dataclass
class EtaReport:
    passed: bool
    worst: float
    failure: Optional[tuple] = None
    modulus: Optional[Modulus] = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "worst": self.worst,
                "failure": list(self.failure) if self.failure else None,
                "modulus": self.modulus.to_json() if hasattr(self.modulus, "to_json") else None}


def _triple_rows(f: FiniteMap):
    if f.source.n > MAX_TRIPLE_POINTS:
        raise ValueError(f"triple scans capped at {MAX_TRIPLE_POINTS} points")
    return f.source.dist, f.image_dist


def certify_eta(f: FiniteMap, eta: Modulus, tol: float = 1e-12) -> EtaReport:
    """Check |f(x)f(a)| <= eta(|xa|/|xb|) |f(x)f(b)| over all triples with b != x.

    The smallest admissible t is |xa|/|xb|; with |xb| = 0 the premise forces
    |xa| = 0, so the check runs at t = 0 and is vacuous otherwise.
    """
    d, e = _triple_rows(f)
    n = d.shape[0]
    worst, failure = 0.0, None
    for x in range(n):
        D, E = d[x], e[x]
        b_ok = np.arange(n) != x
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.where(D[None, :] > 0, D[:, None] / np.where(D[None, :] > 0, D[None, :], 1.0),
                         np.where(D[:, None] == 0, 0.0, np.inf))
        lhs = np.broadcast_to(E[:, None], T.shape)
        rhs = np.where(np.isinf(T), np.inf, np.asarray(eta(np.where(np.isinf(T), 0.0, T))) * E[None, :])
        mask = b_ok[None, :] & np.broadcast_to(True, T.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mask & (lhs > 0), lhs / rhs, 0.0)
        ratio = np.nan_to_num(ratio, nan=0.0, posinf=np.inf)
        k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        if ratio[k] > worst:
            worst = float(ratio[k])
            failure = (x, int(k[0]), int(k[1]))
    passed = worst <= 1 + tol
    return EtaReport(passed, worst, None if passed else failure, eta)


def _pareto(key: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Points not dominated by one with larger-or-equal key and v."""
    order = np.lexsort((-v, -key))
    vs = v[order]
    prev = np.concatenate([[-np.inf], np.maximum.accumulate(vs)[:-1]])
    return order[vs > prev]


def fit_eta(f: FiniteMap, alphas: Optional[Sequence[float]] = None) -> EtaModulus:
    """Smallest C (ties: largest alpha) certifying the power modulus on the grid.

    In log coordinates (u, v) = (ln t, ln ratio) the certified ln C is the
    max of v - alpha u over u <= 0 and of v - u/alpha over u >= 0, so only
    the Pareto front of (|u|, v) on each half matters.
    """
    d, e = _triple_rows(f)
    n = d.shape[0]
    if alphas is None:
        alphas = np.round(np.linspace(0.02, 1.0, 50), 12)
    alphas = np.asarray(sorted(alphas), float)
    left, right = [], []
    for x in range(n):
        keep = np.arange(n) != x
        D, E = d[x][keep], e[x][keep]
        if np.any(D == 0) and np.any(E > 0):
            # coincident source points with distinct images: no modulus exists
            raise ValueError("map is not injective on the source metric")
        ok = E > 0
        if not ok.any():
            continue
        u = (np.log(D[ok])[:, None] - np.log(D)[None, :]).ravel()
        v = (np.log(E[ok])[:, None] - np.log(E)[None, :]).ravel()
        pts = np.column_stack([u, v])
        lo, hi = pts[u <= 0], pts[u >= 0]
        left.append(lo[_pareto(-lo[:, 0], lo[:, 1])])
        right.append(hi[_pareto(-hi[:, 0], hi[:, 1])])
    L = np.concatenate(left) if left else np.zeros((0, 2))
    R = np.concatenate(right) if right else np.zeros((0, 2))
    logc = np.zeros(len(alphas))
    for i, a in enumerate(alphas):
        if len(L):
            logc[i] = max(logc[i], float((L[:, 1] - a * L[:, 0]).max()))
        if len(R):
            logc[i] = max(logc[i], float((R[:, 1] - R[:, 0] / a).max()))
    cmin = np.exp(logc)
    best = np.flatnonzero(cmin <= cmin.min() * (1 + 1e-9))[-1]
    return EtaModulus(float(cmin[best]) * (1 + 1e-9), float(alphas[best]))


def pushforward(f: FiniteMap, cov: Covering) -> Covering:
    return Covering(f.target, tuple(f.image(U) for U in cov.members), cov.colors)


def local_capacity_bound(eta: Modulus, cap_loc_source: float) -> float:
    """Lower bound for the local capacity of an image covering: 1/(16 eta(2/cap_loc))."""
    if cap_loc_source <= 0:
        return 0.0
    return 1.0 / (16 * float(eta(2.0 / cap_loc_source)))


# --- sequences to balanced image coverings -----------------------------------


@dataclass(frozen=True)
class Member:
    level: int
    points: frozenset
    color: int


def prune_sequence(sequence: Sequence[Covering]) -> list:
    """Drop members with diameter below the level's Lebesgue number; such a
    member lies inside another member of its level."""
    out = []
    for cov in sequence:
        L = lebesgue(cov)
        keep = [(U, c) for U, c, dm in zip(cov.members, cov.colors, cov.diameters) if dm >= L]
        out.append(Covering(cov.space, tuple(u for u, _ in keep), tuple(c for _, c in keep)))
    return out


def all_members(sequence: Sequence[Covering]) -> list:
    return [Member(j, U, c) for j, cov in enumerate(sequence, start=1) for U, c in zip(cov.members, cov.colors)]


def small_image_family(f: FiniteMap, sequence: Sequence[Covering], s: float) -> list:
    """Members of the union of the sequence whose image has diameter <= s."""
    fam = [M for M in all_members(sequence) if diameter(f.target, f.image(M.points)) <= s]
    covered = frozenset().union(*(M.points for M in fam)) if fam else frozenset()
    if covered != f.source.points:
        raise CoveringError("small-image family does not cover; increase depth")
    return fam


@dataclass
class MinimalFamily:
    covering: Covering
    levels: tuple


def minimal_family(family: Sequence[Member], space: FiniteMetricSpace) -> MinimalFamily:
    """Delete every member contained in another; equal copies keep the lowest level."""
    uniq: dict = {}
    for M in sorted(family, key=lambda M: M.level):
        uniq.setdefault(M.points, M)
    items = list(uniq.values())
    keep = [M for M in items if not any(M.points < N.points for N in items)]
    keep.sort(key=lambda M: (M.level, sorted(M.points)))
    cov = Covering(space, tuple(M.points for M in keep), tuple(M.color for M in keep))
    return MinimalFamily(cov, tuple(M.level for M in keep))


def mu_hat(eta: Modulus, c0: float, delta: float) -> float:
    """Largest mu with 4 eta(4 mu / (c0 delta)) <= 1, by bisection."""
    k = 4.0 / (c0 * delta)
    lo, hi = 0.0, 1.0
    while 4 * float(eta(k * hi)) <= 1:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 4 * float(eta(k * mid)) <= 1:
            lo = mid
        else:
            hi = mid
    return lo


def minimal_capacity_bound(eta: Modulus, c0: float, delta: float, r: float) -> float:
    """nu = c0 delta mu r, the local-capacity floor of minimal families."""
    return c0 * delta * mu_hat(eta, c0, delta) * r


@dataclass
class BalancedImageReport:
    s: float
    t: float
    eta_t: float
    min_image_diam: float
    mesh: float
    balance: float
    diam_ok: bool
    mesh_ok: bool
    balance_ok: bool

    @property
    def passed(self) -> bool:
        return self.diam_ok and self.mesh_ok and self.balance_ok

    def to_json(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def balanced_image_check(f: FiniteMap, minimal: MinimalFamily, s: float, eta: Modulus,
                         c0: float, delta: float, r: float, tol: float = 1e-12) -> BalancedImageReport:
    """Image members have diameter >= s / 4 eta(t), t = 4/(c0 delta r); mesh <= s;
    balance constant >= 1 / 4 eta(t)."""
    t = 4.0 / (c0 * delta * r)
    et = float(eta(t))
    W = pushforward(f, minimal.covering)
    dmin = float(W.diameters.min())
    me = mesh(W)
    bal = balance_constant(W)
    return BalancedImageReport(
        s, t, et, dmin, me, bal,
        dmin >= s / (4 * et) * (1 - tol),
        me <= s * (1 + tol),
        bal >= 1 / (4 * et) * (1 - tol),
    )


@dataclass
class ReplayRecord:
    s: float
    covering_ok: bool
    colored_ok: bool
    cap_loc_source: float
    nu: float
    cap_loc_image: float
    cap_loc_image_bound: float
    balance: BalancedImageReport
    capacity_image: float
    capacity_bound: float

    @property
    def passed(self) -> bool:
        return (self.covering_ok and self.colored_ok and self.cap_loc_source >= self.nu * (1 - 1e-12)
                and self.cap_loc_image >= self.cap_loc_image_bound * (1 - 1e-12)
                and self.balance.passed and self.capacity_image >= self.capacity_bound * (1 - 1e-12))

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "balance"}
        d["balance"] = self.balance.to_json()
        d["passed"] = self.passed
        return d


def replay(f: FiniteMap, sequence: Sequence[Covering], s_values: Sequence[float], c0: float, delta: float,
           r: float, eta: Optional[Modulus] = None) -> list:
    """Run the image-covering chain for each s and compare with the bounds.

    The capacity floor combines the image local-capacity bound with the
    balance bound: cap(W) >= [16 eta(2/nu)]^{-1} [4 eta(t)]^{-1}.
    """
    eta = eta or fit_eta(f)
    seq = prune_sequence(sequence)
    nu = minimal_capacity_bound(eta, c0, delta, r)
    out = []
    for s in s_values:
        fam = small_image_family(f, seq, s)
        mf = minimal_family(fam, f.source)
        V = mf.covering
        W = pushforward(f, V)
        cl_src = local_capacity(V)
        bal = balanced_image_check(f, mf, s, eta, c0, delta, r)
        cl_img_bound = local_capacity_bound(eta, nu)
        out.append(ReplayRecord(
            s, V.is_covering(), V.is_properly_colored(), cl_src, nu, local_capacity(W), cl_img_bound,
            bal, capacity(W), cl_img_bound / (4 * bal.eta_t),
        ))
    return out
