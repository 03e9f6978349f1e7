"""Capacity-dimension estimation on a window of scales.

The multiplicity route works with cs-bounded coverings and their
s-multiplicity; the colored and multiplicity-bounded routes measure the best
capacity of coverings with mesh in [delta*tau, tau]. Coverings come from
Voronoi cells of greedy nets and single-linkage components, fattened.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .coverings import (
    Covering,
    CoveringError,
    capacity,
    fatten,
    is_inscribed,
    is_separated,
    lebesgue,
    mesh,
    multiplicity,
    shrink_family,
    star_merge,
)
from .metric import FiniteMetricSpace, diameter, neighborhood

EXACT_MAX_POINTS = 24
EXACT_NODE_LIMIT = 200_000
PLATEAU_FRACTION = 0.7
MIN_CELLS = 3


@dataclass(frozen=True)
class ScaleWindow:
    s_min: float
    s_max: float
    steps: int = 9

    def __post_init__(self):
        if not 0 < self.s_min < self.s_max:
            raise ValueError("window needs 0 < s_min < s_max")
        if self.steps < 1:
            raise ValueError("window needs at least one step")

    def validate(self, space: FiniteMetricSpace) -> None:
        if self.s_max > space.diam * (1 + 1e-12):
            raise ValueError("window exceeds diam Z")

    def grid(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.s_min])
        return np.geomspace(self.s_min, self.s_max, self.steps)

    def powered(self, p: float) -> "ScaleWindow":
        return ScaleWindow(self.s_min**p, self.s_max**p, self.steps)


# --- candidate partitions ---------------------------------------------------


def greedy_net(space: FiniteMetricSpace, eps: float, start: int = 0) -> list:
    """Points chosen in cyclic index order from ``start``, pairwise >= eps apart."""
    d = space.dist
    chosen: list = []
    for i in range(space.n):
        p = (start + i) % space.n
        if not chosen or d[p, chosen].min() >= eps:
            chosen.append(p)
    return chosen


def voronoi_cells(space: FiniteMetricSpace, centers: Sequence[int]) -> list:
    centers = list(centers)
    owner = np.argmin(space.dist[:, centers], axis=1)  # ties to the first center
    return [frozenset(np.flatnonzero(owner == k).tolist()) for k in range(len(centers))]


def linkage_components(space: FiniteMetricSpace, threshold: float) -> list:
    """Connected components of the graph joining points closer than threshold."""
    n = space.n
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    ii, jj = np.nonzero(np.triu(space.dist < threshold, 1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    groups: dict = {}
    for p in range(n):
        groups.setdefault(find(p), set()).add(p)
    return [frozenset(g) for g in sorted(groups.values(), key=min)]


def candidate_partitions(space: FiniteMetricSpace, s: float, factors=(1.0, 1.5, 2.0, 3.0, 4.0)) -> list:
    seen, out = set(), []
    starts = sorted({0, space.n // 3, space.n // 2})
    parts = []
    for a in factors:
        for st in starts:
            parts.append(voronoi_cells(space, greedy_net(space, a * s, st)))
        parts.append(linkage_components(space, a * s))
    parts.append([space.points])
    for p in parts:
        key = frozenset(p)
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


# --- multiplicity route ------------------------------------------------------


@dataclass
class NetCoveringResult:
    covering: Covering
    s: float
    c: float
    s_multiplicity: int
    fattened_capacity: float
    capacity_bound: float
    exact: Optional[bool] = None
    target_met: Optional[bool] = None

    @property
    def bound_holds(self) -> bool:
        return self.fattened_capacity >= self.capacity_bound - 1e-12


def _s_mult(space, members, s) -> int:
    cov = Covering(space, tuple(members))
    return multiplicity(fatten(cov, s))


def _score(space, members, s):
    cov = Covering(space, tuple(members))
    m = mesh(cov)
    return _s_mult(space, members, s), (m / s if s > 0 else math.inf)


def _finish(space, members, s, exact=None) -> NetCoveringResult:
    cov = Covering(space, tuple(members))
    fat = fatten(cov, s)
    c = mesh(cov) / s
    return NetCoveringResult(cov, s, c, multiplicity(fat), capacity(fat), 1.0 / (c + 2), exact)


def net_covering(space: FiniteMetricSpace, s: float, mult_target: Optional[int] = None,
                 c_max: float = 6.0) -> NetCoveringResult:
    """Best cs-bounded covering found among net and linkage partitions.

    Ranked by s-multiplicity, then by c. ``mult_target`` is not guaranteed;
    whether it was met is recorded on the result.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    best = None
    for members in candidate_partitions(space, s):
        mult, c = _score(space, members, s)
        if c > c_max:
            continue
        key = (mult, c)
        if best is None or key < best[0]:
            best = (key, members)
    if best is None:
        raise CoveringError("no candidate covering within c_max")
    res = _finish(space, best[1], s)
    if mult_target is not None:
        res.target_met = res.s_multiplicity <= mult_target
    return res


def exact_min_s_multiplicity(space: FiniteMetricSpace, s: float, c: float, upper: Optional[int] = None,
                             node_limit: int = EXACT_NODE_LIMIT):
    """Branch and bound over partitions into blocks of diameter <= c*s,
    minimizing the multiplicity of the s-fattened blocks.

    Returns (multiplicity, members, complete); complete is False if the node
    limit stopped the search.
    """
    n = space.n
    if n > EXACT_MAX_POINTS:
        raise ValueError("exact search limited to small spaces")
    d = space.dist
    bound = c * s * (1 + 1e-12)
    near = d < s  # near[z, p]: z lies in the s-fattening of any block containing p
    best = [upper + 1 if upper is not None else n + 1, None]
    nodes = [0]
    blocks: list = []
    fat: list = []  # boolean masks of fattened blocks
    counts = np.zeros(n, dtype=int)
    order = list(np.argsort(-d.sum(1)))

    def rec(i, cur):
        nodes[0] += 1
        if nodes[0] > node_limit:
            return
        if cur >= best[0]:
            return
        if i == n:
            best[0] = cur
            best[1] = [frozenset(b) for b in blocks]
            return
        p = order[i]
        options = []
        for k, b in enumerate(blocks):
            if d[p, b].max() <= bound:
                add = near[:, p] & ~fat[k]
                options.append((int(np.max(counts + add)) if add.any() else cur, k, add))
        options.sort(key=lambda o: o[0])
        for new_max, k, add in options:
            blocks[k].append(p)
            fat[k] = fat[k] | add
            counts[add] += 1
            rec(i + 1, max(cur, new_max))
            counts[add] -= 1
            fat[k] = fat[k] & ~add
            blocks[k].pop()
        add = near[:, p].copy()
        blocks.append([p])
        fat.append(add)
        counts[add] += 1
        rec(i + 1, max(cur, int(counts.max())))
        counts[add] -= 1
        fat.pop()
        blocks.pop()

    rec(0, 0)
    complete = nodes[0] <= node_limit
    return (best[0] if best[1] is not None else None), best[1], complete


# --- capacity routes ---------------------------------------------------------


def _fatten_radii(space: FiniteMetricSpace, tau: float) -> list:
    radii = {0.0}
    radii.update(f * tau for f in (1 / 8, 1 / 6, 1 / 4, 1 / 3))
    vals = np.unique(space.dist[space.dist > 0])
    vals = vals[vals < tau / 2][:12]
    radii.update((vals * (1 + 1e-9)).tolist())
    return sorted(radii)


def candidate_coverings(space: FiniteMetricSpace, tau: float) -> list:
    """Fattened partitions with mesh at most tau."""
    out, seen = [], set()
    for r in _fatten_radii(space, tau):
        core = max(tau - 2 * r, 0.0)
        scale = max(core / 2, 1e-300)
        for part in candidate_partitions(space, scale, factors=(1.0, 1.5, 2.0)):
            members = [neighborhood(space, U, r) if r > 0 else U for U in part]
            key = frozenset(members)
            if key in seen:
                continue
            seen.add(key)
            cov = Covering(space, tuple(members))
            if mesh(cov) <= tau * (1 + 1e-12):
                out.append(cov)
    return out


def intersection_graph(cov: Covering) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(len(cov)))
    inter = cov.mask.astype(int) @ cov.mask.T.astype(int)
    ii, jj = np.nonzero(np.triu(inter, 1))
    g.add_edges_from(zip(ii.tolist(), jj.tolist()))
    return g


GREEDY_STRATEGIES = ("largest_first", "smallest_last", "DSATUR", "independent_set", "connected_sequential_bfs")


def color_members(cov: Covering, k: int):
    """Proper coloring of the intersection graph with at most k colors, else
    (None, fewest colors found)."""
    g = intersection_graph(cov)
    if g.number_of_edges() == 0:
        return [0] * len(cov), 1
    if k >= 2 and nx.is_bipartite(g):
        col = nx.bipartite.color(g)
        return [col[v] for v in range(len(cov))], 2
    fewest = math.inf
    for strat in GREEDY_STRATEGIES:
        col = nx.greedy_color(g, strategy=strat)
        used = max(col.values()) + 1
        if used <= k:
            return [col[v] for v in range(len(cov))], used
        fewest = min(fewest, used)
    return None, fewest


@dataclass
class ColoredCoveringResult:
    ok: bool
    covering: Optional[Covering]
    colors_needed: Optional[int]
    mesh: Optional[float] = None
    capacity: Optional[float] = None
    reason: str = ""

    def to_json(self) -> dict:
        return {"ok": self.ok, "colors_needed": self.colors_needed, "mesh": self.mesh,
                "capacity": self.capacity, "reason": self.reason,
                "covering": self.covering.to_json() if self.covering is not None else None}


def colored_covering(space: FiniteMetricSpace, tau: float, m: int, delta: float) -> ColoredCoveringResult:
    """Best-capacity (m+1)-colored covering with delta*tau <= mesh <= tau."""
    if not 0 < tau <= space.diam * (1 + 1e-12) and space.diam > 0:
        raise ValueError("tau must lie in (0, diam Z]")
    best, fewest = None, math.inf
    for cov in candidate_coverings(space, tau):
        if mesh(cov) < delta * tau:
            continue
        colors, used = color_members(cov, m + 1)
        if colors is None:
            fewest = min(fewest, used)
            continue
        cap = capacity(cov)
        if best is None or cap > best[0]:
            best = (cap, cov.with_members(cov.members, colors))
    if best is None:
        if fewest is math.inf:
            return ColoredCoveringResult(False, None, None, reason="no covering in mesh window")
        return ColoredCoveringResult(False, None, int(fewest), reason=f"needs {int(fewest)} colors")
    cap, cov = best
    return ColoredCoveringResult(True, cov, len(set(cov.colors)), mesh(cov), cap)


def bounded_multiplicity_capacity(space: FiniteMetricSpace, tau: float, m: int, delta: float) -> float:
    """Best capacity among candidates with multiplicity <= m+1 and mesh in window (0 if none)."""
    best = 0.0
    for cov in candidate_coverings(space, tau):
        if mesh(cov) >= delta * tau and multiplicity(cov) <= m + 1:
            best = max(best, capacity(cov))
    return best


# --- estimator ---------------------------------------------------------------


@dataclass
class ScaleRecord:
    s: float
    c: float
    c_achieved: float
    multiplicity: int
    capacity: float
    capacity_bound: float
    exact: Optional[bool] = None
    trivial: bool = False  # c*s >= diam Z: the whole space is one admissible set


@dataclass
class CdimReport:
    window: ScaleWindow
    c_grid: tuple
    records: list = field(default_factory=list)
    estimate: Optional[int] = None
    per_c: dict = field(default_factory=dict)
    colored_estimate: Optional[int] = None
    multiplicity_estimate: Optional[int] = None
    capacity_profile: list = field(default_factory=list)

    @property
    def conclusive(self) -> bool:
        return self.estimate is not None

    def to_json(self) -> dict:
        return {
            "window": asdict(self.window),
            "c_grid": list(self.c_grid),
            "estimate": self.estimate if self.estimate is not None else "inconclusive",
            "per_c": {str(k): v for k, v in self.per_c.items()},
            "colored_estimate": self.colored_estimate,
            "multiplicity_estimate": self.multiplicity_estimate,
            "records": [asdict(r) for r in self.records],
            "capacity_profile": self.capacity_profile,
        }

    CSV_HEADER = ("s", "c", "c_achieved", "multiplicity", "capacity", "capacity_bound", "exact", "trivial")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.records:
            w.writerow([f"{r.s:.12g}", f"{r.c:.12g}", f"{r.c_achieved:.12g}", r.multiplicity,
                        f"{r.capacity:.12g}", f"{r.capacity_bound:.12g}", "" if r.exact is None else int(r.exact),
                        int(r.trivial)])
        return buf.getvalue()


def plateau(values: Sequence, fraction: float = PLATEAU_FRACTION):
    """Most common value if it occupies at least ``fraction`` of the entries."""
    if not values:
        return None
    val, cnt = Counter(values).most_common(1)[0]
    return val if cnt >= fraction * len(values) else None


def _cell(space, s, c):
    res = net_covering(space, s, c_max=c)
    mult, exact = res.s_multiplicity, None
    if space.n <= EXACT_MAX_POINTS:
        em, members, complete = exact_min_s_multiplicity(space, s, c, upper=mult)
        exact = complete
        if em is not None and em < mult:
            res = _finish(space, members, s, complete)
            mult = res.s_multiplicity
    return ScaleRecord(s, c, res.c, mult, res.fattened_capacity, res.capacity_bound, exact,
                       c * s >= space.diam * (1 - 1e-12))


def _profile_estimate(profile: list, key: str, m_max: int, floor: float):
    for m in range(m_max + 1):
        caps = [row[key][m] for row in profile]
        if caps and plateau([cap >= floor for cap in caps]) is True:
            return m
    return None


def estimate_cdim(space: FiniteMetricSpace, window: ScaleWindow, c_grid=(2.0, 3.0, 4.0, 6.0),
                  definitions: bool = False, m_max: int = 3, delta: float = 0.25,
                  capacity_floor: float = 0.1) -> CdimReport:
    """Plateau of the minimal s-multiplicity over the scale grid, minus one.

    Cells with c*s >= diam Z are trivial (one set covers) and sit outside
    the small-scale regime; they are kept in the table but not in the
    plateau. The estimate is the plateau of the largest c that has at least
    MIN_CELLS nontrivial scales; per-c plateaus are kept. With ``definitions`` the colored and multiplicity-bounded capacity
    routes are also evaluated (least m whose best capacity stays above
    capacity_floor on a plateau of scales).
    """
    c_grid = tuple(sorted(c_grid))
    report = CdimReport(window, c_grid)
    if space.n <= 1:
        report.estimate = 0
        report.per_c = {c: 0 for c in c_grid}
        return report
    window.validate(space)
    for s in window.grid():
        for c in c_grid:
            try:
                report.records.append(_cell(space, float(s), c))
            except CoveringError:
                pass
    for c in c_grid:
        cells = [r for r in report.records if r.c == c]
        vals = [r.multiplicity for r in cells if not r.trivial]
        p = plateau(vals) if len(cells) == len(window.grid()) and len(vals) >= MIN_CELLS else None
        report.per_c[c] = None if p is None else p - 1
    # largest c that still leaves enough nontrivial scales
    decided = [c for c in c_grid if report.per_c[c] is not None]
    report.estimate = report.per_c[decided[-1]] if decided else None
    if definitions:
        for tau in window.grid():
            tau = float(min(tau, space.diam))
            row = {"tau": tau, "colored": [], "multiplicity": []}
            for m in range(m_max + 1):
                res = colored_covering(space, tau, m, delta)
                row["colored"].append(res.capacity if res.ok else 0.0)
                row["multiplicity"].append(bounded_multiplicity_capacity(space, tau, m, delta))
            report.capacity_profile.append(row)
        report.colored_estimate = _profile_estimate(report.capacity_profile, "colored", m_max, capacity_floor)
        report.multiplicity_estimate = _profile_estimate(report.capacity_profile, "multiplicity", m_max, capacity_floor)
    return report


# --- separated sequences -----------------------------------------------------


class SequenceError(ValueError):
    def __init__(self, clause: str, level: int, message: str):
        super().__init__(f"clause {clause} fails at level {level}: {message}")
        self.clause = clause
        self.level = level


@dataclass
class SeparatedSequence:
    coverings: list
    r: float
    c0: float
    delta: float
    base_c0: float
    base_delta: float
    shrink_steps: list

    def check(self) -> dict:
        return check_sequence_properties(self.coverings, self.r, self.c0, self.delta)


def _base_constants(base: Sequence[Covering], r: float):
    c0 = min(lebesgue(U) / mesh(U) if mesh(U) > 0 else 1.0 for U in base)
    dl = min(mesh(U) / r**j for j, U in enumerate(base, start=1))
    return c0, dl


def validate_base(base: Sequence[Covering], r: float, m: Optional[int] = None,
                  c0: Optional[float] = None, delta: Optional[float] = None):
    """Check the colored, mesh-window and Lebesgue clauses of the input.

    ``base[i]`` is the level j = i + 1 covering, with mesh in [delta r^j, r^j].
    """
    if not base:
        raise SequenceError("i", 0, "empty base")
    mc0, mdl = _base_constants(base, r)
    c0 = mc0 if c0 is None else c0
    delta = mdl if delta is None else delta
    ncol = m + 1 if m is not None else None
    for j, U in enumerate(base, start=1):
        if not U.is_covering():
            raise SequenceError("i", j, "not a covering")
        if not U.is_properly_colored():
            raise SequenceError("i", j, "not properly colored")
        if ncol is not None and len(set(U.colors)) > ncol:
            raise SequenceError("i", j, f"uses more than {ncol} colors")
        me = mesh(U)
        if not (delta * r**j * (1 - 1e-9) <= me <= r**j * (1 + 1e-9)):
            raise SequenceError("ii", j, f"mesh {me:.6g} outside [{delta * r**j:.6g}, {r**j:.6g}]")
        if lebesgue(U) < c0 * me * (1 - 1e-9):
            raise SequenceError("iii", j, "Lebesgue number below c0 * mesh")
    if not r < c0 * delta / 4:
        raise SequenceError("r", 0, f"r must be below c0*delta/4 = {c0 * delta / 4:.6g}")
    return c0, delta


def separated_sequence(space: FiniteMetricSpace, r: float, base: Sequence[Covering],
                       c0: Optional[float] = None, delta: Optional[float] = None) -> SeparatedSequence:
    """Turn a colored Cech-type sequence into one that is separated per color.

    Per color, V_1 = U_1 and V_{k+1} = B_{-s_k}(V_k) * U_{k+1}  union  U_{k+1},
    s_k = c0*delta*r^k/4. Level j of the output collects, for each lineage
    started at level j, the intersection of its shrink-and-merge iterates.
    """
    c0, delta = validate_base(base, r, c0=c0, delta=delta)
    K = len(base)
    steps = [c0 * delta * r**k / 4 for k in range(1, K + 1)]
    colors = sorted(set().union(*(set(U.colors) for U in base)))
    # lineage[(j, idx)] = list of sets, one per stage k >= j
    out_members = [[] for _ in range(K)]
    out_colors = [[] for _ in range(K)]
    for a in colors:
        fam: list = []  # (origin level, current set, running intersection)
        for k in range(K):
            Uk = [U for U, c in zip(base[k].members, base[k].colors) if c == a]
            if k > 0:
                shrunk = shrink_family(space, [f[1] for f in fam], steps[k - 1])
                merged = star_merge(shrunk, Uk)
                fam = [(o, V, I & V) for (o, _, I), V in zip(fam, merged)]
            fam += [(k, frozenset(U), frozenset(U)) for U in Uk]
        for o, _, I in fam:
            if I:
                out_members[o].append(I)
                out_colors[o].append(a)
    coverings = [Covering(space, tuple(ms), tuple(cs)) for ms, cs in zip(out_members, out_colors)]
    half = c0 * delta / 2
    return SeparatedSequence(coverings, r, half, half, c0, delta, steps)


def check_sequence_properties(coverings: Sequence[Covering], r: float, c0: float, delta: float) -> dict:
    """Evaluate the four properties of a separated sequence; True/False per clause."""
    out = {"covering": True, "colored": True, "mesh_window": True, "lebesgue": True,
           "inscribed": True, "separated": True}
    for j, U in enumerate(coverings, start=1):
        if not U.is_covering():
            out["covering"] = False
            continue
        out["colored"] &= U.is_properly_colored()
        me = mesh(U)
        out["mesh_window"] &= bool(delta * r**j * (1 - 1e-9) <= me <= r**j * (1 + 1e-9))
        out["lebesgue"] &= bool(lebesgue(U) >= c0 * me * (1 - 1e-9))
        if j > 1:
            out["inscribed"] &= is_inscribed(U.members, coverings[j - 2].members)
    by_color: dict = {}
    for U in coverings:
        for V, c in zip(U.members, U.colors or [0] * len(U)):
            by_color.setdefault(c, []).append(V)
    out["separated"] = all(is_separated(f) for f in by_color.values())
    return out


def report_json(report: CdimReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True)
