"""Independent brute-force re-implementations, written from the definitions
with plain loops and no shared code with the package."""

import math
from itertools import combinations


def diam(d, U):
    return max((d[a][b] for a in U for b in U), default=0.0)


def mesh(d, members):
    return max((diam(d, U) for U in members), default=0.0)


def mesh_at(d, members, z):
    return max(diam(d, U) for U in members if z in U)


def depth(d, U, z):
    n = len(d)
    outside = [w for w in range(n) if w not in U]
    if not outside:
        return max(max(row) for row in d)
    return min(d[z][w] for w in outside)


def lebesgue_at(d, members, z):
    return min(max(depth(d, U, z) for U in members if z in U), mesh_at(d, members, z))


def lebesgue(d, members):
    return min(lebesgue_at(d, members, z) for z in range(len(d)))


def multiplicity(members, n):
    return max(sum(1 for U in members if z in U) for z in range(n))


def capacity(d, members):
    m = mesh(d, members)
    return 1.0 if m == 0 else lebesgue(d, members) / m


def local_capacity(d, members):
    out = 1.0
    for z in range(len(d)):
        M = mesh_at(d, members, z)
        if M > 0:
            out = min(out, lebesgue_at(d, members, z) / M)
    return out


def shrink(d, U, s):
    n = len(d)
    return {z for z in U if all(d[z][w] > s for w in range(n) if w not in U)}


def fatten(d, U, r):
    return {z for z in range(len(d)) if any(d[z][u] < r for u in U)}


def separated(family):
    for A, B in combinations(family, 2):
        if A & B and not (A <= B or B <= A):
            return False
    return True


def hyperbolic_chord_mp(t1, t2, alpha, mp):
    """Two-radius hyperbolic distance at high precision (law of cosines)."""
    t1, t2, alpha = mp.mpf(t1), mp.mpf(t2), mp.mpf(alpha)
    c = mp.cosh(t1) * mp.cosh(t2) - mp.sinh(t1) * mp.sinh(t2) * mp.cos(alpha)
    return mp.acosh(max(c, mp.mpf(1)))


def is_close(a, b, rel=1e-12, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
