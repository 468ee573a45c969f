"""Delaunay triangulation with deterministic tie breaking.

A valid triangulation is built by lexicographic incremental hull insertion
and then legalized with Lawson edge flips. The geometric predicates use a
floating-point filter with an exact rational fallback, so cocircular and
collinear configurations (image-rectangle corners and edge midpoints are
both) are decided exactly.

Cocircular ties are resolved toward the diagonal whose sorted vertex-index
pair is lexicographically smallest.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import TriangulationError

_FILTER = 1e-12


def orient2d(a, b, c) -> int:
    """Sign of twice the signed area of triangle abc (+1 counter-clockwise)."""
    l = (b[0] - a[0]) * (c[1] - a[1])
    r = (b[1] - a[1]) * (c[0] - a[0])
    det = l - r
    if abs(det) > _FILTER * (abs(l) + abs(r)):
        return 1 if det > 0 else -1
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (a[0], a[1], b[0], b[1], c[0], c[1]))
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def incircle(a, b, c, d) -> int:
    """+1 if d is strictly inside the circumcircle of counter-clockwise abc, 0 if on it."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = alift * (bdx * cdy - bdy * cdx)
    t2 = blift * (cdx * ady - cdy * adx)
    t3 = clift * (adx * bdy - ady * bdx)
    det = t1 + t2 + t3
    mag = (alift * (abs(bdx * cdy) + abs(bdy * cdx))
           + blift * (abs(cdx * ady) + abs(cdy * adx))
           + clift * (abs(adx * bdy) + abs(ady * bdx)))
    if abs(det) > _FILTER * mag:
        return 1 if det > 0 else -1
    a, b, c, d = ([Fraction(p[0]), Fraction(p[1])] for p in (a, b, c, d))
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    det = ((adx * adx + ady * ady) * (bdx * cdy - bdy * cdx)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - cdy * adx)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx))
    return (det > 0) - (det < 0)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices (n, 2) and counter-clockwise index triples (m, 3)."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __len__(self):
        return len(self.triangles)

    def signed_areas(self, vertices: np.ndarray | None = None) -> np.ndarray:
        v = self.vertices if vertices is None else np.asarray(vertices, dtype=np.float64)
        p, q, s = v[self.triangles[:, 0]], v[self.triangles[:, 1]], v[self.triangles[:, 2]]
        return 0.5 * ((q[:, 0] - p[:, 0]) * (s[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (s[:, 0] - p[:, 0]))


def _check_input(pts: list[tuple[float, float]]):
    if len(pts) < 3:
        raise TriangulationError(f"need at least 3 points, got {len(pts)}")
    seen: dict[tuple[float, float], int] = {}
    for i, p in enumerate(pts):
        if not all(np.isfinite(p)):
            raise TriangulationError(f"point {i} is not finite")
        if p in seen:
            raise TriangulationError(f"duplicate points at indices {seen[p]} and {i}")
        seen[p] = i


def _initial_triangulation(pts):
    """Any triangulation of the point set, as a list of ccw index triples."""
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    k = 2
    while k < len(order) and orient2d(pts[order[0]], pts[order[1]], pts[order[k]]) == 0:
        k += 1
    if k == len(order):
        raise TriangulationError("all points are collinear")

    apex = order[k]
    chain = order[:k]
    tris = []
    side = orient2d(pts[chain[0]], pts[chain[1]], pts[apex])
    for a, b in zip(chain, chain[1:]):
        tris.append((a, b, apex) if side > 0 else (b, a, apex))
    # hull as a ccw cycle of indices
    hull = chain + [apex] if side > 0 else [chain[0], apex] + chain[:0:-1]

    for idx in order[k + 1:]:
        p = pts[idx]
        n = len(hull)
        visible = [orient2d(pts[hull[j]], pts[hull[(j + 1) % n]], p) < 0 for j in range(n)]
        if not any(visible):
            raise TriangulationError("internal error: inserted point sees no hull edge")
        # rotate so the visible run is contiguous from position 0
        start = next(j for j in range(n) if visible[j] and not visible[j - 1])
        hull = hull[start:] + hull[:start]
        visible = visible[start:] + visible[:start]
        run = 0
        while run < n and visible[run]:
            run += 1
        for j in range(run):
            a, b = hull[j], hull[(j + 1) % n]
            tris.append((a, idx, b))
        hull = [hull[0], idx] + hull[run:]
    return tris


def _legalize(pts, tris):
    tris = [list(t) for t in tris]
    owner: dict[tuple[int, int], int] = {}
    for ti, t in enumerate(tris):
        for e in range(3):
            owner[(t[e], t[(e + 1) % 3])] = ti

    def opposite(ti, u, v):
        t = tris[ti]
        return next(w for w in t if w != u and w != v)

    stack = sorted({(min(u, v), max(u, v)) for (u, v) in owner if (v, u) in owner}, reverse=True)
    budget = 200 * len(pts) ** 2 + 1000
    while stack:
        budget -= 1
        if budget < 0:
            raise TriangulationError("edge flipping failed to converge")
        u, v = stack.pop()
        if (u, v) not in owner or (v, u) not in owner:
            continue
        t1, t2 = owner[(u, v)], owner[(v, u)]
        w, x = opposite(t1, u, v), opposite(t2, v, u)
        s = incircle(pts[u], pts[v], pts[w], pts[x])
        if s < 0:
            continue
        if s == 0 and (min(w, x), max(w, x)) >= (u, v):
            continue
        # t1 = (u, v, w) and t2 = (v, u, x) become (u, x, w) and (x, v, w)
        for e in ((u, v), (v, w), (w, u), (v, u), (u, x), (x, v)):
            owner.pop(e, None)
        tris[t1] = [u, x, w]
        tris[t2] = [x, v, w]
        for ti in (t1, t2):
            t = tris[ti]
            for e in range(3):
                owner[(t[e], t[(e + 1) % 3])] = ti
        for a, b in ((u, x), (x, v), (v, w), (w, u)):
            stack.append((min(a, b), max(a, b)))
    return tris


def _canonical(tri):
    i = tri.index(min(tri))
    return tuple(tri[i:] + tri[:i])


def delaunay(points) -> TriangleMesh:
    """Delaunay triangulation of a 2-D point list.

    Raises TriangulationError for fewer than 3 points, duplicates (naming
    both indices) or an all-collinear input. Output is deterministic: each
    triangle is counter-clockwise starting at its smallest vertex index,
    and triangles are sorted.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise TriangulationError("points must be an (n, 2) array")
    pts = [(float(x), float(y)) for x, y in arr]
    _check_input(pts)
    tris = _legalize(pts, _initial_triangulation(pts))
    tris = sorted(_canonical(list(t)) for t in tris)
    return TriangleMesh(arr.copy(), np.array(tris, dtype=np.int64).reshape(-1, 3))
