from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vamorph.errors import TriangulationError
from vamorph.triangulation import delaunay, incircle, orient2d


def strictly_inside_circumcircle(a, b, c, d):
    """Exact test with rationals: circumcentre from the perpendicular bisectors."""
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = [tuple(map(Fraction, p)) for p in (a, b, c, d)]
    den = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / den
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / den
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return (dx - ux) ** 2 + (dy - uy) ** 2 < r2


def empty_circumcircles(points, tris):
    for t in tris:
        a, b, c = (points[i] for i in t)
        for j, p in enumerate(points):
            if j not in t and strictly_inside_circumcircle(a, b, c, p):
                return False
    return True


def hull_area(points):
    """Monotone-chain convex hull + shoelace."""
    pts = sorted(map(tuple, points))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return 0.5 * abs(sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1])))


def test_single_triangle():
    m = delaunay([[0, 0], [4, 0], [1, 3]])
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_square_tie_break():
    m = delaunay([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert len(m) == 2
    # cocircular: diagonal 0-2 beats 1-3
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]
    m = delaunay([[1, 0], [0, 0], [0, 1], [1, 1]])
    # here the diagonals are (0, 2) and (1, 3); (0, 2) again wins
    edges = {tuple(sorted((t[i], t[(i + 1) % 3]))) for t in m.triangles.tolist() for i in range(3)}
    assert (0, 2) in edges and (1, 3) not in edges


def test_errors():
    with pytest.raises(TriangulationError, match="collinear"):
        delaunay([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(TriangulationError, match="indices 1 and 3"):
        delaunay([[0, 0], [1, 0], [0, 1], [1, 0]])
    with pytest.raises(TriangulationError):
        delaunay([[0, 0], [1, 0]])


def test_twenty_random_points(rng):
    pts = rng.uniform(0, 100, (20, 2))
    m = delaunay(pts)
    assert empty_circumcircles(pts, m.triangles)
    assert (m.signed_areas() > 0).all()


def test_rectangle_frame_with_midpoints():
    # boundary pattern used by the warps: 4 cocircular corners + collinear midpoints
    w, h = 127, 127
    pts = [[0, 0], [w, 0], [w, h], [0, h], [w / 2, 0], [w, h / 2], [w / 2, h], [0, h / 2], [60.3, 61.7]]
    m = delaunay(pts)
    assert m.signed_areas().sum() == pytest.approx(w * h, rel=1e-12)
    assert empty_circumcircles(pts, m.triangles)


def test_deterministic_and_canonical(rng):
    pts = rng.uniform(0, 50, (30, 2))
    a, b = delaunay(pts), delaunay(pts.copy())
    assert np.array_equal(a.triangles, b.triangles)
    assert all(t[0] == min(t) for t in a.triangles.tolist())
    assert a.triangles.tolist() == sorted(a.triangles.tolist())


def test_predicates_exact_on_near_degenerate():
    a, b = (0.1, 0.1), (0.3, 0.3)
    assert orient2d(a, b, (0.7, 0.7)) == 0
    assert orient2d((0, 0), (1, 0), (0.5, 1e-300)) == 1
    assert incircle((0, 0), (1, 0), (1, 1), (0, 1)) == 0
    assert incircle((0, 0), (1, 0), (1, 1), (0.5, 0.5)) == 1


points_strategy = st.lists(
    st.tuples(st.integers(0, 12), st.integers(0, 12)), min_size=3, max_size=30, unique=True
).filter(lambda ps: len({(y - ps[0][1]) * (ps[1][0] - ps[0][0]) - (x - ps[0][0]) * (ps[1][1] - ps[0][1])
                          for x, y in ps}) > 1)


@settings(max_examples=150, deadline=None)
@given(points_strategy)
def test_lattice_points_property(points):
    # small integer lattice: lots of cocircular and collinear configurations
    pts = np.array(points, dtype=float)
    m = delaunay(pts)
    assert (m.signed_areas() > 0).all()
    assert m.signed_areas().sum() == pytest.approx(hull_area(pts), rel=1e-9)
    assert empty_circumcircles(pts, m.triangles)
    # every edge is used by at most two triangles
    edges = {}
    for t in m.triangles.tolist():
        for i in range(3):
            e = (t[i], t[(i + 1) % 3])
            assert e not in edges
            edges[e] = 1
