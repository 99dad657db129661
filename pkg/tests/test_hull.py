import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbmanifold.errors import UnsupportedDimension
from tbmanifold.hull import convex_hull_latent, monotone_chain, polygon_area


def brute_hull_vertices(points):
    """Vertices of the hull by exhaustive orientation tests.

    An ordered pair (p, q) is a counter-clockwise hull edge when every other
    point is strictly left of p->q or lies strictly inside the segment.
    """
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return set(pts)
    verts = set()
    for p, q in itertools.permutations(pts, 2):
        ok = True
        for r in pts:
            if r == p or r == q:
                continue
            cr = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
            if cr < 0:
                ok = False
                break
            if cr == 0:
                t = (r[0] - p[0]) * (q[0] - p[0]) + (r[1] - p[1]) * (q[1] - p[1])
                if not 0 < t < (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2:
                    ok = False
                    break
        if ok:
            verts.update((p, q))
    return verts


def test_examples():
    h = convex_hull_latent(np.array([[0, 0], [1, 0], [0, 1], [0.25, 0.25]]), 2)
    assert set(map(tuple, h)) == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)}
    np.testing.assert_array_equal(convex_hull_latent(np.array([3.0, -1.0, 2.0]), 1), [-1, 3])
    sq = convex_hull_latent(np.array([[0, 0], [1, 0], [1, 1], [0, 1]]), 2)
    assert len(sq) == 4 and polygon_area(sq) == 1.0


def test_collinear_points_dropped():
    h = monotone_chain([[0, 0], [1, 0], [2, 0], [2, 2], [1, 1], [0, 2], [1, 2]])
    assert set(map(tuple, h)) == {(0, 0), (2, 0), (2, 2), (0, 2)}


def test_unsupported_dimension_and_empty():
    with pytest.raises(UnsupportedDimension):
        convex_hull_latent(np.zeros((5, 3)), 3)
    assert convex_hull_latent(np.zeros((0, 2)), 2) is None


def _check(points):
    h = monotone_chain(points)
    assert set(map(tuple, h)) == brute_hull_vertices(np.asarray(points, dtype=float))
    if len(h) >= 3:
        # strictly convex, counter-clockwise, simple
        for i in range(len(h)):
            o, a, b = h[i], h[(i + 1) % len(h)], h[(i + 2) % len(h)]
            assert (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) > 0
        assert polygon_area(h) > 0
        # every input point inside
        from tbmanifold.kernels import in_convex_polygon
        assert in_convex_polygon(h, np.asarray(points, dtype=float), 1e-9).all()


# small integer grid: exercises duplicates and collinear triples exactly
int_sets = st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=12)
# non-integer coordinates on a 1/64 grid: every orientation product is exact in
# double precision, so chain and oracle see the same signs
dyadic = st.integers(-640, 640).map(lambda k: k / 64.0)
float_sets = st.lists(st.tuples(dyadic, dyadic), min_size=1, max_size=12)


@settings(max_examples=500)
@given(int_sets)
def test_oracle_integer_sets(points):
    _check([(float(x), float(y)) for x, y in points])


@settings(max_examples=500)
@given(float_sets)
def test_oracle_float_sets(points):
    _check(points)
