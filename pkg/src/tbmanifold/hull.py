"""Convex hulls of latent point sets (d = 1 intervals, d = 2 polygons)."""

import numpy as np

from .errors import UnsupportedDimension


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points):
    """Counter-clockwise hull vertices of 2-D points (Andrew's monotone chain).

    Collinear boundary points are dropped.  Returns an ``(h, 2)`` array; a
    degenerate input yields 1 or 2 vertices.
    """
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def polygon_area(vertices):
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_hull_latent(Y, d):
    """Hull of latent points: ``[min, max]`` for d=1, CCW vertices for d=2.

    Returns None for an empty set.
    """
    if d not in (1, 2):
        raise UnsupportedDimension(f"convex hulls are implemented for d in {{1, 2}}, got {d}")
    Y = np.asarray(Y, dtype=float).reshape(-1, d)
    if Y.shape[0] == 0:
        return None
    if d == 1:
        return np.array([Y[:, 0].min(), Y[:, 0].max()])
    return monotone_chain(Y)
