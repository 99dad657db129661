"""Kernel dispatch and the uniform-grid nearest-neighbour index.

The compiled extension ``tbmanifold._kernels`` is used when importable;
otherwise (or with ``TBMANIFOLD_PURE=1`` in the environment) the numpy
implementation in ``_kernels_py`` is used.  Both produce identical numbers.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("TBMANIFOLD_PURE", "") not in ("", "0"):
        raise ImportError("pure mode requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

backend = _compiled if _compiled is not None else _kernels_py
BACKEND_NAME = "cython" if _compiled is not None else "numpy"
BACKENDS = {"numpy": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled


def _pad3(a):
    a = np.asarray(a, dtype=np.float64)
    if a.shape[1] == 3:
        return np.ascontiguousarray(a)
    out = np.zeros((a.shape[0], 3))
    out[:, : a.shape[1]] = a
    return out


class GridIndex:
    """Uniform bucketing of a 2-D or 3-D point set for exact NN queries.

    The cell size targets about one cell per point over the bounding box and
    grows until the cell count is at most ``2 n``.
    """

    def __init__(self, points, impl=None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("GridIndex needs a non-empty n x D array")
        if pts.shape[1] not in (2, 3):
            raise ValueError("GridIndex supports D in {2, 3}")
        self.impl = impl or backend
        self.D = pts.shape[1]
        n = pts.shape[0]
        p3 = _pad3(pts)
        lo = p3.min(axis=0)
        ext = p3.max(axis=0) - lo
        active = ext[: self.D] > 0
        if not active.any():
            h = 1.0
        else:
            h = float(np.prod(ext[: self.D][active]) / n) ** (1.0 / active.sum())
            h = max(h, float(ext.max()) * 1e-9)
            while np.prod(np.floor(ext / h) + 1) > 2 * n:
                h *= 1.5
        dims = (np.floor(ext / h) + 1).astype(np.int64)
        idx = np.floor((p3 - lo) / h).astype(np.int64)
        idx = np.clip(idx, 0, dims - 1)
        flat = (idx[:, 0] * dims[1] + idx[:, 1]) * dims[2] + idx[:, 2]
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=int(np.prod(dims)))
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.sorted_points = np.ascontiguousarray(p3[order])
        self.origin = lo
        self.h = h
        self.dims = dims

    def query(self, queries):
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q[None, :]
        if q.shape[1] != self.D:
            raise ValueError(f"queries are {q.shape[1]}-dimensional, index is {self.D}")
        return self.impl.search_grid(self.sorted_points, self.cell_start, self.origin,
                                     self.h, self.dims, _pad3(q))


def brute_nn_sq_dists(points, queries, impl=None):
    """O(nm) nearest squared distances; any dimension."""
    points = np.asarray(points, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if points.shape[1] <= 3:
        return (impl or backend).brute_force(_pad3(points), _pad3(queries))
    out = np.empty(queries.shape[0])
    step = max(1, 4_000_000 // (points.shape[0] * points.shape[1]))
    for s in range(0, queries.shape[0], step):
        diff = queries[s:s + step, None, :] - points[None, :, :]
        out[s:s + step] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    return out


def nn_sq_dists(points, queries, impl=None):
    """Squared distance from each query to its nearest point.

    Grid search for D in {2, 3}, brute force otherwise.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] in (2, 3):
        return GridIndex(points, impl=impl).query(queries)
    return brute_nn_sq_dists(points, queries, impl=impl)


def in_convex_polygon(poly, pts, tol=1e-9, impl=None):
    poly = np.ascontiguousarray(poly, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    return (impl or backend).in_convex_polygon(poly, pts, float(tol))
