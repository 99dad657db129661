# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: exact grid nearest-neighbour search, brute-force
nearest-neighbour search and convex polygon containment.

Squared distances are accumulated as ``dx*dx + dy*dy + dz*dz`` in that
order, matching the numpy fallback bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


cdef inline Py_ssize_t _imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


cdef inline Py_ssize_t _iabs(Py_ssize_t a) nogil:
    return a if a >= 0 else -a


cdef inline double _scan_cell(const double[:, ::1] spts, const long long[::1] start,
                              Py_ssize_t cell, double qx, double qy, double qz,
                              double best) nogil:
    cdef Py_ssize_t j
    cdef double dx, dy, dz, dd
    for j in range(start[cell], start[cell + 1]):
        dx = qx - spts[j, 0]
        dy = qy - spts[j, 1]
        dz = qz - spts[j, 2]
        dd = dx * dx
        dd += dy * dy
        dd += dz * dz
        if dd < best:
            best = dd
    return best


def search_grid(const double[:, ::1] spts, const long long[::1] cell_start,
                const double[::1] origin, double h, const long long[::1] dims,
                const double[:, ::1] queries):
    """Exact squared distance from every query to its nearest grid point.

    ``spts`` are the cloud points (padded to three columns) sorted by cell;
    points of cell ``c`` occupy ``spts[cell_start[c]:cell_start[c + 1]]``
    with ``c = (x * gy + y) * gz + z``.
    """
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t gx = dims[0], gy = dims[1], gz = dims[2]
    cdef Py_ssize_t i, r, rmin, rmax, cx, cy, cz, x, y, z, ax, ay, x0, x1, y0, y1, z0, z1
    cdef double qx, qy, qz, best, bound
    cdef double margin = 1.0 - 1e-9
    out = np.empty(nq, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for i in range(nq):
            qx = queries[i, 0]
            qy = queries[i, 1]
            qz = queries[i, 2]
            cx = <Py_ssize_t>floor((qx - origin[0]) / h)
            cy = <Py_ssize_t>floor((qy - origin[1]) / h)
            cz = <Py_ssize_t>floor((qz - origin[2]) / h)
            rmin = _imax(_imax(_imax(0, -cx), cx - (gx - 1)),
                         _imax(_imax(_imax(0, -cy), cy - (gy - 1)),
                               _imax(_imax(0, -cz), cz - (gz - 1))))
            rmax = _imax(_imax(_imax(cx, gx - 1 - cx), _imax(cy, gy - 1 - cy)),
                         _imax(cz, gz - 1 - cz))
            best = INFINITY
            r = rmin
            while r <= rmax:
                x0 = _imax(cx - r, 0)
                x1 = _imin(cx + r, gx - 1)
                y0 = _imax(cy - r, 0)
                y1 = _imin(cy + r, gy - 1)
                for x in range(x0, x1 + 1):
                    ax = _iabs(x - cx)
                    for y in range(y0, y1 + 1):
                        ay = _iabs(y - cy)
                        if ax == r or ay == r:
                            z0 = _imax(cz - r, 0)
                            z1 = _imin(cz + r, gz - 1)
                            for z in range(z0, z1 + 1):
                                best = _scan_cell(spts, cell_start, (x * gy + y) * gz + z,
                                                  qx, qy, qz, best)
                        else:
                            z = cz - r
                            if 0 <= z < gz:
                                best = _scan_cell(spts, cell_start, (x * gy + y) * gz + z,
                                                  qx, qy, qz, best)
                            z = cz + r
                            if r > 0 and 0 <= z < gz:
                                best = _scan_cell(spts, cell_start, (x * gy + y) * gz + z,
                                                  qx, qy, qz, best)
                # unvisited cells are at least r*h away
                bound = r * h * margin
                if best <= bound * bound:
                    break
                r += 1
            res[i] = best
    return out


def brute_force(const double[:, ::1] points, const double[:, ::1] queries):
    """O(nm) exact squared nearest-neighbour distances (three padded columns)."""
    cdef Py_ssize_t nq = queries.shape[0], n = points.shape[0]
    cdef Py_ssize_t i, j
    cdef double qx, qy, qz, dx, dy, dz, dd, best
    out = np.empty(nq, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for i in range(nq):
            qx = queries[i, 0]
            qy = queries[i, 1]
            qz = queries[i, 2]
            best = INFINITY
            for j in range(n):
                dx = qx - points[j, 0]
                dy = qy - points[j, 1]
                dz = qz - points[j, 2]
                dd = dx * dx
                dd += dy * dy
                dd += dz * dz
                if dd < best:
                    best = dd
            res[i] = best
    return out


def in_convex_polygon(const double[:, ::1] poly, const double[:, ::1] pts, double tol):
    """Mask of points inside a counter-clockwise convex polygon.

    A point passes when its signed distance to every edge line is >= -tol.
    """
    cdef Py_ssize_t m = poly.shape[0], n = pts.shape[0]
    cdef Py_ssize_t i, e, f
    cdef double px, py, cross
    cdef cnp.uint8_t ok
    edges = np.empty((m, 3))
    cdef double[:, ::1] ed = edges
    for e in range(m):
        f = e + 1 if e + 1 < m else 0
        ed[e, 0] = poly[f, 0] - poly[e, 0]
        ed[e, 1] = poly[f, 1] - poly[e, 1]
        ed[e, 2] = -tol * (ed[e, 0] * ed[e, 0] + ed[e, 1] * ed[e, 1]) ** 0.5
    out = np.empty(n, dtype=np.bool_)
    cdef cnp.uint8_t[::1] res = out.view(np.uint8)
    with nogil:
        for i in range(n):
            px = pts[i, 0]
            py = pts[i, 1]
            ok = 1
            for e in range(m):
                cross = ed[e, 0] * (py - poly[e, 1]) - ed[e, 1] * (px - poly[e, 0])
                if cross < ed[e, 2]:
                    ok = 0
                    break
            res[i] = ok
    return out
