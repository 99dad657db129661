"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and bit-identical results; used when the extension is not
built or when ``TBMANIFOLD_PURE=1``.
"""

import numpy as np

_CHUNK = 2048
# ring-by-ring search gives way to brute force past this many rings
_MAX_RINGS = 48


def _sq(q, p):
    dx = q[:, None, 0] - p[None, :, 0]
    dy = q[:, None, 1] - p[None, :, 1]
    dz = q[:, None, 2] - p[None, :, 2]
    dd = dx * dx
    dd += dy * dy
    dd += dz * dz
    return dd


def brute_force(points, queries):
    points = np.asarray(points)
    queries = np.asarray(queries)
    out = np.empty(queries.shape[0])
    step = max(1, 4_000_000 // max(points.shape[0], 1))
    for s in range(0, queries.shape[0], step):
        out[s:s + step] = _sq(queries[s:s + step], points).min(axis=1)
    return out


def _ring_offsets(r, flat_z):
    rng = np.arange(-r, r + 1)
    if flat_z:
        ox, oy = np.meshgrid(rng, rng, indexing="ij")
        oz = np.zeros_like(ox)
    else:
        ox, oy, oz = np.meshgrid(rng, rng, rng, indexing="ij")
    off = np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)
    return off[np.abs(off).max(axis=1) == r]


def search_grid(spts, cell_start, origin, h, dims, queries):
    spts = np.asarray(spts)
    cell_start = np.asarray(cell_start)
    dims = np.asarray(dims)
    queries = np.asarray(queries)
    nq = queries.shape[0]
    cells = np.floor((queries - origin) / h).astype(np.int64)
    rmin = np.maximum(np.maximum(-cells, cells - (dims - 1)), 0).max(axis=1)
    rmax = np.maximum(cells, dims - 1 - cells).max(axis=1)
    best = np.full(nq, np.inf)
    done = np.zeros(nq, dtype=bool)

    far = rmin > 2
    if far.any():
        n = cell_start[-1]
        best[far] = brute_force(spts[:n], queries[far])
        done[far] = True

    # 2-D rings suffice only when every query sits in the single z layer
    flat_z = dims[2] == 1 and not np.any(cells[:, 2])
    strides = np.array([dims[1] * dims[2], dims[2], 1])
    r = 0
    while not done.all():
        if r > _MAX_RINGS:
            rest = ~done
            best[rest] = brute_force(spts, queries[rest])
            break
        act = np.flatnonzero(~done & (rmin <= r))
        for off in _ring_offsets(r, flat_z):
            c = cells[act] + off
            ok = np.all((c >= 0) & (c < dims), axis=1)
            if not ok.any():
                continue
            qi = act[ok]
            flat = c[ok] @ strides
            lo = cell_start[flat]
            cnt = cell_start[flat + 1] - lo
            has = cnt > 0
            if not has.any():
                continue
            qi, lo, cnt = qi[has], lo[has], cnt[has]
            owner = np.repeat(qi, cnt)
            base = np.repeat(lo - np.cumsum(cnt) + cnt, cnt)
            pidx = base + np.arange(owner.size)
            q = queries[owner]
            p = spts[pidx]
            dx = q[:, 0] - p[:, 0]
            dy = q[:, 1] - p[:, 1]
            dz = q[:, 2] - p[:, 2]
            dd = dx * dx
            dd += dy * dy
            dd += dz * dz
            np.minimum.at(best, owner, dd)
        bound = r * h * (1.0 - 1e-9)
        finished = (best <= bound * bound) | (rmax <= r)
        done[act[finished[act]]] = True
        r += 1
    return best


def in_convex_polygon(poly, pts, tol):
    poly = np.asarray(poly)
    pts = np.asarray(pts)
    e0 = poly
    e1 = np.roll(poly, -1, axis=0)
    ex = e1[:, 0] - e0[:, 0]
    ey = e1[:, 1] - e0[:, 1]
    length = (ex * ex + ey * ey) ** 0.5
    ok = np.ones(pts.shape[0], dtype=bool)
    for s in range(0, pts.shape[0], _CHUNK * 8):
        p = pts[s:s + _CHUNK * 8]
        cross = ex[None, :] * (p[:, None, 1] - e0[None, :, 1]) \
            - ey[None, :] * (p[:, None, 0] - e0[None, :, 0])
        ok[s:s + _CHUNK * 8] = np.all(cross >= -tol * length[None, :], axis=1)
    return ok
