"""Distances between a true-manifold sample U and an estimate sample V.

``symmetric_ere`` averages the two directed mean squared nearest-neighbour
distances; ``hausdorff`` is the larger of the two directed sup-inf
(unsquared) distances; ``asymmetric_ere`` is the U -> V term alone, which
does not penalise an oversized estimate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError
from .kernels import nn_sq_dists
from .rng import derive_seed
from .synth import PointCloud, sample_true_manifold

DEFAULT_METRIC_M = 20_000


def _pts(c):
    return c.points if isinstance(c, PointCloud) else np.atleast_2d(np.asarray(c, dtype=float))


def _pair(U, V):
    U, V = _pts(U), _pts(V)
    if U.shape[0] == 0 or V.shape[0] == 0:
        raise ValueError("empty point cloud")
    if U.shape[1] != V.shape[1]:
        raise DimensionError(f"dimension mismatch: {U.shape[1]} vs {V.shape[1]}")
    return U, V


def nn_sq_dist(query, cloud):
    """Squared distance from one point (or each row of ``query``) to ``cloud``."""
    C = _pts(cloud)
    if C.shape[0] == 0:
        raise ValueError("empty point cloud")
    q = np.asarray(query, dtype=float)
    out = nn_sq_dists(C, np.atleast_2d(q))
    return float(out[0]) if q.ndim == 1 else out


def directed_sq(U, V):
    """Per-point squared NN distances from U to V."""
    U, V = _pair(U, V)
    return nn_sq_dists(V, U)


def asymmetric_ere(U, V):
    return float(np.mean(directed_sq(U, V)))


def symmetric_ere(U, V):
    U, V = _pair(U, V)
    return 0.5 * (float(np.mean(nn_sq_dists(V, U))) + float(np.mean(nn_sq_dists(U, V))))


def hausdorff(U, V):
    U, V = _pair(U, V)
    return float(np.sqrt(max(nn_sq_dists(V, U).max(), nn_sq_dists(U, V).max())))


@dataclass
class MetricReport:
    symmetric_ere: float
    hausdorff: float
    asymmetric_ere: float
    m_true: int
    m_est: int
    seeds: tuple

    def to_dict(self):
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        return out


def compare(U, V, seeds=(None, None)):
    """All three metrics from one pair of NN passes."""
    U, V = _pair(U, V)
    uv = nn_sq_dists(V, U)
    vu = nn_sq_dists(U, V)
    return MetricReport(
        symmetric_ere=0.5 * (float(np.mean(uv)) + float(np.mean(vu))),
        hausdorff=float(np.sqrt(max(uv.max(), vu.max()))),
        asymmetric_ere=float(np.mean(uv)),
        m_true=U.shape[0],
        m_est=V.shape[0],
        seeds=tuple(seeds),
    )


def evaluate_estimate(spec, est, m=DEFAULT_METRIC_M, seed=0):
    """Sample ``m`` points from the true manifold and from ``est`` and compare."""
    if m < 1:
        raise ValueError("m must be >= 1")
    s_true = derive_seed(seed, "true")
    s_est = derive_seed(seed, "estimate")
    U = sample_true_manifold(spec, m, s_true)
    V = est.sample(m, s_est)
    return compare(U, V, seeds=(s_true, s_est))
