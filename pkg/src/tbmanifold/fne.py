"""Faithful neighborhood estimation and the union-of-neighborhoods estimate.

Each tangent frame gets a bounded region of its latent coordinates:

* ``m1`` - convex hull of the latent images of the frame's assigned points;
* ``m2`` - superlevel set of a Gaussian mixture fitted to those latent images;
* ``m3`` - points of the tangent plane where an ambient density exceeds a
  global threshold.

Density regions are intersected with a sampling box (bounding box of the
assigned latent points grown by ``margin`` of its extent per side) so every
region is bounded and can be rejection-sampled.  The manifold estimate is the
union of the mapped regions; neighborhoods are sampled in proportion to their
latent d-volume, with overlaps counted twice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .charts import Chart
from .errors import EmptyEstimate, PathologicalThreshold, UnsupportedDimension
from .gmm import EmConfig, GmmModel, fit_gmm
from .hull import convex_hull_latent, polygon_area
from .rng import derive_seed, make_rng
from .synth import PointCloud

HULL_TOL = 1e-9
BOX_TOL = 1e-9
MIN_ACCEPT = 1e-4
PROBE_SIZE = 4096
DEFAULT_MARGIN = 0.25


class HullNeighborhood:
    kind = "hull"

    def __init__(self, chart, hull, frame=-1):
        self.chart = chart
        self.frame = frame
        self.hull = np.asarray(hull, dtype=float)
        if chart.d == 1:
            self.box_lo = self.hull[:1].copy()
            self.box_hi = self.hull[1:].copy()
            self.volume = float(self.hull[1] - self.hull[0])
        else:
            self.box_lo = self.hull.min(axis=0)
            self.box_hi = self.hull.max(axis=0)
            self.volume = polygon_area(self.hull)

    def contains(self, Y, tol=HULL_TOL):
        Y = np.asarray(Y, dtype=float).reshape(-1, self.chart.d)
        if self.chart.d == 1:
            return (Y[:, 0] >= self.hull[0] - tol) & (Y[:, 0] <= self.hull[1] + tol)
        return kernels.in_convex_polygon(self.hull, Y, tol)

    def draw(self, rng, count):
        if self.chart.d == 1:
            return rng.uniform(self.hull[0], self.hull[1], (count, 1))
        box_area = float(np.prod(self.box_hi - self.box_lo))
        return _rejection(self, rng, count, self.volume / box_area if box_area > 0 else 0.0)

    def region_dict(self):
        return {"type": "interval" if self.chart.d == 1 else "polygon",
                "hull": self.hull.tolist()}


class _DensityNeighborhood:
    """Superlevel-set region intersected with a latent sampling box."""

    def __init__(self, chart, log_threshold, box_lo, box_hi, frame=-1):
        self.chart = chart
        self.frame = frame
        self.log_threshold = float(log_threshold)
        self.box_lo = np.asarray(box_lo, dtype=float)
        self.box_hi = np.asarray(box_hi, dtype=float)
        self.acceptance = float("nan")
        self.volume = float("nan")

    @property
    def box_volume(self):
        return float(np.prod(self.box_hi - self.box_lo))

    def log_density_latent(self, Y):
        raise NotImplementedError

    def in_box(self, Y):
        return np.all((Y >= self.box_lo - BOX_TOL) & (Y <= self.box_hi + BOX_TOL), axis=1)

    def contains(self, Y, tol=None):
        Y = np.asarray(Y, dtype=float).reshape(-1, self.chart.d)
        inside = self.in_box(Y)
        if inside.any():
            inside[inside] = self.log_density_latent(Y[inside]) > self.log_threshold
        return inside

    def probe(self, rng, size=PROBE_SIZE):
        """Estimate acceptance rate and region volume from a uniform box sample."""
        Y = rng.uniform(self.box_lo, self.box_hi, (size, self.chart.d))
        self.acceptance = float(np.mean(self.log_density_latent(Y) > self.log_threshold))
        self.volume = self.acceptance * self.box_volume
        return self.acceptance

    def draw(self, rng, count):
        return _rejection(self, rng, count, self.acceptance)


class LatentDensityNeighborhood(_DensityNeighborhood):
    kind = "latent_density"

    def __init__(self, chart, latent_density, log_threshold, box_lo, box_hi, frame=-1):
        super().__init__(chart, log_threshold, box_lo, box_hi, frame)
        self.latent_density = latent_density

    def log_density_latent(self, Y):
        return self.latent_density.log_density(Y)

    def region_dict(self):
        return {"type": "latent_density", "gmm": self.latent_density.to_dict(),
                "log_threshold": self.log_threshold,
                "box": [self.box_lo.tolist(), self.box_hi.tolist()],
                "acceptance": self.acceptance}


class AmbientDensityNeighborhood(_DensityNeighborhood):
    kind = "ambient_density"

    def __init__(self, chart, ambient_density, log_threshold, box_lo, box_hi, frame=-1):
        super().__init__(chart, log_threshold, box_lo, box_hi, frame)
        self.ambient_density = ambient_density

    def log_density_latent(self, Y):
        return self.ambient_density.log_density(self.chart.inverse(Y))

    def region_dict(self):
        return {"type": "ambient_density", "log_threshold": self.log_threshold,
                "box": [self.box_lo.tolist(), self.box_hi.tolist()],
                "acceptance": self.acceptance}


def _rejection(nbhd, rng, count, accept_hint):
    """Uniform latent samples from ``nbhd`` by rejection from its box."""
    out = []
    have = 0
    drawn = accepted = 0
    rate = accept_hint if accept_hint and accept_hint > 0 else 0.5
    while have < count:
        need = count - have
        batch = int(min(max(math.ceil(1.2 * need / max(rate, MIN_ACCEPT)) + 16, 256), 2_000_000))
        Y = rng.uniform(nbhd.box_lo, nbhd.box_hi, (batch, nbhd.chart.d))
        keep = Y[nbhd.contains(Y)]
        drawn += batch
        accepted += len(keep)
        if drawn >= 10_000 and accepted / drawn < MIN_ACCEPT:
            raise PathologicalThreshold(
                f"acceptance {accepted}/{drawn} in neighborhood of frame {nbhd.frame}")
        out.append(keep[:need])
        have += min(len(keep), need)
        if accepted:
            rate = accepted / drawn
    return np.concatenate(out, axis=0) if out else np.empty((0, nbhd.chart.d))


@dataclass
class ManifoldEstimate:
    method: str
    neighborhoods: list
    weights: np.ndarray
    ambient_density: GmmModel | None = None

    @property
    def d(self):
        return self.neighborhoods[0].chart.d

    @property
    def D(self):
        return self.neighborhoods[0].chart.D

    def __len__(self):
        return len(self.neighborhoods)

    def sample(self, m, seed, return_labels=False):
        return sample_estimate(self, m, seed, return_labels)

    def contains(self, X, tol=1e-8):
        return membership(self, X, tol)

    def to_dict(self):
        out = {
            "method": self.method,
            "d": self.d,
            "D": self.D,
            "weights": [float(w) for w in self.weights],
            "neighborhoods": [
                {"frame": int(nb.frame), "chart": nb.chart.to_dict(), "region": nb.region_dict()}
                for nb in self.neighborhoods
            ],
        }
        if self.ambient_density is not None:
            out["ambient_density"] = self.ambient_density.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        ambient = None
        if data.get("ambient_density") is not None:
            ambient = GmmModel.from_dict(data["ambient_density"])
        nbhds = []
        for item in data["neighborhoods"]:
            chart = Chart.from_dict(item["chart"])
            reg = item["region"]
            if reg["type"] in ("interval", "polygon"):
                nb = HullNeighborhood(chart, np.array(reg["hull"]), item["frame"])
            else:
                lo, hi = (np.array(b) for b in reg["box"])
                if reg["type"] == "latent_density":
                    nb = LatentDensityNeighborhood(chart, GmmModel.from_dict(reg["gmm"]),
                                                   reg["log_threshold"], lo, hi, item["frame"])
                else:
                    nb = AmbientDensityNeighborhood(chart, ambient, reg["log_threshold"],
                                                    lo, hi, item["frame"])
                nb.acceptance = reg["acceptance"]
                nb.volume = nb.acceptance * nb.box_volume
            nbhds.append(nb)
        return cls(data["method"], nbhds, np.array(data["weights"], dtype=float), ambient)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _finish(method, nbhds, ambient=None):
    nbhds = [nb for nb in nbhds if nb.volume > 0]
    if not nbhds:
        raise EmptyEstimate(f"{method}: every neighborhood is empty")
    vol = np.array([nb.volume for nb in nbhds])
    return ManifoldEstimate(method, nbhds, vol / vol.sum(), ambient)


def _points(X):
    return X.points if isinstance(X, PointCloud) else np.asarray(X, dtype=float)


def frame_latents(bundle, X):
    """Latent images ``Y_i`` of each frame's assigned points (None if < d+1)."""
    pts = _points(X)
    out = []
    for i, chart in enumerate(bundle.frames):
        idx = bundle.assignment.members(i)
        out.append(chart.forward(pts[idx]) if idx.size >= chart.d + 1 else None)
    return out


def estimate_m1(bundle, X):
    """Convex hull of each frame's latent points, mapped back by the inverse chart."""
    if bundle.d not in (1, 2):
        raise UnsupportedDimension(f"hull neighborhoods need d in {{1, 2}}, got {bundle.d}")
    nbhds = []
    for i, (chart, Y) in enumerate(zip(bundle.frames, frame_latents(bundle, X))):
        if Y is None:
            continue
        nbhds.append(HullNeighborhood(chart, convex_hull_latent(Y, chart.d), i))
    return _finish("m1", nbhds)


def sampling_box(Y, margin=DEFAULT_MARGIN):
    lo = Y.min(axis=0)
    hi = Y.max(axis=0)
    ext = np.maximum(hi - lo, 1e-12)
    return lo - margin * ext, hi + margin * ext


@dataclass
class LatentFits:
    """Per-frame latent GMMs and sampling boxes, reusable across thresholds."""

    gmm_components: int
    gmms: list  # GmmModel or None per frame
    boxes: list  # (lo, hi) or None per frame


def fit_latent_densities(bundle, X, gmm_components, config=EmConfig(), seed=0,
                         margin=DEFAULT_MARGIN):
    """Fit one latent GMM per frame.

    A frame with too few points for ``gmm_components`` components gets as
    many as its point count supports (at least one).
    """
    gmms, boxes = [], []
    for i, Y in enumerate(frame_latents(bundle, X)):
        if Y is None:
            gmms.append(None)
            boxes.append(None)
            continue
        m = max(1, min(gmm_components, Y.shape[0] // (Y.shape[1] + 1)))
        gmms.append(fit_gmm(Y, m, config, derive_seed(seed, "latent-gmm", i)))
        boxes.append(sampling_box(Y, margin))
    return LatentFits(gmm_components, gmms, boxes)


def estimate_m2(bundle, X, gmm_components=1, log_threshold=-np.inf, seed=0,
                config=EmConfig(), margin=DEFAULT_MARGIN, fits=None):
    """Latent-density superlevel sets with one tied log-threshold.

    ``fits`` (from :func:`fit_latent_densities`) skips refitting the latent
    mixtures when only the threshold changes.
    """
    if fits is None:
        fits = fit_latent_densities(bundle, X, gmm_components, config, seed, margin)
    nbhds = []
    for i, (chart, gmm, box) in enumerate(zip(bundle.frames, fits.gmms, fits.boxes)):
        if gmm is None:
            continue
        nb = LatentDensityNeighborhood(chart, gmm, log_threshold, box[0], box[1], i)
        nb.probe(make_rng(derive_seed(seed, "probe", i)))
        nbhds.append(nb)
    return _finish("m2", nbhds)


def estimate_m3(bundle, X, ambient_density=None, log_threshold=-np.inf, seed=0,
                margin=DEFAULT_MARGIN):
    """Tangent plane intersected with an ambient-density superlevel set.

    ``ambient_density`` defaults to the bundle's own MoPPCA mixture.
    """
    if ambient_density is None:
        ambient_density = bundle.model.to_gmm()
    nbhds = []
    for i, (chart, Y) in enumerate(zip(bundle.frames, frame_latents(bundle, X))):
        if Y is None:
            continue
        lo, hi = sampling_box(Y, margin)
        nb = AmbientDensityNeighborhood(chart, ambient_density, log_threshold, lo, hi, i)
        nb.probe(make_rng(derive_seed(seed, "probe", i)))
        nbhds.append(nb)
    return _finish("m3", nbhds, ambient_density)


def sample_estimate(est, m, seed, return_labels=False):
    """``m`` points from the estimate: pick a neighborhood by weight, draw a
    uniform latent point from its region, map it with the inverse chart."""
    if not est.neighborhoods:
        raise EmptyEstimate("cannot sample an empty estimate")
    rng = make_rng(seed)
    labels = rng.choice(len(est.neighborhoods), size=m, p=est.weights)
    out = np.empty((m, est.D))
    for j in np.unique(labels):
        where = np.flatnonzero(labels == j)
        nb = est.neighborhoods[j]
        Y = nb.draw(make_rng(derive_seed(seed, "nbhd", int(j))), where.size)
        out[where] = nb.chart.inverse(Y)
    cloud = PointCloud(out, d=est.d, seed=seed, source="estimate-sample")
    if return_labels:
        return cloud, labels
    return cloud


def membership(est, X, tol=1e-8):
    """True where a point lies within ``tol`` of some neighborhood's plane and
    its projection falls inside that neighborhood's region."""
    pts = np.atleast_2d(_points(X))
    single = np.ndim(_points(X)) == 1
    hit = np.zeros(pts.shape[0], dtype=bool)
    for nb in est.neighborhoods:
        todo = ~hit
        if not todo.any():
            break
        P = pts[todo]
        Y = nb.chart.forward(P)
        close = nb.chart.reconstruction_error(P) <= tol
        ok = np.zeros(P.shape[0], dtype=bool)
        if close.any():
            ok[close] = nb.contains(Y[close])
        hit[np.flatnonzero(todo)[ok]] = True
    return bool(hit[0]) if single else hit
