"""Synthetic benchmark manifolds and point-cloud I/O.

Four generators are provided: a planar spiral and sine wave (curves in R^2)
and an s-curve and swiss roll (surfaces in R^3).  Each is parameterised by a
curve parameter ``t`` and, for the surfaces, a width coordinate ``u``.
Noise sigmas are standard deviations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError, RangeError
from .rng import make_rng


class Kind(str, Enum):
    SPIRAL = "Spiral2D"
    SINE = "Sine2D"
    SCURVE = "SCurve3D"
    SWISSROLL = "SwissRoll3D"


# short names used on the command line and in results.csv
SHORT_NAMES = {
    "spiral": Kind.SPIRAL,
    "sine": Kind.SINE,
    "scurve": Kind.SCURVE,
    "swissroll": Kind.SWISSROLL,
}
_SHORT_OF = {v: k for k, v in SHORT_NAMES.items()}

_DIMS = {
    Kind.SPIRAL: (2, 1),
    Kind.SINE: (2, 1),
    Kind.SCURVE: (3, 2),
    Kind.SWISSROLL: (3, 2),
}


@dataclass(frozen=True)
class ManifoldSpec:
    """Generator description.

    ``u_min``/``u_max`` bound the width coordinate of the surfaces and are
    ignored for curves.
    """

    kind: Kind
    t_min: float
    t_max: float
    sigmas: tuple
    D: int
    d: int
    u_min: float = 0.0
    u_max: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        D, d = _DIMS[self.kind]
        if (self.D, self.d) != (D, d):
            raise DimensionError(f"{self.kind.value} requires D={D}, d={d}")
        if not self.t_min < self.t_max:
            raise RangeError("t_min must be < t_max")
        if len(self.sigmas) != self.D or any(s < 0 for s in self.sigmas):
            raise ValueError("need one non-negative sigma per ambient coordinate")
        if self.d == 2 and not self.u_min < self.u_max:
            raise RangeError("u_min must be < u_max")

    @property
    def name(self):
        return _SHORT_OF[self.kind]

    @classmethod
    def preset(cls, name, **overrides):
        """The benchmark dataset ``name`` (short name or Kind value)."""
        kind = SHORT_NAMES.get(name) or Kind(name)
        params = dict(_PRESETS[kind])
        params.update(overrides)
        return cls(kind=kind, **params)

    def noise_free(self):
        return ManifoldSpec(self.kind, self.t_min, self.t_max, (0.0,) * self.D,
                            self.D, self.d, self.u_min, self.u_max)

    def to_dict(self):
        out = {"kind": self.kind.value, "t_min": self.t_min, "t_max": self.t_max,
               "sigmas": list(self.sigmas), "D": self.D, "d": self.d}
        if self.d == 2:
            out.update(u_min=self.u_min, u_max=self.u_max)
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(kind=Kind(data["kind"]), t_min=data["t_min"], t_max=data["t_max"],
                   sigmas=tuple(data["sigmas"]), D=data["D"], d=data["d"],
                   u_min=data.get("u_min", 0.0), u_max=data.get("u_max", 0.0))

    def to_json(self):
        return json.dumps(self.to_dict())


_PRESETS = {
    Kind.SPIRAL: dict(t_min=3.0, t_max=15.0, sigmas=(0.01, 0.01), D=2, d=1),
    Kind.SINE: dict(t_min=3.0, t_max=15.0, sigmas=(0.05, 0.05), D=2, d=1),
    Kind.SCURVE: dict(t_min=-1.5 * np.pi, t_max=1.5 * np.pi,
                      sigmas=(0.05, 0.05, 0.05), D=3, d=2, u_min=0.0, u_max=2.0),
    Kind.SWISSROLL: dict(t_min=1.5 * np.pi, t_max=4.5 * np.pi,
                         sigmas=(0.0005, 0.0005, 0.0005), D=3, d=2,
                         u_min=0.0, u_max=21.0),
}


@dataclass
class PointCloud:
    """``n x D`` sample with its declared intrinsic dimension and provenance."""

    points: np.ndarray
    d: int
    seed: int | None = None
    source: str = "file"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DimensionError("a point cloud needs at least one row")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = pts

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def D(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n


def _map(kind, t, u):
    if kind is Kind.SPIRAL:
        return np.stack([0.04 * t * np.sin(t), 0.04 * t * np.cos(t)], axis=-1)
    if kind is Kind.SINE:
        return np.stack([t, np.sin(2 * np.pi * 5 * t / 30)], axis=-1)
    if kind is Kind.SCURVE:
        return np.stack([np.sin(t), u, np.sign(t) * (np.cos(t) - 1)], axis=-1)
    if kind is Kind.SWISSROLL:
        return np.stack([t * np.cos(t), u, t * np.sin(t)], axis=-1)
    raise ValueError(kind)


def generator_point(spec, t, u=0.0):
    """Noise-free point of the generator at parameters ``(t, u)``."""
    if not spec.t_min <= t <= spec.t_max:
        raise RangeError(f"t={t} outside [{spec.t_min}, {spec.t_max}]")
    if spec.d == 2 and not spec.u_min <= u <= spec.u_max:
        raise RangeError(f"u={u} outside [{spec.u_min}, {spec.u_max}]")
    return _map(spec.kind, np.float64(t), np.float64(u))


def _draw(spec, n, rng):
    t = rng.uniform(spec.t_min, spec.t_max, n)
    if spec.d == 2:
        u = rng.uniform(spec.u_min, spec.u_max, n)
    else:
        u = np.zeros(n)
    return t, u, _map(spec.kind, t, u)


def generate_dataset(spec, n, seed, return_latent=False):
    """Draw ``n`` noisy samples.  Identical ``(spec, n, seed)`` give identical output.

    With ``return_latent`` the drawn ``(t, u)`` arrays are returned as well.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    t, u, clean = _draw(spec, n, rng)
    noise = rng.standard_normal((n, spec.D)) * np.asarray(spec.sigmas)
    cloud = PointCloud(clean + noise, d=spec.d, seed=seed,
                       source=f"generate:{spec.name}")
    if return_latent:
        return cloud, t, u
    return cloud


def sample_true_manifold(spec, m, seed, return_latent=False):
    """``m`` noise-free points, uniform in the generator parameters."""
    if m < 1:
        raise ValueError("m must be >= 1")
    t, u, clean = _draw(spec, m, make_rng(seed))
    cloud = PointCloud(clean, d=spec.d, seed=seed, source=f"true:{spec.name}")
    if return_latent:
        return cloud, t, u
    return cloud


def write_csv(cloud, path, header=False):
    path = Path(path)
    with path.open("w", newline="") as fh:
        if header:
            fh.write(",".join(f"x{j}" for j in range(cloud.D)) + "\n")
        np.savetxt(fh, cloud.points, delimiter=",", fmt="%.17g")


def read_csv(path, d):
    """Read a numeric CSV (optional ``x0,...`` header) into a PointCloud."""
    rows = []
    width = None
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and all(c.strip() == f"x{j}" for j, c in enumerate(row)):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"row {lineno}: non-numeric value in {row!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"row {lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ParseError("no points")
    pts = np.array(rows, dtype=float)
    if not np.all(np.isfinite(pts)):
        bad = int(np.nonzero(~np.isfinite(pts).all(axis=1))[0][0])
        raise ParseError(f"row {bad + 1}: non-finite value")
    return PointCloud(pts, d=d, source="file")
