"""Mixtures of probabilistic PCA as a tangent bundle learner.

Each component is a Gaussian with covariance ``W W^T + sigma2 I``.  The
M-step computes the responsibility-weighted covariance of each component and
solves the PPCA maximum-likelihood problem on it in closed form
(top-d eigenvectors scaled by ``sqrt(lambda - sigma2)``, ``sigma2`` the mean
of the discarded eigenvalues), which is the exact maximiser for fixed
responsibilities, so the log-likelihood cannot decrease.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .charts import Chart
from .errors import DegenerateFrame, DimensionError, SizeError
from .gmm import EmConfig, EmTrace, GmmModel, cholesky, floor_weights, kmeans_pp, log_gauss, run_em
from .rng import make_rng


@dataclass
class PpcaComponent:
    pi: float
    mu: np.ndarray
    W: np.ndarray  # D x d
    sigma2: float

    @property
    def covariance(self):
        return self.W @ self.W.T + self.sigma2 * np.eye(self.W.shape[0])


@dataclass
class MoppcaModel:
    components: list
    d: int
    D: int
    final_log_likelihood: float = float("nan")
    iterations_used: int = 0
    trace: EmTrace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._chols = [cholesky(c.covariance) for c in self.components]

    @property
    def k(self):
        return len(self.components)

    @property
    def weights(self):
        return np.array([c.pi for c in self.components])

    def component_log_prob(self, X):
        out = np.empty((X.shape[0], self.k))
        for i, c in enumerate(self.components):
            out[:, i] = np.log(c.pi) + log_gauss(X, c.mu, self._chols[i])
        return out

    def log_density(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return logsumexp(self.component_log_prob(X), axis=1)

    def to_gmm(self):
        """The same mixture as a general :class:`GmmModel` over R^D."""
        return GmmModel(
            weights=self.weights,
            means=np.array([c.mu for c in self.components]),
            covariances=np.array([c.covariance for c in self.components]),
            log_likelihood=self.final_log_likelihood,
        )

    def to_dict(self):
        return {
            "d": self.d,
            "D": self.D,
            "components": [
                {"pi": float(c.pi), "mu": c.mu.tolist(), "W": c.W.tolist(),
                 "sigma2": float(c.sigma2)}
                for c in self.components
            ],
            "log_likelihood": self.final_log_likelihood,
        }

    @classmethod
    def from_dict(cls, data):
        comps = [
            PpcaComponent(c["pi"], np.array(c["mu"], dtype=float),
                          np.array(c["W"], dtype=float).reshape(data["D"], data["d"]),
                          c["sigma2"])
            for c in data["components"]
        ]
        return cls(comps, data["d"], data["D"], data.get("log_likelihood", float("nan")))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _ppca_m_step(d, config):
    def step(X, resp, nk, prev):
        n, D = X.shape
        k = resp.shape[1]
        weights = floor_weights(nk, n, config.weight_floor)
        comps = []
        for i in range(k):
            if prev is not None and nk[i] < 1e-10 * n:
                old = prev.components[i]
                comps.append(PpcaComponent(weights[i], old.mu, old.W, old.sigma2))
                continue
            mu = resp[:, i] @ X / nk[i]
            diff = X - mu
            S = (resp[:, i, None] * diff).T @ diff / nk[i]
            evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
            evals = evals[::-1]
            evecs = evecs[:, ::-1]
            sigma2 = max(float(np.mean(evals[d:])), config.var_floor)
            scale = np.sqrt(np.maximum(evals[:d] - sigma2, 0.0))
            comps.append(PpcaComponent(weights[i], mu, evecs[:, :d] * scale, sigma2))
        return MoppcaModel(comps, d, D)
    return step


def fit_moppca(X, k, d, config=EmConfig(), seed=0):
    """Fit a ``k``-component MoPPCA model with ``d``-dimensional loadings.

    Initialisation: k-means++ seeding (plus ``config.kmeans_iters`` Lloyd
    steps), nearest-mean hard assignment, and a first M-step on that
    assignment (per-cluster PCA for ``W``, residual variance for ``sigma2``).
    """
    pts = X.points if hasattr(X, "points") else np.asarray(X, dtype=float)
    n, D = pts.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= d < D:
        raise DimensionError(f"need 1 <= d < D, got d={d}, D={D}")
    if n < k * (d + 2):
        raise SizeError(f"need at least {k * (d + 2)} points for k={k}, d={d}; got {n}")
    rng = make_rng(seed)
    _, labels = kmeans_pp(pts, k, rng, iters=config.kmeans_iters)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    model, _, trace = run_em(pts, resp, _ppca_m_step(d, config), config, label="MoPPCA")
    model.final_log_likelihood = trace.log_likelihoods[-1]
    model.iterations_used = trace.iterations
    model.trace = trace
    return model


def responsibilities(model, X):
    """Posterior component probabilities, an ``n x k`` row-stochastic matrix."""
    pts = X.points if hasattr(X, "points") else np.atleast_2d(np.asarray(X, dtype=float))
    if pts.shape[1] != model.D:
        raise DimensionError(f"model is {model.D}-dimensional, points are {pts.shape[1]}")
    lp = model.component_log_prob(pts)
    return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


@dataclass
class AssignmentRelation:
    hard_assignment: np.ndarray  # point index -> component index
    responsibilities: np.ndarray

    def members(self, i):
        return np.flatnonzero(self.hard_assignment == i)


@dataclass
class TangentBundle:
    frames: list  # Chart per component
    assignment: AssignmentRelation
    model: MoppcaModel | None = field(default=None, repr=False)

    @property
    def k(self):
        return len(self.frames)

    @property
    def d(self):
        return self.frames[0].d

    @property
    def D(self):
        return self.frames[0].D


def canonical_orientation(basis):
    """Flip rows so the first non-negligible coordinate of each is positive."""
    basis = basis.copy()
    for row in basis:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return basis


def frame_basis(W):
    """Orthonormal ``d x D`` basis of the column span of ``W``; None if rank < d."""
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    d = W.shape[1]
    if s[d - 1] <= 1e-12 * max(s[0], 1e-300) or s[d - 1] == 0.0:
        return None
    return canonical_orientation(U[:, :d].T)


def extract_tangent_bundle(model, X):
    """Frames ``(anchor = mu_i, basis = span W_i)`` plus the hard assignment.

    A rank-deficient component that owns at least ``d + 1`` points raises
    :class:`DegenerateFrame`.  One that owns fewer (and so yields an empty
    neighborhood downstream) gets the leading eigenvectors of its covariance,
    which keeps all ``k`` frames in the bundle.
    """
    resp = responsibilities(model, X)
    hard = np.argmax(resp, axis=1)
    counts = np.bincount(hard, minlength=model.k)
    frames = []
    for i, comp in enumerate(model.components):
        basis = frame_basis(comp.W)
        if basis is None:
            if counts[i] >= model.d + 1:
                raise DegenerateFrame(
                    f"component {i} has rank(W) < {model.d} but owns {counts[i]} points", i)
            _, evecs = np.linalg.eigh(comp.covariance)
            basis = canonical_orientation(evecs[:, ::-1][:, :model.d].T)
        frames.append(Chart(comp.mu, basis))
    return TangentBundle(frames, AssignmentRelation(hard, resp), model)
