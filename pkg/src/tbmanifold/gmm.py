"""Full-covariance Gaussian mixtures fitted by EM.

Used for the per-frame latent densities and, optionally, for an ambient
density fitted independently of the tangent bundle learner.  The EM driver
:func:`run_em` is shared with :mod:`tbmanifold.moppca`, which only swaps the
covariance update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, solve_triangular
from scipy.special import logsumexp

from .errors import DimensionError, NumericFailure, SizeError
from .rng import make_rng

log = logging.getLogger(__name__)

LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class EmConfig:
    tol: float = 1e-6  # relative log-likelihood change
    max_iters: int = 500
    var_floor: float = 1e-8
    weight_floor: float = 1e-8
    reg: float = 1e-6  # diagonal loading, relative to trace/p (GMM only)
    kmeans_iters: int = 0


@dataclass
class EmTrace:
    log_likelihoods: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.log_likelihoods)


def kmeans_pp(X, k, rng, iters=0):
    """k-means++ seeding followed by ``iters`` Lloyd steps.

    Returns ``(centers, labels)`` where labels is the nearest-center index.
    """
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    labels = _nearest(X, centers)
    for _ in range(iters):
        moved = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                moved[j] = X[members].mean(axis=0)
        new_labels = _nearest(X, moved)
        centers = moved
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, _fill_empty(X, centers, labels, k)


def _fill_empty(X, centers, labels, k):
    # every cluster must own at least one point for the first M-step
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        d2 = np.sum((X - centers[labels]) ** 2, axis=1)
        d2[counts[labels] <= 1] = -1.0
        labels[int(np.argmax(d2))] = j
    return labels


def _nearest(X, centers):
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def log_gauss(X, mean, chol_lower):
    """Row-wise log N(x | mean, L L^T) for lower-triangular ``chol_lower``."""
    p = X.shape[1]
    z = solve_triangular(chol_lower, (X - mean).T, lower=True, check_finite=False)
    half_logdet = np.sum(np.log(np.diag(chol_lower)))
    return -0.5 * (np.sum(z * z, axis=0) + p * LOG_2PI) - half_logdet


def cholesky(cov):
    c, _ = cho_factor(cov, lower=True, check_finite=False)
    return np.tril(c)


def run_em(X, resp, m_step, config, label="EM"):
    """Generic EM loop.

    ``m_step(X, resp, nk, prev)`` returns a model exposing ``weights`` and
    ``component_log_prob(X)`` (an ``n x k`` matrix of log pi_i + log p_i(x)).
    Iterates until the relative log-likelihood change drops below
    ``config.tol`` or ``config.max_iters`` M-steps have run.
    """
    trace = EmTrace()
    model = None
    for it in range(config.max_iters):
        nk = resp.sum(axis=0)
        model = m_step(X, resp, nk, model)
        lp = model.component_log_prob(X)
        row = logsumexp(lp, axis=1)
        ll = float(row.sum())
        if not np.isfinite(ll):
            raise NumericFailure(f"{label}: non-finite log-likelihood at iteration {it}", it)
        trace.log_likelihoods.append(ll)
        resp = np.exp(lp - row[:, None])
        if it > 0:
            prev = trace.log_likelihoods[-2]
            if ll < prev - 1e-8 * max(1.0, abs(prev)):
                log.debug("%s: log-likelihood decreased %g -> %g", label, prev, ll)
            if abs(ll - prev) <= config.tol * max(abs(prev), 1e-300):
                break
    return model, resp, trace


def floor_weights(nk, n, floor):
    w = np.maximum(nk / n, floor)
    return w / w.sum()


@dataclass
class GmmModel:
    """Gaussian mixture over R^p."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float = float("nan")
    iterations: int = 0
    trace: EmTrace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float).reshape(
            len(self.weights), self.p, self.p)
        self._chols = [cholesky(c) for c in self.covariances]

    @property
    def p(self):
        return self.means.shape[1]

    @property
    def m(self):
        return len(self.weights)

    def component_log_prob(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.m))
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        for i in range(self.m):
            out[:, i] = logw[i] + log_gauss(X, self.means[i], self._chols[i])
        return out

    def log_density(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.p:
            raise DimensionError(f"expected {self.p}-dimensional points, got {X.shape[1]}")
        out = logsumexp(self.component_log_prob(X), axis=1)
        return float(out[0]) if single else out

    def to_dict(self):
        return {
            "p": self.p,
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covariances)
            ],
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_dict(cls, data):
        comps = data["components"]
        return cls(
            weights=[c["weight"] for c in comps],
            means=[c["mean"] for c in comps],
            covariances=[c["cov"] for c in comps],
            log_likelihood=data.get("log_likelihood", float("nan")),
        )


def log_density(model, x):
    """Log of the mixture density at ``x`` (a point or an array of points)."""
    return model.log_density(x)


def _gmm_m_step(config):
    def step(X, resp, nk, prev):
        n, p = X.shape
        k = resp.shape[1]
        weights = floor_weights(nk, n, config.weight_floor)
        means = np.empty((k, p))
        covs = np.empty((k, p, p))
        for i in range(k):
            if prev is not None and nk[i] < 1e-10 * n:
                means[i], covs[i] = prev.means[i], prev.covariances[i]
                continue
            means[i] = resp[:, i] @ X / nk[i]
            diff = X - means[i]
            cov = (resp[:, i, None] * diff).T @ diff / nk[i]
            cov = 0.5 * (cov + cov.T)
            load = max(config.reg * np.trace(cov) / p, config.var_floor)
            covs[i] = cov + load * np.eye(p)
        return GmmModel(weights, means, covs)
    return step


def fit_gmm(points, m, config=EmConfig(), seed=0):
    """Fit an ``m``-component full-covariance mixture by EM.

    Means are seeded with k-means++; the first M-step uses the resulting hard
    assignment.  Deterministic given ``seed``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < m * (p + 1):
        raise SizeError(f"need at least {m * (p + 1)} points for m={m}, p={p}; got {n}")
    rng = make_rng(seed)
    _, labels = kmeans_pp(X, m, rng, iters=config.kmeans_iters)
    resp = np.zeros((n, m))
    resp[np.arange(n), labels] = 1.0
    model, _, trace = run_em(X, resp, _gmm_m_step(config), config, label="GMM")
    model.log_likelihood = trace.log_likelihoods[-1]
    model.iterations = trace.iterations
    model.trace = trace
    return model
