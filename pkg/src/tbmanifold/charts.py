"""Coordinate charts attached to a tangent frame.

A chart projects ambient points onto the affine tangent plane through an
anchor (Karhunen-Loeve transform) and maps latent coordinates back.  Bases
must have orthonormal rows so the inverse is the transpose action.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

ORTHO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Chart:
    anchor: np.ndarray
    basis: np.ndarray  # d x D, orthonormal rows

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[1] != anchor.shape[0]:
            raise DimensionError(
                f"basis has {basis.shape[1]} columns but anchor is {anchor.shape[0]}-dimensional")
        if basis.shape[0] > basis.shape[1]:
            raise DimensionError("basis must have d <= D rows")
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > ORTHO_TOL:
            raise ValueError("chart basis rows must be orthonormal")
        anchor.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "basis", basis)

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def D(self):
        return self.basis.shape[1]

    def forward(self, X):
        """Latent coordinates ``basis . (x - anchor)``; accepts one point or rows."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.D:
            raise DimensionError(f"expected {self.D}-dimensional input, got {X.shape[-1]}")
        return (X - self.anchor) @ self.basis.T

    def inverse(self, Y):
        """Ambient point ``y . basis + anchor`` on the affine tangent plane."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 0:
            Y = Y.reshape(1)
        if Y.shape[-1] != self.d:
            raise DimensionError(f"expected {self.d}-dimensional latent input, got {Y.shape[-1]}")
        return Y @ self.basis + self.anchor

    def reconstruction_error(self, X):
        """Euclidean distance from ``x`` to the affine tangent plane."""
        X = np.asarray(X, dtype=float)
        resid = self.inverse(self.forward(X)) - X
        return np.sqrt(np.sum(resid * resid, axis=-1))

    def to_dict(self):
        return {"anchor": self.anchor.tolist(), "basis": self.basis.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.array(data["anchor"]), np.array(data["basis"]))


def chart_forward(chart, x):
    return chart.forward(x)


def chart_inverse(chart, y):
    return chart.inverse(y)


def reconstruction_error(chart, x):
    return chart.reconstruction_error(x)
