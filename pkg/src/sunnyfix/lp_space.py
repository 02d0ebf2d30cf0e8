"""Finite-dimensional l^p spaces and their normalized duality mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpSpace", "as_vector", "pairing"]


def as_vector(x, d=None):
    """Return ``x`` as a finite 1-D float64 array, optionally checking length ``d``."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"dimension mismatch: expected {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def pairing(x, f):
    """Dual pairing <x, f> = sum_i x_i f_i."""
    x = np.asarray(x, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if x.shape != f.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {f.shape}")
    return float(np.dot(x.ravel(), f.ravel()))


@dataclass(frozen=True)
class LpSpace:
    """The space R^d with the l^p norm, 1 < p < inf.

    For these exponents the space is smooth and uniformly convex, so the
    duality mapping is single valued and (in finite dimension) weakly
    sequentially continuous.

    Parameters
    ----------
    d : int
        Dimension.
    p : float
        Exponent, strictly between 1 and infinity.
    """

    d: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        p = float(self.p)
        if not (1.0 < p < np.inf):
            raise ValueError(f"exponent p must lie in (1, inf), got {self.p!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", p)

    @property
    def q(self):
        """Conjugate exponent p / (p - 1)."""
        return self.p / (self.p - 1.0)

    @property
    def is_hilbert(self):
        return self.p == 2.0

    def vector(self, x):
        return as_vector(x, self.d)

    def norm(self, x):
        """l^p norm of ``x`` (no overflow rescaling; desk-scale inputs only)."""
        x = as_vector(x, self.d)
        if self.p == 2.0:
            return float(np.sqrt(np.dot(x, x)))
        return float(np.sum(np.abs(x) ** self.p) ** (1.0 / self.p))

    def dual_norm(self, f):
        """l^q norm of a functional ``f`` given in coordinates."""
        f = as_vector(f, self.d)
        return float(np.sum(np.abs(f) ** self.q) ** (1.0 / self.q))

    def norms(self, X):
        """Row-wise l^p norms of a 2-D array."""
        X = np.asarray(X, dtype=np.float64)
        if self.p == 2.0:
            return np.sqrt(np.einsum("ij,ij->i", X, X))
        return np.sum(np.abs(X) ** self.p, axis=-1) ** (1.0 / self.p)

    def duality_map(self, x):
        """Normalized duality mapping J(x).

        Coordinates are ``||x||^(2-p) |x_i|^(p-1) sign(x_i)``, so that
        ``<x, J(x)> = ||x||_p^2`` and ``||J(x)||_q = ||x||_p``. J(0) = 0.
        """
        x = as_vector(x, self.d)
        if self.p == 2.0:
            return x.copy()
        nx = self.norm(x)
        if nx == 0.0:
            return np.zeros_like(x)
        return nx ** (2.0 - self.p) * np.abs(x) ** (self.p - 1.0) * np.sign(x)

    def dpair(self, x, y):
        """Shorthand for <x, J(y)>, the quantity every inequality here is built from."""
        return pairing(as_vector(x, self.d), self.duality_map(y))

    def distance(self, x, y):
        return self.norm(as_vector(x, self.d) - as_vector(y, self.d))
