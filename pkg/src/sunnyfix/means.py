"""Finitely supported means on B(N^k), Cesaro box means and the averaged map T_mu.

A finitely supported probability vector on N^k is a mean on all of B(S);
the Cesaro box means mu_n (uniform on {0..n-1}^k) form a left regular
sequence with ||l*_s mu_n - mu_n|| = 2/n for every unit shift s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .semigroup import Representation, as_element

__all__ = [
    "FiniteMean",
    "OrbitTable",
    "apply_mean",
    "cesaro_mean",
    "mean_orbit_cache",
    "regularity_defect",
]

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMean:
    """Probability weights on finitely many multi-indices of N^k.

    Parameters
    ----------
    support : array of shape (m, k)
        Distinct nonnegative multi-indices, in summation order.
    weights : array of shape (m,)
        Nonnegative, summing to 1.
    uniform : Fraction or None
        Exact common weight when the mean is uniform (e.g. ``1/n^k``).
    """

    support: np.ndarray
    weights: np.ndarray
    uniform: Fraction = None

    def __post_init__(self):
        S = np.array(self.support, dtype=np.int64, ndmin=2)
        w = np.array(self.weights, dtype=np.float64, ndmin=1)
        if S.ndim != 2 or S.shape[0] != w.shape[0] or S.shape[0] == 0:
            raise ValueError("support and weights must have matching, nonzero length")
        if np.any(S < 0):
            raise ValueError("support entries must be nonnegative")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        if np.unique(S, axis=0).shape[0] != S.shape[0]:
            raise ValueError("support entries must be distinct")
        S.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "weights", w)

    @property
    def k(self):
        return self.support.shape[1]

    def __len__(self):
        return self.support.shape[0]

    @cached_property
    def box_shape(self):
        """Shape of the smallest box {0..m_1-1} x ... containing the support."""
        return tuple(int(v) + 1 for v in self.support.max(axis=0))

    @cached_property
    def _flat_index(self):
        return np.ravel_multi_index(tuple(self.support.T), self.box_shape)

    def shifted(self, shift):
        """The mean l*_s mu: mass at t moves to s + t."""
        s = np.array(as_element(shift, self.k))
        return FiniteMean(self.support + s, self.weights, self.uniform)

    @classmethod
    def point_mass(cls, s):
        s = np.atleast_1d(s)
        return cls(s[None, :], [1.0], Fraction(1))


def cesaro_mean(n, k):
    """Uniform mean on the box {0, ..., n-1}^k, lexicographic order."""
    n, k = int(n), int(k)
    if n < 1 or k < 1:
        raise ValueError("cesaro_mean needs n >= 1 and k >= 1")
    support = np.indices((n,) * k).reshape(k, -1).T
    size = n**k
    return FiniteMean(support, np.full(size, 1.0 / size), Fraction(1, size))


def regularity_defect(mu, shift, exact=False):
    """Total-variation norm ||l*_s mu - mu||, a value in [0, 2].

    With ``exact=True`` a uniform mean yields an exact :class:`Fraction`.
    """
    s = np.array(as_element(shift, mu.k))
    moved = mu.support + s
    both = np.vstack([mu.support, moved])
    _, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    m = len(mu)
    if exact and mu.uniform is not None:
        counts = np.zeros(inv.max() + 1, dtype=np.int64)
        np.add.at(counts, inv[:m], 1)
        np.add.at(counts, inv[m:], -1)
        return mu.uniform * int(np.abs(counts).sum())
    acc = np.zeros(inv.max() + 1)
    np.add.at(acc, inv[:m], mu.weights)
    np.add.at(acc, inv[m:], -mu.weights)
    return math.fsum(np.abs(acc))


class OrbitTable:
    """All T_s x for s in a box, stored as an array of shape ``shape + (d,)``."""

    def __init__(self, values):
        self.values = values

    @property
    def shape(self):
        return self.values.shape[:-1]

    def __getitem__(self, s):
        return self.values[tuple(s)]

    def __len__(self):
        return int(np.prod(self.shape))


def orbit_box(rep: Representation, shape, x):
    """Dynamic-programming orbit over the box with the given per-axis sizes.

    Entry s is G_i(entry s - e_i) where i is the first axis with s_i > 0,
    which is the composition order used by ``Representation.apply``.
    """
    x = rep.check_point(x)
    shape = tuple(int(v) for v in shape)
    if len(shape) != rep.k or min(shape) < 1:
        raise ValueError(f"orbit shape {shape} does not match k={rep.k}")
    slab = x
    for i in range(rep.k - 1, -1, -1):
        g = rep.generators[i]
        layers = np.empty((shape[i],) + slab.shape)
        layers[0] = slab
        flat = slab.reshape(-1, rep.d)
        for j in range(1, shape[i]):
            flat = g(flat)
            layers[j] = flat.reshape(slab.shape)
        slab = layers
    return OrbitTable(slab)


def mean_orbit_cache(rep, n, x):
    """Orbit table T_s x for s in {0..n-1}^k."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    return orbit_box(rep, (int(n),) * rep.k, x)


def _weighted_sum(values, mu):
    # fsum gives a correctly rounded sum per coordinate; uniform weights divide once at the end
    if mu.uniform is not None:
        total = np.array([math.fsum(col) for col in values.T])
        if mu.uniform.numerator == 1:
            return total / mu.uniform.denominator
        return total * float(mu.uniform)
    prod = values * mu.weights[:, None]
    return np.array([math.fsum(col) for col in prod.T])


def apply_mean(rep, mu, x, orbit=None):
    """T_mu x = sum_s w_s T_s x, a convex combination of orbit points."""
    if mu.k != rep.k:
        raise ValueError(f"mean is over N^{mu.k}, representation over N^{rep.k}")
    if orbit is None:
        orbit = orbit_box(rep, mu.box_shape, x)
    flat = orbit.values.reshape(-1, rep.d)
    if flat.shape[0] == len(mu) and orbit.shape == mu.box_shape and _is_box(mu):
        values = flat
    else:
        values = flat[np.ravel_multi_index(tuple(mu.support.T), orbit.shape)]
    return _weighted_sum(values, mu)


def _is_box(mu):
    # lexicographic full-box support lets us skip the gather
    if len(mu) != int(np.prod(mu.box_shape)):
        return False
    return bool(np.array_equal(mu._flat_index, np.arange(len(mu))))
