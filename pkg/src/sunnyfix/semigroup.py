"""Representations of S = N^k as nonexpansive maps on a closed convex set.

A representation is given by k pairwise commuting nonexpansive generators
G_1, ..., G_k; the semigroup element s = (s_1, ..., s_k) acts as

    T_s = G_1^{s_1} o G_2^{s_2} o ... o G_k^{s_k},

so G_k is applied first. Maps are vectorized: they accept a single vector
of shape (d,) or a batch of shape (m, d).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from .exceptions import (
    CertificationError,
    DomainError,
    InfeasibleError,
    UnsupportedGeneratorError,
)
from .lp_space import LpSpace, as_vector

__all__ = [
    "AffineMap",
    "Ball",
    "Box",
    "CertificationReport",
    "ClampMap",
    "Composition",
    "FixedSet",
    "Representation",
    "as_element",
    "operator_norm_bound",
]

NONEXPANSIVE_TOL = 1e-12
COMMUTATOR_TOL = 1e-9
EXPANSION_TOL = 1e-9


def operator_norm_bound(A, p):
    """Upper bound on the l^p -> l^p operator norm of the matrix ``A``.

    Exact (largest singular value) for p = 2. Otherwise the Riesz-Thorin
    interpolation bound ``||A||_1^(1/p) * ||A||_inf^(1/q)`` between the
    max-column-sum and max-row-sum norms.
    """
    A = np.asarray(A, dtype=np.float64)
    if p == 2.0:
        return float(np.linalg.norm(A, 2))
    q = p / (p - 1.0)
    n1 = float(np.abs(A).sum(axis=0).max())
    ninf = float(np.abs(A).sum(axis=1).max())
    return n1 ** (1.0 / p) * ninf ** (1.0 / q)


def as_element(s, k):
    """Validate a multi-index ``s`` in N^k and return it as a tuple of ints."""
    arr = np.atleast_1d(np.asarray(s))
    if arr.ndim != 1 or arr.shape[0] != k:
        raise ValueError(f"semigroup element must have {k} entries, got {s!r}")
    out = tuple(int(v) for v in arr)
    if any(v != a for v, a in zip(out, arr)) or any(v < 0 for v in out):
        raise ValueError(f"semigroup element entries must be nonnegative integers, got {s!r}")
    return out


class NonexpansiveMap:
    """Base class for generator maps."""

    kind = "abstract"
    dim: int

    def __call__(self, X):
        raise NotImplementedError

    def lipschitz_bound(self, p):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AffineMap(NonexpansiveMap):
    """x -> A x + b."""

    A: np.ndarray
    b: np.ndarray = None
    kind = "affine"

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64, ndmin=2)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"affine map needs a square matrix, got shape {A.shape}")
        b = np.zeros(A.shape[0]) if self.b is None else as_vector(self.b, A.shape[0])
        A.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[0]

    def __call__(self, X):
        return X @ self.A.T + self.b

    def lipschitz_bound(self, p):
        return operator_norm_bound(self.A, p)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d))

    @classmethod
    def permutation(cls, perm):
        """Coordinate permutation x -> x[perm]."""
        perm = list(perm)
        return cls(np.eye(len(perm))[perm])


@dataclass(frozen=True, eq=False)
class ClampMap(NonexpansiveMap):
    """Coordinate-wise clamp onto the box [lo, hi]; nonexpansive for every p."""

    lo: np.ndarray
    hi: np.ndarray
    kind = "clamp"

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64, ndmin=1)
        hi = np.array(self.hi, dtype=np.float64, ndmin=1)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("clamp bounds must be vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("clamp bounds must not be NaN")
        if np.any(lo > hi):
            raise ValueError("clamp bounds need lo <= hi componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def __call__(self, X):
        return np.clip(X, self.lo, self.hi)

    def lipschitz_bound(self, p):
        return 1.0


@dataclass(frozen=True, eq=False)
class Composition(NonexpansiveMap):
    """Maps applied in list order: ``Composition([F, G])(x) == G(F(x))``."""

    maps: tuple
    kind = "composition"

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("composition needs at least one map")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ValueError(f"composed maps disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "maps", maps)

    @property
    def dim(self):
        return self.maps[0].dim

    def __call__(self, X):
        for m in self.maps:
            X = m(X)
        return X

    def lipschitz_bound(self, p):
        return float(np.prod([m.lipschitz_bound(p) for m in self.maps]))

    def collapse_affine(self):
        """Return the equivalent AffineMap, or None if any factor is not affine."""
        A = np.eye(self.dim)
        b = np.zeros(self.dim)
        for m in self.maps:
            if isinstance(m, Composition):
                m = m.collapse_affine()
            if not isinstance(m, AffineMap):
                return None
            A = m.A @ A
            b = m.A @ b + m.b
        return AffineMap(A, b)


@dataclass(frozen=True, eq=False)
class Box:
    """Closed box [lo, hi]; infinite bounds allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64, ndmin=1)
        hi = np.array(self.hi, dtype=np.float64, ndmin=1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs equal-length bounds with lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x, tol=1e-12):
        scale = 1.0 + np.abs(x)
        return bool(np.all(x >= self.lo - tol * scale) and np.all(x <= self.hi + tol * scale))

    def bounds(self):
        return self.lo, self.hi


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed l^p ball of given center and radius (p taken from the space)."""

    center: np.ndarray
    radius: float
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x, tol=1e-12):
        r = np.sum(np.abs(x - self.center) ** self.p) ** (1.0 / self.p)
        return bool(r <= self.radius * (1.0 + tol) + tol)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


@dataclass
class CertificationReport:
    """Outcome of sampled commutativity / nonexpansiveness checks."""

    samples: int
    max_commutator_defect: float
    max_expansion_ratio: float
    maps_into_domain: bool
    bounded_orbits: bool
    commutator_witness: tuple = None
    expansion_witness: tuple = None
    domain_witness: tuple = None
    commutator_tol: float = COMMUTATOR_TOL
    expansion_tol: float = EXPANSION_TOL

    @property
    def commuting(self):
        return self.max_commutator_defect <= self.commutator_tol

    @property
    def nonexpansive(self):
        return self.max_expansion_ratio <= 1.0 + self.expansion_tol

    @property
    def passed(self):
        return self.commuting and self.nonexpansive and self.maps_into_domain

    def failure_message(self):
        if self.passed:
            return ""
        parts = []
        if not self.commuting:
            (i, j), x = self.commutator_witness
            parts.append(
                f"generators {i} and {j} do not commute at x={_fmt(x)} "
                f"(defect {self.max_commutator_defect:.3e})"
            )
        if not self.nonexpansive:
            i, x, y = self.expansion_witness
            parts.append(
                f"generator {i} expands the pair x={_fmt(x)}, y={_fmt(y)} "
                f"(ratio {self.max_expansion_ratio:.12g})"
            )
        if not self.maps_into_domain:
            i, x = self.domain_witness
            parts.append(f"generator {i} maps x={_fmt(x)} outside the domain")
        return "; ".join(parts)

    def as_dict(self):
        return {
            "samples": self.samples,
            "max_commutator_defect": self.max_commutator_defect,
            "max_expansion_ratio": self.max_expansion_ratio,
            "maps_into_domain": self.maps_into_domain,
            "bounded_orbits": self.bounded_orbits,
            "passed": self.passed,
            "message": self.failure_message(),
        }


def _fmt(x):
    return "(" + ", ".join(f"{v:.6g}" for v in np.atleast_1d(x)) + ")"


@dataclass(frozen=True, eq=False)
class Representation:
    """S = N^k acting on C through k commuting nonexpansive generators.

    Affine generators are certified at construction by an operator-norm
    bound; commutativity is only checked by :meth:`certify`.

    Parameters
    ----------
    space : LpSpace
    generators : sequence of NonexpansiveMap
    domain : Box, Ball or None
        The closed convex set C. ``None`` means C = E.
    """

    space: LpSpace
    generators: tuple
    domain: object = None
    _lipschitz: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("a representation needs at least one generator")
        for i, g in enumerate(gens):
            if g.dim != self.space.d:
                raise ValueError(f"generator {i} has dimension {g.dim}, space has {self.space.d}")
        lips = tuple(g.lipschitz_bound(self.space.p) for g in gens)
        for i, lip in enumerate(lips):
            if lip > 1.0 + NONEXPANSIVE_TOL:
                raise CertificationError(
                    f"generator {i} ({gens[i].kind}) has certified l^{self.space.p:g} "
                    f"Lipschitz bound {lip:.6g} > 1",
                    witness=i,
                )
        if isinstance(self.domain, Ball) and self.domain.p != self.space.p:
            object.__setattr__(self, "domain", Ball(self.domain.center, self.domain.radius, self.space.p))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "_lipschitz", lips)

    @property
    def k(self):
        return len(self.generators)

    @property
    def d(self):
        return self.space.d

    def in_domain(self, x, tol=1e-12):
        return self.domain is None or self.domain.contains(x, tol)

    def check_point(self, x):
        x = self.space.vector(x)
        if not self.in_domain(x):
            raise DomainError(f"point {_fmt(x)} lies outside the domain C")
        return x

    def apply(self, s, x):
        """T_s x = G_1^{s_1}(... G_k^{s_k}(x))."""
        s = as_element(s, self.k)
        y = self.check_point(x)
        for i in range(self.k - 1, -1, -1):
            g = self.generators[i]
            for _ in range(s[i]):
                y = g(y)
        return y

    def generator_residuals(self, x):
        """||x - G_i x|| for every generator."""
        x = self.space.vector(x)
        return np.array([self.space.norm(x - g(x)) for g in self.generators])

    # -- certification -------------------------------------------------

    def sample_points(self, m, rng):
        """Sample ``m`` points of C (of a bounding cube when C = E)."""
        d = self.d
        if self.domain is None:
            radius = 1.0
            for g in self.generators:
                radius = max(radius, *_finite_abs(g))
            lo, hi = -2.0 * radius * np.ones(d), 2.0 * radius * np.ones(d)
        else:
            lo, hi = self.domain.bounds()
            lo = np.where(np.isfinite(lo), lo, np.minimum(hi, 0.0) - 10.0)
            hi = np.where(np.isfinite(hi), hi, np.maximum(lo, 0.0) + 10.0)
        out = []
        while len(out) < m:
            X = rng.uniform(lo, hi, size=(2 * m, d))
            if self.domain is not None:
                X = X[[self.domain.contains(x) for x in X]]
            out.extend(X)
        return np.array(out[:m])

    def certify(self, samples=100, seed=0):
        """Check commutativity and nonexpansiveness on random samples.

        Returns a :class:`CertificationReport`; never raises on failure.
        """
        if samples < 1:
            raise ValueError("samples must be >= 1")
        rng = np.random.default_rng(seed)
        X = self.sample_points(samples, rng)
        Y = self.sample_points(samples, rng)
        # close pairs probe local expansion
        near = X + 1e-3 * rng.standard_normal(X.shape)
        if self.domain is not None:
            near = np.array([y if self.domain.contains(y) else x for x, y in zip(X, near)])
        Y = np.vstack([Y, near])
        X2 = np.vstack([X, X])
        gx = [g(X) for g in self.generators]

        defect, cwit = 0.0, None
        for i in range(self.k):
            for j in range(i + 1, self.k):
                gi, gj = self.generators[i], self.generators[j]
                diff = self.space.norms(gi(gx[j]) - gj(gx[i]))
                a = int(np.argmax(diff))
                if diff[a] > defect or cwit is None:
                    defect, cwit = float(diff[a]), ((i, j), X[a].copy())

        ratio, ewit = 0.0, None
        dxy = self.space.norms(X2 - Y)
        ok = dxy > 0
        for i, g in enumerate(self.generators):
            r = self.space.norms(g(X2[ok]) - g(Y[ok])) / dxy[ok]
            a = int(np.argmax(r))
            if r[a] > ratio or ewit is None:
                ratio, ewit = float(r[a]), (i, X2[ok][a].copy(), Y[ok][a].copy())

        into, dwit = True, None
        if self.domain is not None:
            for i, g in enumerate(gx):
                for x, y in zip(X, g):
                    if not self.domain.contains(y, 1e-9):
                        into, dwit = False, (i, x.copy())
                        break
                if not into:
                    break

        # a drifting orbit keeps growing after the first 128 steps
        bounded = True
        for g in self.generators:
            Z = X[: min(samples, 20)]
            early = self.space.norms(Z)
            for step in range(256):
                Z = g(Z)
                if step < 128:
                    early = np.maximum(early, self.space.norms(Z))
            if np.any(self.space.norms(Z) > 1.5 * early + 1.0):
                bounded = False
        if not bounded:
            warnings.warn("a generator appears to have unbounded orbits; Fix(S) may be empty", stacklevel=2)

        return CertificationReport(
            samples=samples,
            max_commutator_defect=defect,
            max_expansion_ratio=ratio,
            maps_into_domain=into,
            bounded_orbits=bounded,
            commutator_witness=cwit if self.k > 1 else None,
            expansion_witness=ewit,
            domain_witness=dwit,
        )

    def require_certified(self, samples=100, seed=0):
        report = self.certify(samples, seed)
        if not report.passed:
            witness = report.commutator_witness if not report.commuting else report.expansion_witness
            raise CertificationError(report.failure_message(), witness=witness)
        return report

    # -- exact fixed set ----------------------------------------------

    def fixed_set_oracle(self):
        """Exact description of Fix(S) for affine/clamp generators."""
        d = self.d
        rows, rhs = [], []
        lo, hi = np.full(d, -np.inf), np.full(d, np.inf)
        for i, g in enumerate(self.generators):
            if isinstance(g, Composition):
                g = g.collapse_affine() or g
            if isinstance(g, AffineMap):
                rows.append(np.eye(d) - g.A)
                rhs.append(g.b)
            elif isinstance(g, ClampMap):
                lo, hi = np.maximum(lo, g.lo), np.minimum(hi, g.hi)
            else:
                raise UnsupportedGeneratorError(
                    f"generator {i} of kind {g.kind!r} is not supported by the fixed-set oracle"
                )
        ball = None
        if isinstance(self.domain, Box):
            lo, hi = np.maximum(lo, self.domain.lo), np.minimum(hi, self.domain.hi)
        elif isinstance(self.domain, Ball):
            ball = self.domain
        if np.any(lo > hi):
            raise InfeasibleError("clamp boxes have empty intersection")
        if rows:
            M = np.vstack(rows)
            r = np.concatenate(rhs)
            x0, *_ = np.linalg.lstsq(M, r, rcond=None)
            if np.linalg.norm(M @ x0 - r) > 1e-9 * (1.0 + np.linalg.norm(r)):
                raise InfeasibleError("affine generators have no common fixed point")
            basis = linalg.null_space(M, rcond=1e-10)
        else:
            x0, basis = np.zeros(d), np.eye(d)
        fs = FixedSet(space=self.space, point=x0, basis=basis, lo=lo, hi=hi, ball=ball)
        fs.check_feasible()
        return fs


def _finite_abs(g):
    if isinstance(g, ClampMap):
        vals = np.abs(np.concatenate([g.lo, g.hi]))
        return list(vals[np.isfinite(vals)]) or [1.0]
    if isinstance(g, AffineMap):
        return [float(np.max(np.abs(g.b), initial=1.0))]
    if isinstance(g, Composition):
        return [v for m in g.maps for v in _finite_abs(m)]
    return [1.0]


@dataclass(frozen=True, eq=False)
class FixedSet:
    """{x0 + N c} intersected with the box [lo, hi] (and optionally a ball).

    ``basis`` has orthonormal columns spanning the direction space of the
    affine part; it has zero columns when the affine part is a point.
    """

    space: LpSpace
    point: np.ndarray
    basis: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ball: Ball = None

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def has_box(self):
        return bool(np.any(np.isfinite(self.lo)) or np.any(np.isfinite(self.hi)))

    @property
    def has_affine(self):
        return self.dim < self.space.d

    def project_affine(self, u):
        N = self.basis
        return self.point + N @ (N.T @ (u - self.point))

    def project_box(self, u):
        return np.clip(u, self.lo, self.hi)

    def project_ball(self, u):
        c, r = self.ball.center, self.ball.radius
        v = u - c
        nv = np.linalg.norm(v)
        return u if nv <= r else c + v * (r / nv)

    def contains(self, x, tol=1e-10):
        x = as_vector(x, self.space.d)
        scale = 1.0 + np.linalg.norm(x)
        if np.linalg.norm(x - self.project_affine(x)) > tol * scale:
            return False
        if np.any(x < self.lo - tol * scale) or np.any(x > self.hi + tol * scale):
            return False
        return self.ball is None or self.ball.contains(x, tol)

    def _param_constraints(self):
        N, x0 = self.basis, self.point
        lo, hi = self.lo, self.hi
        if self.ball is not None:
            blo, bhi = self.ball.bounds()
            lo, hi = np.maximum(lo, blo), np.minimum(hi, bhi)
        A_ub, b_ub = [], []
        for j in range(self.space.d):
            if np.isfinite(hi[j]):
                A_ub.append(N[j])
                b_ub.append(hi[j] - x0[j])
            if np.isfinite(lo[j]):
                A_ub.append(-N[j])
                b_ub.append(x0[j] - lo[j])
        return (np.array(A_ub), np.array(b_ub)) if A_ub else (None, None)

    def check_feasible(self):
        if self.dim == 0:
            if not self.contains(self.point, 1e-9):
                raise InfeasibleError("affine fixed point lies outside the clamp box / domain")
            return
        A_ub, b_ub = self._param_constraints()
        if A_ub is None:
            return
        res = linprog(np.zeros(self.dim), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * self.dim)
        if res.status == 2:
            raise InfeasibleError("affine fixed set does not meet the clamp box / domain")

    def _param_bounds(self, default_radius):
        A_ub, b_ub = self._param_constraints()
        lows, highs, extremes = [], [], []
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = 1.0
            bounds = []
            for sign in (1.0, -1.0):
                if A_ub is None:
                    bounds.append(None)
                    continue
                res = linprog(sign * e, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * self.dim)
                if res.status == 0:
                    bounds.append(res.x[j])
                    extremes.append(res.x)
                else:
                    bounds.append(None)
            lo_j, hi_j = bounds
            lows.append(-default_radius if lo_j is None else lo_j)
            highs.append(default_radius if hi_j is None else hi_j)
        return np.array(lows), np.array(highs), extremes

    def sample(self, m, seed=0, default_radius=10.0):
        """Deterministic sample of Fix(S): extreme points first, then uniform points.

        Uniform sampling is over the affine parameterization restricted to
        its bounding box (rejection), ``default_radius`` on unbounded axes.
        """
        if self.dim == 0:
            return np.array([self.point.copy()])
        rng = np.random.default_rng(seed)
        lows, highs, extremes = self._param_bounds(default_radius)
        pts = []
        for c in extremes:
            x = self.point + self.basis @ c
            if self.contains(x, 1e-9) and not any(np.allclose(x, y, atol=1e-12) for y in pts):
                pts.append(x)
        pts = pts[:m]
        tries = 0
        while len(pts) < m:
            C = rng.uniform(lows, highs, size=(4 * m, self.dim))
            for c in C:
                x = self.point + self.basis @ c
                if self.contains(x, 1e-12):
                    pts.append(x)
                    if len(pts) == m:
                        break
            tries += 1
            if tries > 1000:
                raise InfeasibleError("could not sample the fixed set")
        return np.array(pts)

    def project(self, u, tol=1e-10, max_iter=100_000):
        """Metric projection onto Fix(S); Hilbert case (p = 2) only."""
        from .verify import projection_oracle

        return projection_oracle(self.space, self, u, tol=tol, max_iter=max_iter)
