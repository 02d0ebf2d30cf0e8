"""Implicit fixed-point schemes for a semigroup representation.

Viscosity scheme:  z_n = eps_n f(z_n) + (1 - eps_n) T_{mu_n} z_n
Anchor scheme:     z_n = (1/n) x + (1 - 1/n) T_mu z_n

Each outer step is an implicit equation whose right-hand side is a
contraction with constant q = eps*alpha + (1 - eps); it is solved by plain
Picard iteration warm-started from the previous iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError
from .lp_space import as_vector
from .means import FiniteMean, apply_mean, cesaro_mean
from .semigroup import Ball, Box, operator_norm_bound

__all__ = [
    "AffineContraction",
    "CesaroSchedule",
    "ConstantContraction",
    "CustomSchedule",
    "FixedMeanSchedule",
    "HarmonicSchedule",
    "InnerReport",
    "LogSchedule",
    "PowerSchedule",
    "ScaledContraction",
    "SchemeConfig",
    "StepRecord",
    "Trace",
    "epsilon_schedule_eval",
    "run_anchor",
    "run_viscosity",
    "solve_implicit",
]


# -- contractions ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstantContraction:
    """f(x) = u; contraction constant 0."""

    u: np.ndarray
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "u", as_vector(self.u))

    alpha = 0.0

    def __call__(self, x):
        return self.u.copy()

    def certified_alpha(self, p):
        return 0.0


@dataclass(frozen=True, eq=False)
class ScaledContraction:
    """f(x) = u + alpha (x - u), shrinking toward ``u`` by the factor alpha."""

    alpha: float
    u: np.ndarray
    kind = "scaled"

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"contraction factor must lie in [0, 1), got {self.alpha!r}")
        object.__setattr__(self, "u", as_vector(self.u))

    def __call__(self, x):
        return self.u + self.alpha * (x - self.u)

    def certified_alpha(self, p):
        return float(self.alpha)


@dataclass(frozen=True, eq=False)
class AffineContraction:
    """f(x) = F x + b. ``alpha`` defaults to the certified operator-norm bound."""

    F: np.ndarray
    b: np.ndarray
    alpha: Optional[float] = None
    kind = "affine"

    def __post_init__(self):
        F = np.array(self.F, dtype=np.float64, ndmin=2)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "b", as_vector(self.b, F.shape[0]))

    def __call__(self, x):
        return self.F @ x + self.b

    def certified_alpha(self, p):
        bound = operator_norm_bound(self.F, p)
        alpha = bound if self.alpha is None else float(self.alpha)
        if bound > alpha + 1e-12:
            raise ConfigError(f"affine contraction has norm bound {bound:.6g} > stated alpha {alpha:.6g}")
        if not 0.0 <= alpha < 1.0:
            raise ConfigError(f"affine map is not a certified contraction (bound {bound:.6g})")
        return alpha


# -- schedules ---------------------------------------------------------


@dataclass(frozen=True)
class HarmonicSchedule:
    """eps_n = 1/(n+1)."""

    name = "harmonic"

    def __call__(self, n):
        return 1.0 / (n + 1)


@dataclass(frozen=True)
class PowerSchedule:
    """eps_n = 1/(n+1)^gamma."""

    gamma: float = 1.0
    name = "power"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"power schedule needs gamma > 0, got {self.gamma!r}")

    def __call__(self, n):
        return 1.0 / (n + 1) ** self.gamma


@dataclass(frozen=True)
class LogSchedule:
    """eps_n = c/log(n+2); c < log 3 keeps eps_1 below 1."""

    c: float = 1.0
    name = "log"

    def __post_init__(self):
        if not 0 < self.c < math.log(3.0):
            raise ConfigError(f"log schedule needs 0 < c < log 3, got {self.c!r}")

    def __call__(self, n):
        return self.c / math.log(n + 2)


@dataclass(frozen=True)
class CustomSchedule:
    fn: Callable[[int], float]
    name = "custom"

    def __call__(self, n):
        return float(self.fn(n))


@dataclass(frozen=True)
class CesaroSchedule:
    """mu_n = cesaro_mean(n, k): the outer index drives the mean."""

    name = "cesaro"

    def __call__(self, n, k):
        return cesaro_mean(n, k)


@dataclass(frozen=True)
class FixedMeanSchedule:
    mean: FiniteMean
    name = "fixed"

    def __call__(self, n, k):
        return self.mean


@dataclass
class SchemeConfig:
    epsilon: Callable[[int], float] = field(default_factory=HarmonicSchedule)
    mean_schedule: Callable = field(default_factory=CesaroSchedule)
    inner_tol: float = 1e-10
    inner_max_iters: int = 100_000
    outer_steps: int = 200
    outer_tol: Optional[float] = None
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.inner_tol > 0:
            raise ConfigError("inner_tol must be positive")
        if self.inner_max_iters < 1 or self.outer_steps < 1:
            raise ConfigError("inner_max_iters and outer_steps must be >= 1")


def epsilon_schedule_eval(cfg, n):
    """eps_n for n >= 1, checked to lie in (0, 1)."""
    if n < 1:
        raise ValueError("schedule index starts at n = 1")
    schedule = cfg.epsilon if isinstance(cfg, SchemeConfig) else cfg
    eps = schedule(n)
    if not (0.0 < eps < 1.0) or not math.isfinite(eps):
        raise ConfigError(f"epsilon schedule produced {eps!r} at n={n}; values must lie in (0, 1)")
    return eps


# -- inner solve -------------------------------------------------------


@dataclass
class InnerReport:
    q: float
    iterations: int
    residual: float
    converged: bool
    a_priori_bound: float
    residuals: list
    mean_image: np.ndarray = None

    def observed_ratio(self, floor=1e-13):
        """Worst ratio r_{j+1}/r_j over residuals above roundoff ``floor``."""
        r = np.asarray(self.residuals)
        ok = r[:-1] > floor
        if not np.any(ok):
            return 0.0
        return float((r[1:][ok] / r[:-1][ok]).max())


def _a_priori_bound(q, first_step, tol):
    if first_step <= tol:
        return 0
    if q == 0.0:
        return 1
    if q >= 1.0:
        return math.inf
    return math.ceil(math.log(tol * (1.0 - q) / first_step) / math.log(q))


def solve_implicit(rep, mu, f, eps, warm_start, inner_tol=1e-10, inner_max=100_000, alpha=None):
    """Solve z = eps f(z) + (1 - eps) T_mu z by Picard iteration.

    Returns ``(z, report)``. On success ``||z - (eps f(z) + (1-eps) T_mu z)||
    <= inner_tol``; otherwise ``report.converged`` is False and ``z`` is the
    iterate with the smallest residual seen.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
    space = rep.space
    if alpha is None:
        alpha = f.certified_alpha(space.p)
    q = eps * alpha + (1.0 - eps)
    z = rep.check_point(warm_start)
    residuals = []
    best = (math.inf, z, None)
    bound = None
    for j in range(inner_max + 1):
        tz = apply_mean(rep, mu, z)
        phi = eps * f(z) + (1.0 - eps) * tz
        r = space.norm(z - phi)
        residuals.append(r)
        if bound is None:
            bound = _a_priori_bound(q, r, inner_tol)
        if r < best[0]:
            best = (r, z, tz)
        if r <= inner_tol:
            return z, InnerReport(q, j, r, True, bound, residuals, tz)
        if j == inner_max:
            break
        z = phi
    r, z, tz = best
    return z, InnerReport(q, inner_max, r, False, bound, residuals, tz)


# -- outer loops -------------------------------------------------------


@dataclass
class StepRecord:
    n: int
    epsilon: float
    z: np.ndarray
    inner_iters: int
    inner_residual: float
    converged: bool
    generator_residuals: np.ndarray
    mean_residual: float
    q: float = float("nan")
    observed_ratio: float = 0.0
    a_priori_bound: float = float("nan")


@dataclass
class Trace:
    """Per-outer-step history of a scheme run."""

    scheme: str
    alpha: float
    inner_tol: float
    steps: list = field(default_factory=list)
    failed: bool = False
    message: str = ""
    stopped_early: bool = False

    def __len__(self):
        return len(self.steps)

    @property
    def zs(self):
        return np.array([s.z for s in self.steps])

    @property
    def z_hat(self):
        """Final iterate, the estimate of the scheme limit."""
        return self.steps[-1].z.copy()

    @property
    def epsilons(self):
        return np.array([s.epsilon for s in self.steps])

    @property
    def generator_residuals(self):
        return np.array([s.generator_residuals for s in self.steps])

    @property
    def mean_residuals(self):
        return np.array([s.mean_residual for s in self.steps])


def default_start(rep):
    z = np.zeros(rep.d)
    if isinstance(rep.domain, Box):
        z = np.clip(z, rep.domain.lo, rep.domain.hi)
    elif isinstance(rep.domain, Ball) and not rep.domain.contains(z):
        z = rep.domain.center.copy()
    return z


def _run(rep, scheme, f, alpha, eps_at, mean_at, n_steps, inner_tol, inner_max, warm_start, outer_tol=None):
    trace = Trace(scheme=scheme, alpha=alpha, inner_tol=inner_tol)
    z = default_start(rep) if warm_start is None else rep.check_point(warm_start)
    calm = 0
    for n in range(1, n_steps + 1):
        eps = eps_at(n)
        mu = mean_at(n)
        z_new, rpt = solve_implicit(rep, mu, f, eps, z, inner_tol, inner_max, alpha=alpha)
        trace.steps.append(
            StepRecord(
                n=n,
                epsilon=eps,
                z=z_new,
                inner_iters=rpt.iterations,
                inner_residual=rpt.residual,
                converged=rpt.converged,
                generator_residuals=rep.generator_residuals(z_new),
                mean_residual=rep.space.norm(z_new - rpt.mean_image),
                q=rpt.q,
                observed_ratio=rpt.observed_ratio(),
                a_priori_bound=rpt.a_priori_bound,
            )
        )
        if not rpt.converged:
            trace.failed = True
            trace.message = f"inner solve hit {inner_max} iterations at n={n} (residual {rpt.residual:.3e})"
            break
        if outer_tol is not None:
            calm = calm + 1 if rep.space.norm(z_new - z) <= outer_tol else 0
            if calm >= 5:
                trace.stopped_early = True
                z = z_new
                break
        z = z_new
    return trace


def run_viscosity(rep, cfg, f):
    """Viscosity scheme z_n = eps_n f(z_n) + (1 - eps_n) T_{mu_n} z_n, n = 1..N."""
    alpha = f.certified_alpha(rep.space.p)
    return _run(
        rep,
        "viscosity",
        f,
        alpha,
        lambda n: epsilon_schedule_eval(cfg, n),
        lambda n: cfg.mean_schedule(n, rep.k),
        cfg.outer_steps,
        cfg.inner_tol,
        cfg.inner_max_iters,
        cfg.warm_start,
        cfg.outer_tol,
    )


def run_anchor(rep, mu, anchor_x, n_max, inner_tol=1e-10, inner_max=100_000, warm_start=None):
    """Anchor scheme z_n = (1/n) x + (1 - 1/n) T_mu z_n with a fixed mean, n = 1..n_max."""
    x = rep.check_point(anchor_x)
    f = ConstantContraction(x)
    return _run(
        rep,
        "anchor",
        f,
        0.0,
        lambda n: 1.0 / n,
        lambda n: mu,
        n_max,
        inner_tol,
        inner_max,
        x if warm_start is None else warm_start,
    )
