"""Checkable inequalities for the schemes, plus an independent projection oracle.

Every check compares an observed value with a threshold and lands in a
:class:`DiagnosticReport`. Checks on scheme traces carry a slack
proportional to the inner tolerance, since each z_n solves its implicit
equation only approximately.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleError
from .lp_space import as_vector

__all__ = [
    "Check",
    "DiagnosticReport",
    "approx_fixed_membership",
    "boundedness_check",
    "final_bound_check",
    "gamma_estimate",
    "projection_oracle",
    "quadratic_bound_check",
    "retraction_anchor",
    "run_diagnostics",
    "step_diagnostics",
    "variational_inequality",
]

VI_TOL = 1e-6
GAMMA_TOL = 1e-4
RESIDUAL_TOL = 1e-3
ORACLE_TOL = 1e-3
SLACK_FACTOR = 10.0


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: {self.value:.6g} (threshold {self.threshold:.6g}){extra}"


@dataclass
class DiagnosticReport:
    checks: list = field(default_factory=list)

    def add(self, name, value, threshold, passed=None, detail=""):
        value, threshold = float(value), float(threshold)
        if passed is None:
            passed = value <= threshold
        self.checks.append(Check(name, value, threshold, bool(passed), detail))
        return self

    def extend(self, other):
        self.checks.extend(other.checks)
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "verdict": "pass" if self.passed else "fail",
            "checks": [
                {"name": c.name, "value": c.value, "threshold": c.threshold, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def __str__(self):
        lines = [c.line() for c in self.checks]
        lines.append(f"verdict: {'pass' if self.passed else 'fail'}")
        return "\n".join(lines)


def approx_fixed_membership(rep, t, D, eps, x):
    """Whether x lies in F_eps(T_t; D) = {x in D : ||x - T_t x|| <= eps}."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = rep.space.vector(x)
    if D is not None and not D.contains(x):
        return False
    if not rep.in_domain(x):
        return False
    return rep.space.norm(x - rep.apply(t, x)) <= eps


def variational_inequality(space, Px, x, fixed_samples, vi_tol=VI_TOL):
    """max_z <x - Px, J(z - Px)> over sampled fixed points z; pass iff <= vi_tol."""
    samples = np.atleast_2d(np.asarray(fixed_samples, dtype=np.float64))
    if samples.size == 0:
        raise ValueError("variational inequality needs at least one fixed-point sample")
    Px = space.vector(Px)
    v = space.vector(x) - Px
    vals = [space.dpair(v, z - Px) for z in samples]
    worst = int(np.argmax(vals))
    return DiagnosticReport().add(
        "variational_inequality",
        vals[worst],
        vi_tol,
        detail=f"worst z={np.array2string(samples[worst], precision=6)}",
    )


def _zs(trace):
    return trace.zs if hasattr(trace, "zs") else np.atleast_2d(np.asarray(trace, dtype=np.float64))


def gamma_estimate(space, trace, x, Px, tail):
    """max over the last ``tail`` iterates of <x - Px, J(z_n - Px)>."""
    zs = _zs(trace)
    if not 1 <= tail <= len(zs):
        raise ValueError(f"tail must lie in [1, {len(zs)}]")
    v = space.vector(x) - space.vector(Px)
    return max(space.dpair(v, z - Px) for z in zs[-tail:])


def final_bound_check(space, trace, x, Px, alpha, inner_tol=None, c=SLACK_FACTOR):
    """||z_n - Px||^2 <= 2/(1-alpha) <x - Px, J(z_n - Px)> at every step."""
    zs = _zs(trace)
    tol = getattr(trace, "inner_tol", 0.0) if inner_tol is None else inner_tol
    Px = space.vector(Px)
    v = space.vector(x) - Px
    worst, at = -math.inf, 0
    for i, z in enumerate(zs):
        w = z - Px
        nw = space.norm(w)
        viol = nw**2 - 2.0 / (1.0 - alpha) * space.dpair(v, w) - c * tol * (1.0 + nw)
        if viol > worst:
            worst, at = viol, i
    return DiagnosticReport().add("final_bound", worst, 0.0, detail=f"worst step index {at}")


def quadratic_bound_check(space, trace, f, alpha, fixed_samples, inner_tol=None, c=SLACK_FACTOR):
    """||z_n - p||^2 <= 1/(1-alpha) <f(p) - p, J(z_n - p)> for all steps and samples p."""
    zs = _zs(trace)
    tol = getattr(trace, "inner_tol", 0.0) if inner_tol is None else inner_tol
    worst = -math.inf
    for p in np.atleast_2d(fixed_samples):
        v = f(p) - p
        for z in zs:
            w = z - p
            nw = space.norm(w)
            viol = nw**2 - space.dpair(v, w) / (1.0 - alpha) - c * tol * (1.0 + nw)
            worst = max(worst, viol)
    return DiagnosticReport().add("quadratic_bound", worst, 0.0)


def boundedness_check(space, trace, f, alpha, fixed_samples, inner_tol=None, c=SLACK_FACTOR):
    """||z_n - p|| <= ||f(p) - p||/(1-alpha) for all steps and samples p."""
    zs = _zs(trace)
    tol = getattr(trace, "inner_tol", 0.0) if inner_tol is None else inner_tol
    worst = -math.inf
    for p in np.atleast_2d(fixed_samples):
        radius = space.norm(f(p) - p) / (1.0 - alpha)
        dist = space.norms(zs - p)
        worst = max(worst, float(np.max(dist - radius)) - c * tol)
    return DiagnosticReport().add("boundedness", worst, 0.0)


def step_diagnostics(space, trace, f, alpha, fixed_samples, x, Px):
    """Per-step columns: <x-Px, J(z_n-Px)>, slack of the quadratic bound, slack of the final bound.

    Slacks are RHS - LHS (nonnegative when the inequality holds), minimized
    over the fixed-point samples for the quadratic bound.
    """
    zs = _zs(trace)
    samples = np.atleast_2d(fixed_samples)
    fp = [f(p) - p for p in samples]
    vi, b6, gbh = [], [], []
    v = x - Px
    for z in zs:
        w = z - Px
        pv = space.dpair(v, w)
        vi.append(pv)
        gbh.append(2.0 / (1.0 - alpha) * pv - space.norm(w) ** 2)
        b6.append(min(space.dpair(u, z - p) / (1.0 - alpha) - space.norm(z - p) ** 2 for u, p in zip(fp, samples)))
    return np.array(vi), np.array(b6), np.array(gbh)


def projection_oracle(space, fixed_set, u, tol=1e-10, max_iter=100_000):
    """Metric projection of ``u`` onto Fix(S) in the Hilbert case.

    Exact when only one constraint (affine part, box or ball) is active;
    otherwise Dykstra's alternating projections.
    """
    if not space.is_hilbert:
        raise ValueError("metric projection equals the sunny retraction only for p = 2")
    u = as_vector(u, space.d)
    projs = []
    if fixed_set.has_affine:
        projs.append(fixed_set.project_affine)
    if fixed_set.has_box:
        projs.append(fixed_set.project_box)
    if fixed_set.ball is not None:
        projs.append(fixed_set.project_ball)
    if not projs or fixed_set.contains(u, tol=1e-15):
        return u.copy()
    if len(projs) == 1:
        return projs[0](u)

    def violation(z):
        return max(np.linalg.norm(z - P(z)) for P in projs)

    x = u.copy()
    incr = [np.zeros_like(u) for _ in projs]
    for _ in range(max_iter):
        x_prev = x
        for i, P in enumerate(projs):
            y = P(x + incr[i])
            incr[i] = x + incr[i] - y
            x = y
        if np.linalg.norm(x - x_prev) <= 1e-2 * tol and violation(x) <= tol:
            return x
    if violation(x) > 1e3 * tol:
        raise InfeasibleError("Dykstra iteration did not reach the fixed set")
    warnings.warn("Dykstra projection hit max_iter before its stopping test", stacklevel=2)
    return x


def retraction_anchor(space, fixed_set, f, alpha, tol=1e-12, max_iter=10_000):
    """The pair (x, Px) with x = f(Px), via Picard iteration on f o P (p = 2)."""
    x = as_vector(f(fixed_set.point), space.d)
    for _ in range(max_iter):
        Px = projection_oracle(space, fixed_set, x)
        x_new = f(Px)
        if space.norm(x_new - x) <= tol:
            return x_new, projection_oracle(space, fixed_set, x_new)
        x = x_new
    return x, projection_oracle(space, fixed_set, x)


def run_diagnostics(
    rep,
    trace,
    f,
    alpha,
    fixed_samples,
    x,
    Px,
    *,
    oracle_Px=None,
    tail=10,
    vi_tol=VI_TOL,
    gamma_tol=GAMMA_TOL,
    residual_tol=RESIDUAL_TOL,
    oracle_tol=ORACLE_TOL,
):
    """All trace-level checks: the two bounds, the final bound, VI at the limit,
    Gamma over the tail, residual decay, and (p = 2) distance to the oracle."""
    space = rep.space
    report = DiagnosticReport()
    report.add(
        "inner_convergence",
        max(s.inner_residual for s in trace.steps),
        trace.inner_tol,
        passed=not trace.failed and all(s.converged for s in trace.steps),
    )
    report.extend(quadratic_bound_check(space, trace, f, alpha, fixed_samples))
    report.extend(boundedness_check(space, trace, f, alpha, fixed_samples))
    report.extend(final_bound_check(space, trace, x, Px, alpha))
    z_hat = trace.z_hat
    report.extend(variational_inequality(space, z_hat, x, fixed_samples, vi_tol))
    report.add("gamma", gamma_estimate(space, trace, x, Px, min(tail, len(trace))), gamma_tol)
    res = trace.generator_residuals.max(axis=1)
    report.add("final_generator_residual", res[-1], residual_tol)
    m = min(10, len(res))
    early, late = res[:m].max(), res[-m:].max()
    report.add("residual_decay", late, early, passed=late < early or early == 0.0)
    if oracle_Px is not None:
        report.add("oracle_distance", space.distance(z_hat, oracle_Px), oracle_tol)
    return report
