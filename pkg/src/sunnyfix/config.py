"""Experiment configs (YAML) and the CSV trace-file format."""

from __future__ import annotations

import copy
import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .exceptions import CertificationError, ConfigError
from .lp_space import LpSpace
from .means import cesaro_mean
from .scheme import (
    AffineContraction,
    CesaroSchedule,
    ConstantContraction,
    FixedMeanSchedule,
    HarmonicSchedule,
    LogSchedule,
    PowerSchedule,
    ScaledContraction,
    SchemeConfig,
    StepRecord,
    Trace,
)
from .semigroup import AffineMap, Ball, Box, ClampMap, Composition, Representation

__all__ = [
    "ExperimentConfig",
    "SWEEPABLE",
    "load_config",
    "parse_config",
    "read_trace",
    "trace_header",
    "write_trace",
]


def _num(v, name):
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {v!r}") from None
    if not np.isfinite(out):
        raise ConfigError(f"{name}: must be finite")
    return out


def _int(v, name):
    out = _num(v, name)
    if out != int(out):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    return int(out)


def _vec(v, name, d=None):
    try:
        arr = np.array([_num(x, name) for x in np.atleast_1d(np.asarray(v, dtype=object))], dtype=np.float64)
    except TypeError:
        raise ConfigError(f"{name}: expected a list of numbers") from None
    if d is not None and arr.shape[0] != d:
        raise ConfigError(f"{name}: expected {d} entries, got {arr.shape[0]}")
    return arr


def _bound_vec(v, name, d):
    # clamp/box bounds may use .inf / -.inf
    try:
        arr = np.array([float(x) for x in v], dtype=np.float64) if isinstance(v, list) else None
    except (TypeError, ValueError):
        arr = None
    if arr is None or arr.shape[0] != d or np.any(np.isnan(arr)):
        raise ConfigError(f"{name}: expected {d} bounds")
    return arr


def _mat(v, name, d):
    try:
        A = np.array([[_num(x, name) for x in row] for row in v], dtype=np.float64)
    except TypeError:
        raise ConfigError(f"{name}: expected a matrix (list of rows)") from None
    if A.shape != (d, d):
        raise ConfigError(f"{name}: expected a {d}x{d} matrix, got shape {A.shape}")
    return A


def _single(spec, name):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{name}: expected a mapping with exactly one kind key")
    return next(iter(spec.items()))


def _parse_map(spec, d, name):
    kind, body = _single(spec, name)
    if kind == "affine":
        b = body.get("b")
        return AffineMap(_mat(body.get("A"), f"{name}.A", d), None if b is None else _vec(b, f"{name}.b", d))
    if kind == "clamp":
        lo = _bound_vec(body.get("lo"), f"{name}.lo", d)
        hi = _bound_vec(body.get("hi"), f"{name}.hi", d)
        if np.any(lo > hi):
            raise ConfigError(f"{name}: clamp needs lo <= hi")
        return ClampMap(lo, hi)
    if kind == "compose":
        if not isinstance(body, list) or not body:
            raise ConfigError(f"{name}: compose expects a non-empty list of maps")
        return Composition(tuple(_parse_map(m, d, f"{name}[{i}]") for i, m in enumerate(body)))
    raise ConfigError(f"{name}: unknown map kind {kind!r}")


def _parse_domain(spec, d, p):
    if spec is None:
        return None
    kind, body = _single(spec, "domain")
    if kind == "box":
        lo = _bound_vec(body.get("lo"), "domain.lo", d)
        hi = _bound_vec(body.get("hi"), "domain.hi", d)
        if np.any(lo > hi):
            raise ConfigError("domain box needs lo <= hi")
        return Box(lo, hi)
    if kind == "ball":
        r = _num(body.get("radius"), "domain.radius")
        if r <= 0:
            raise ConfigError("domain.radius must be positive")
        return Ball(_vec(body.get("center"), "domain.center", d), r, p)
    raise ConfigError(f"unknown domain kind {kind!r}")


def _parse_contraction(spec, d):
    kind, body = _single(spec, "contraction")
    if kind == "constant":
        return ConstantContraction(_vec(body.get("u"), "contraction.u", d))
    if kind == "scaled":
        return ScaledContraction(_num(body.get("alpha"), "contraction.alpha"), _vec(body.get("u"), "contraction.u", d))
    if kind == "affine":
        alpha = body.get("alpha")
        return AffineContraction(
            _mat(body.get("F"), "contraction.F", d),
            _vec(body.get("b", [0.0] * d), "contraction.b", d),
            None if alpha is None else _num(alpha, "contraction.alpha"),
        )
    raise ConfigError(f"unknown contraction kind {kind!r}")


def _parse_epsilon(spec):
    spec = spec or {"rule": "harmonic"}
    rule = spec.get("rule", "harmonic")
    if rule == "harmonic":
        return HarmonicSchedule()
    if rule == "power":
        return PowerSchedule(_num(spec.get("gamma", 1.0), "epsilon.gamma"))
    if rule == "log":
        return LogSchedule(_num(spec.get("c", 1.0), "epsilon.c"))
    raise ConfigError(f"unknown epsilon rule {rule!r}")


@dataclass
class ExperimentConfig:
    name: str
    space: LpSpace
    generators: list
    domain: object
    scheme: str
    epsilon: object
    mean_rule: str
    mean_size: int
    n_outer: int
    inner_tol: float
    inner_max: int
    outer_tol: float = None
    warm_start: np.ndarray = None
    contraction: object = None
    anchor: np.ndarray = None
    seed: int = 0
    out_dir: str = "out"
    samples: int = 50
    tail: int = 10
    certify_samples: int = 100
    raw: dict = field(default_factory=dict, repr=False)

    def representation(self):
        try:
            return Representation(self.space, self.generators, self.domain)
        except CertificationError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def mean_schedule(self, k):
        if self.mean_rule == "cesaro":
            return CesaroSchedule()
        return FixedMeanSchedule(cesaro_mean(self.mean_size, k))

    def scheme_config(self, k):
        return SchemeConfig(
            epsilon=self.epsilon,
            mean_schedule=self.mean_schedule(k),
            inner_tol=self.inner_tol,
            inner_max_iters=self.inner_max,
            outer_steps=self.n_outer,
            outer_tol=self.outer_tol,
            warm_start=self.warm_start,
        )

    def effective_contraction(self):
        """The map f of the scheme; the anchor scheme uses f = constant anchor."""
        if self.scheme == "anchor":
            return ConstantContraction(self.anchor)
        return self.contraction


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(raw, name=path.stem)


def parse_config(raw, name="experiment"):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = copy.deepcopy(raw)
    sp = raw.get("space") or {}
    try:
        space = LpSpace(_int(sp.get("d"), "space.d"), _num(sp.get("p", 2.0), "space.p"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    d = space.d
    gens = raw.get("generators")
    if not isinstance(gens, list) or not gens:
        raise ConfigError("generators: expected a non-empty list")
    generators = [_parse_map(g, d, f"generators[{i}]") for i, g in enumerate(gens)]
    domain = _parse_domain(raw.get("domain"), d, space.p)

    sc = raw.get("scheme") or {}
    kind = sc.get("kind", "viscosity")
    if kind not in ("viscosity", "anchor"):
        raise ConfigError(f"scheme.kind must be 'viscosity' or 'anchor', got {kind!r}")
    mean = sc.get("mean") or {"rule": "cesaro" if kind == "viscosity" else "fixed"}
    mean_rule = mean.get("rule", "cesaro")
    if mean_rule not in ("cesaro", "fixed"):
        raise ConfigError(f"unknown mean rule {mean_rule!r}")
    mean_size = _int(mean.get("size", 16), "scheme.mean.size")
    if mean_size < 1:
        raise ConfigError("scheme.mean.size must be >= 1")
    if kind == "anchor" and mean_rule != "fixed":
        raise ConfigError("the anchor scheme needs a fixed mean (scheme.mean.rule: fixed)")

    cfg = ExperimentConfig(
        name=name,
        space=space,
        generators=generators,
        domain=domain,
        scheme=kind,
        epsilon=_parse_epsilon(sc.get("epsilon")),
        mean_rule=mean_rule,
        mean_size=mean_size,
        n_outer=_int(sc.get("n_outer", 200), "scheme.n_outer"),
        inner_tol=_num(sc.get("inner_tol", 1e-10), "scheme.inner_tol"),
        inner_max=_int(sc.get("inner_max", 100_000), "scheme.inner_max"),
        outer_tol=None if sc.get("outer_tol") is None else _num(sc["outer_tol"], "scheme.outer_tol"),
        warm_start=None if sc.get("warm_start") is None else _vec(sc["warm_start"], "scheme.warm_start", d),
        seed=_int(raw.get("seed", 0), "seed"),
        out_dir=str((raw.get("output") or {}).get("dir", f"out/{name}")),
        raw=raw,
    )
    if cfg.n_outer < 1 or cfg.inner_max < 1 or cfg.inner_tol <= 0:
        raise ConfigError("n_outer, inner_max must be >= 1 and inner_tol > 0")
    if kind == "viscosity":
        if raw.get("contraction") is None:
            raise ConfigError("viscosity scheme needs a contraction")
        cfg.contraction = _parse_contraction(raw["contraction"], d)
        try:
            cfg.contraction.certified_alpha(space.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        if raw.get("anchor") is None:
            raise ConfigError("anchor scheme needs an anchor point")
        cfg.anchor = _vec(raw["anchor"], "anchor", d)
    ver = raw.get("verify") or {}
    cfg.samples = _int(ver.get("samples", 50), "verify.samples")
    cfg.tail = _int(ver.get("tail", 10), "verify.tail")
    cfg.certify_samples = _int(ver.get("certify_samples", 100), "verify.certify_samples")
    if min(cfg.samples, cfg.tail, cfg.certify_samples) < 1:
        raise ConfigError("verify sample counts must be >= 1")
    return cfg


def _set_epsilon(raw, key, value):
    eps = raw.setdefault("scheme", {}).setdefault("epsilon", {})
    if key == "gamma":
        eps["rule"] = "power"
    elif key == "c":
        eps["rule"] = "log"
    eps[key] = value


SWEEPABLE = {
    "gamma": lambda raw, v: _set_epsilon(raw, "gamma", v),
    "c": lambda raw, v: _set_epsilon(raw, "c", v),
    "n_outer": lambda raw, v: raw.setdefault("scheme", {}).__setitem__("n_outer", v),
    "inner_tol": lambda raw, v: raw.setdefault("scheme", {}).__setitem__("inner_tol", v),
    "mean_size": lambda raw, v: raw.setdefault("scheme", {}).setdefault("mean", {"rule": "fixed"}).__setitem__("size", v),
    "p": lambda raw, v: raw.setdefault("space", {}).__setitem__("p", v),
}


# -- trace files -------------------------------------------------------


def trace_header(d, k):
    return (
        ["n", "epsilon", "inner_iters", "inner_residual"]
        + [f"z_{i + 1}" for i in range(d)]
        + [f"residual_{i + 1}" for i in range(k)]
        + ["mean_residual", "vi_value", "bound6_slack", "gbh_slack"]
    )


def _f(v):
    return repr(float(v))


def write_trace(path, trace, vi, bound6, gbh):
    """Write a trace as CSV: 8 + d + k columns, one row per outer step."""
    d = trace.steps[0].z.shape[0] if trace.steps else 0
    k = trace.steps[0].generator_residuals.shape[0] if trace.steps else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(d, k))
    for s, a, b, c in zip(trace.steps, vi, bound6, gbh):
        w.writerow(
            [s.n, _f(s.epsilon), s.inner_iters, _f(s.inner_residual)]
            + [_f(v) for v in s.z]
            + [_f(v) for v in s.generator_residuals]
            + [_f(s.mean_residual), _f(a), _f(b), _f(c)]
        )
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_trace(path, d, k, scheme="viscosity", alpha=0.0, inner_tol=0.0):
    """Read a trace CSV back into a :class:`Trace` (diagnostic columns dropped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"trace {path} is empty")
    header, body = rows[0], rows[1:]
    if header != trace_header(d, k):
        raise ConfigError(f"trace {path} has unexpected columns for d={d}, k={k}")
    if not body:
        raise ConfigError(f"trace {path} has no rows")
    trace = Trace(scheme=scheme, alpha=alpha, inner_tol=inner_tol)
    for row in body:
        vals = [float(v) for v in row]
        if not np.all(np.isfinite(vals)):
            raise ConfigError(f"trace {path} has non-finite values")
        z = np.array(vals[4 : 4 + d])
        trace.steps.append(
            StepRecord(
                n=int(vals[0]),
                epsilon=vals[1],
                z=z,
                inner_iters=int(vals[2]),
                inner_residual=vals[3],
                converged=vals[3] <= inner_tol,
                generator_residuals=np.array(vals[4 + d : 4 + d + k]),
                mean_residual=vals[4 + d + k],
            )
        )
    ns = [s.n for s in trace.steps]
    if ns != sorted(ns):
        raise ConfigError(f"trace {path} rows are not ordered by n")
    return trace
