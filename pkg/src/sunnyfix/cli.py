"""Command-line front end: ``sunnyfix {run,verify,sweep,certify} --config PATH``.

Exit codes: 0 success, 1 diagnostics failed (verify), 2 bad config/input,
3 certification failure, 4 inner solver failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import SWEEPABLE, load_config, parse_config, read_trace, write_trace
from .exceptions import CertificationError, ConfigError, InfeasibleError, UnsupportedGeneratorError
from .scheme import run_anchor, run_viscosity
from .verify import DiagnosticReport, retraction_anchor, run_diagnostics, step_diagnostics

log = logging.getLogger("sunnyfix")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CERT, EXIT_INNER = 0, 1, 2, 3, 4


class ExitError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(path, seed=None):
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        raise ExitError(EXIT_CONFIG, f"config error: {exc}") from exc
    if seed is not None:
        cfg.seed = seed
    return cfg


def _certified_rep(cfg):
    try:
        rep = cfg.representation()
    except ConfigError as exc:
        raise ExitError(EXIT_CONFIG, f"config error: {exc}") from exc
    except CertificationError as exc:
        raise ExitError(EXIT_CERT, f"certification failed: {exc}") from exc
    report = rep.certify(cfg.certify_samples, cfg.seed)
    if not report.passed:
        raise ExitError(EXIT_CERT, f"certification failed: {report.failure_message()}")
    return rep, report


def _run_scheme(cfg, rep):
    if cfg.scheme == "anchor":
        mu = cfg.mean_schedule(rep.k)(1, rep.k)
        return run_anchor(rep, mu, cfg.anchor, cfg.n_outer, cfg.inner_tol, cfg.inner_max, cfg.warm_start)
    return run_viscosity(rep, cfg.scheme_config(rep.k), cfg.contraction)


def reference_points(cfg, rep, z_hat):
    """Fixed-point samples and the pair (x, Px) the trace inequalities refer to.

    Px comes from the metric-projection oracle when p = 2; otherwise the
    scheme limit estimate stands in for it.
    """
    f = cfg.effective_contraction()
    alpha = f.certified_alpha(rep.space.p)
    try:
        fs = rep.fixed_set_oracle()
    except UnsupportedGeneratorError:
        fs = None
    except InfeasibleError as exc:
        raise ExitError(EXIT_CONFIG, f"fixed set is empty: {exc}") from exc
    samples = fs.sample(cfg.samples, seed=cfg.seed) if fs is not None else np.atleast_2d(z_hat)
    if fs is not None and rep.space.is_hilbert:
        if cfg.scheme == "anchor":
            x = cfg.anchor.copy()
            Px = fs.project(x)
        else:
            x, Px = retraction_anchor(rep.space, fs, f, alpha)
        source = "oracle"
    else:
        Px = np.asarray(z_hat, dtype=np.float64)
        x = cfg.anchor.copy() if cfg.scheme == "anchor" else f(Px)
        source = "scheme"
    return f, alpha, samples, x, Px, source


def _out_dir(cfg, out):
    path = Path(out) if out is not None else Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args):
    cfg = _load(args.config, args.seed)
    rep, cert = _certified_rep(cfg)
    trace = _run_scheme(cfg, rep)
    if not trace.steps:
        raise ExitError(EXIT_INNER, "scheme produced no steps")
    f, alpha, samples, x, Px, source = reference_points(cfg, rep, trace.z_hat)
    vi, b6, gbh = step_diagnostics(rep.space, trace, f, alpha, samples, x, Px)
    out = _out_dir(cfg, args.out)
    write_trace(out / "trace.csv", trace, vi, b6, gbh)
    diagnostics = run_diagnostics(
        rep, trace, f, alpha, samples, x, Px, oracle_Px=Px if source == "oracle" else None, tail=cfg.tail
    )
    summary = {
        "config": cfg.name,
        "scheme": cfg.scheme,
        "steps": len(trace),
        "failed": trace.failed,
        "message": trace.message,
        "z_hat": trace.z_hat.tolist(),
        "x": np.asarray(x).tolist(),
        "Px": np.asarray(Px).tolist(),
        "px_source": source,
        "certification": cert.as_dict(),
        "diagnostics": diagnostics.as_dict(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("limit estimate z_hat = %s (Px from %s: %s)", trace.z_hat, source, Px)
    log.info("%s", diagnostics)
    if trace.failed:
        raise ExitError(EXIT_INNER, f"inner solver failure: {trace.message}; partial trace written")
    return EXIT_OK


def cmd_verify(args):
    cfg = _load(args.config, args.seed)
    rep, _ = _certified_rep(cfg)
    out = Path(args.out) if args.out is not None else Path(cfg.out_dir)
    path = out / "trace.csv"
    if not path.exists():
        raise ExitError(EXIT_CONFIG, f"missing trace {path}; run first")
    f = cfg.effective_contraction()
    alpha = f.certified_alpha(rep.space.p)
    try:
        trace = read_trace(path, rep.d, rep.k, cfg.scheme, alpha, cfg.inner_tol)
    except (ConfigError, ValueError) as exc:
        raise ExitError(EXIT_CONFIG, f"bad trace: {exc}") from exc
    stored = trace.generator_residuals
    for s in trace.steps:
        s.generator_residuals = rep.generator_residuals(s.z)
    f, alpha, samples, x, Px, source = reference_points(cfg, rep, trace.z_hat)
    report = DiagnosticReport()
    report.add("stored_residuals_consistent", float(np.abs(stored - trace.generator_residuals).max()), 1e-9)
    report.extend(
        run_diagnostics(rep, trace, f, alpha, samples, x, Px, oracle_Px=Px if source == "oracle" else None, tail=cfg.tail)
    )
    (out / "verify.json").write_text(report.to_json() + "\n", encoding="utf-8")
    if not args.quiet:
        print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_certify(args):
    cfg = _load(args.config, args.seed)
    try:
        rep = cfg.representation()
    except CertificationError as exc:
        raise ExitError(EXIT_CERT, f"certification failed: {exc}") from exc
    except ConfigError as exc:
        raise ExitError(EXIT_CONFIG, f"config error: {exc}") from exc
    report = rep.certify(cfg.certify_samples, cfg.seed)
    if not args.quiet:
        print(json.dumps(report.as_dict(), indent=2))
    if not report.passed:
        raise ExitError(EXIT_CERT, f"certification failed: {report.failure_message()}")
    return EXIT_OK


def _sweep_value(param, text):
    try:
        v = float(text)
    except ValueError:
        raise ExitError(EXIT_CONFIG, f"sweep value {text!r} is not a number") from None
    return int(v) if param in ("n_outer", "mean_size") else v


def cmd_sweep(args):
    cfg = _load(args.config, args.seed)
    if args.param not in SWEEPABLE:
        raise ExitError(EXIT_CONFIG, f"unknown sweep parameter {args.param!r}; choose from {sorted(SWEEPABLE)}")
    if not args.values:
        raise ExitError(EXIT_CONFIG, "sweep needs at least one value")
    values = [_sweep_value(args.param, v) for v in args.values]
    rows = []
    for v in values:
        raw = copy.deepcopy(cfg.raw)
        SWEEPABLE[args.param](raw, v)
        try:
            point = parse_config(raw, name=cfg.name)
        except ConfigError as exc:
            raise ExitError(EXIT_CONFIG, f"config error at {args.param}={v}: {exc}") from exc
        point.seed = cfg.seed
        rep, _ = _certified_rep(point)
        trace = _run_scheme(point, rep)
        _, _, _, _, Px, source = reference_points(point, rep, trace.z_hat)
        dist = rep.space.distance(trace.z_hat, Px) if source == "oracle" else float("nan")
        rows.append((v, len(trace), float(trace.generator_residuals[-1].max()), dist, trace.z_hat, trace.failed))
    header = ["value", "steps", "final_residual", "distance_to_oracle"] + [
        f"z_{i + 1}" for i in range(cfg.space.d)
    ] + ["failed"]
    lines = [",".join([args.param] + header[1:])]
    for v, n, res, dist, z, failed in rows:
        lines.append(",".join([repr(v), str(n), repr(res), repr(dist)] + [repr(float(c)) for c in z] + [str(failed).lower()]))
    text = "\n".join(lines) + "\n"
    out = _out_dir(cfg, args.out)
    (out / f"sweep_{args.param}.csv").write_bytes(text.encode("utf-8"))
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_INNER if any(r[-1] for r in rows) else EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (YAML)")
    common.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    common.add_argument("--seed", type=int, default=None, help="seed for certification/diagnostic sampling")
    common.add_argument("--quiet", action="store_true", help="log warnings only; keep reports off stdout")

    parser = argparse.ArgumentParser(prog="sunnyfix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the configured scheme and write trace.csv")
    sub.add_parser("verify", parents=[common], help="check a written trace against all diagnostics")
    sub.add_parser("certify", parents=[common], help="certify the generators only")
    sw = sub.add_parser("sweep", parents=[common], help="rerun over values of one scalar parameter")
    sw.add_argument("--param", required=True, help=f"one of {sorted(SWEEPABLE)}")
    sw.add_argument("--values", nargs="*", default=[], help="values to sweep")
    return parser


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "certify": cmd_certify, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ExitError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
