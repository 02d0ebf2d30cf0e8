"""Acceptance gate: one PASS/FAIL line per acceptance check at its stated tolerance.

Run ``python3 tests/test_acceptance.py`` for the summary lines, or
``pytest tests/test_acceptance.py -v -s`` to see them inside pytest.
"""

import csv
import functools
import shutil
import subprocess
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import CONFIGS, diagonal_family, flip_family  # noqa: E402
from sunnyfix import (  # noqa: E402
    ConstantContraction,
    FiniteMean,
    HarmonicSchedule,
    LpSpace,
    SchemeConfig,
    apply_mean,
    cesaro_mean,
    gamma_estimate,
    pairing,
    projection_oracle,
    regularity_defect,
    run_anchor,
    run_viscosity,
    solve_implicit,
    variational_inequality,
)
from sunnyfix.cli import main  # noqa: E402
from sunnyfix.config import load_config  # noqa: E402
from sunnyfix.verify import boundedness_check, final_bound_check, quadratic_bound_check  # noqa: E402


def report(title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {title} | {detail}"
    print(line, flush=True)
    return bool(passed)


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


# -- duality map ------------------------------------------------------------------


def _duality_checks():
    rng = np.random.default_rng(0)
    worst_pair = worst_norm = worst_grad = 0.0
    h = 1e-6
    for p in (1.5, 2.0, 3.0):
        sp = LpSpace(5, p)
        for _ in range(100):
            x = rng.uniform(-3, 3, 5)
            if p < 2:
                x = np.where(np.abs(x) < 0.1, np.copysign(0.1, x), x)
            J = sp.duality_map(x)
            n = sp.norm(x)
            worst_pair = max(worst_pair, abs(pairing(x, J) - n**2) / n**2)
            worst_norm = max(worst_norm, abs(sp.dual_norm(J) - n) / n)
            E = h * np.eye(5)
            g = np.array([(sp.norm(x + e) ** 2 - sp.norm(x - e) ** 2) / (4 * h) for e in E])
            worst_grad = max(worst_grad, float(np.abs(g - J).max()))
    return worst_pair, worst_norm, worst_grad


def check_duality_map():
    (wp, wn, wg), dt = timed(_duality_checks)
    ok = wp <= 1e-10 and wn <= 1e-10 and wg <= 1e-5 and dt < 1.0
    return report(
        "duality map",
        ok,
        f"max rel <x,Jx>-|x|^2 {wp:.2e}, max rel |Jx|_q-|x| {wn:.2e}, max |grad-J| {wg:.2e}, {dt:.2f}s",
    )


# -- mean machinery ------------------------------------------------------------------


def _mean_checks():
    exact = all(regularity_defect(cesaro_mean(n, 1), [1], exact=True) == Fraction(2, n) for n in range(1, 65))
    rep = diagonal_family()
    mu = cesaro_mean(10, 2)
    rng = np.random.default_rng(0)
    ratio = 0.0
    for _ in range(100):
        x, y = rng.uniform(-2, 2, (2, 2))
        ratio = max(ratio, np.linalg.norm(apply_mean(rep, mu, x) - apply_mean(rep, mu, y)) / np.linalg.norm(x - y))
    fixed = rep.fixed_set_oracle().sample(50, seed=0)
    moved = max(np.linalg.norm(apply_mean(rep, mu, p) - p) for p in fixed)
    return exact, ratio, moved


def check_mean_machinery():
    (exact, ratio, moved), dt = timed(_mean_checks)
    ok = exact and ratio <= 1 + 1e-9 and moved <= 1e-9 and dt < 5.0
    return report(
        "mean machinery",
        ok,
        f"defect == 2/n exactly for n<=64: {exact}, max expansion {ratio:.12f}, max |T_mu p - p| {moved:.1e}, {dt:.2f}s",
    )


# -- closed form values ------------------------------------------------------------------


def _closed_forms():
    flip = flip_family()
    z, _ = solve_implicit(flip, FiniteMean.point_mass([1]), ConstantContraction([1.0]), 0.2, [0.0])
    tr = run_anchor(flip, FiniteMean.point_mass([1]), [1.0], 2)
    return abs(z[0] - 1 / 9), abs(tr.steps[1].z[0] - 1 / 3)


def check_closed_form_values():
    (e1, e2), dt = timed(_closed_forms)
    ok = e1 <= 1e-9 and e2 <= 1e-9 and dt < 1.0
    return report(
        "closed-form scheme values", ok, f"|z-1/9| {e1:.1e}, |z_2-1/3| {e2:.1e}, {dt:.2f}s")


# -- viscosity limit matches projection ------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def harmonic_diagonal_run():
    rep = diagonal_family()
    cfg = SchemeConfig(epsilon=HarmonicSchedule(), outer_steps=200, inner_tol=1e-10)
    tr, dt = timed(run_viscosity, rep, cfg, ConstantContraction([1.0, 0.0]))
    return rep, tr, dt


def check_viscosity_limit_matches_projection():
    rep, tr, dt = harmonic_diagonal_run()
    fs = rep.fixed_set_oracle()
    x = np.array([1.0, 0.0])
    Px = projection_oracle(rep.space, fs, x)
    dist = rep.space.distance(tr.z_hat, Px)
    res = float(rep.generator_residuals(tr.z_hat).max())
    vi = variational_inequality(rep.space, tr.z_hat, x, fs.sample(50, seed=0))["variational_inequality"].value
    gamma = gamma_estimate(rep.space, tr, x, Px, 10)
    ok = dist <= 1e-3 and res <= 1e-3 and vi <= 1e-4 and gamma <= 1e-4 and dt < 60.0
    return report(
        "viscosity limit vs projection oracle",
        ok,
        f"distance {dist:.3e}, residual {res:.3e}, VI max {vi:.3e}, Gamma {gamma:.3e}, {dt:.1f}s",
    )


# -- trace inequalities ------------------------------------------------------------------


def check_trace_inequalities():
    details, ok = [], True
    flip = flip_family()
    flip_tr = run_viscosity(flip, SchemeConfig(outer_steps=200), ConstantContraction([1.0]))
    rep, tr, _ = harmonic_diagonal_run()
    for name, r, t, x in (("diagonal", rep, tr, [1.0, 0.0]), ("flip", flip, flip_tr, [1.0])):
        f = ConstantContraction(x)
        fs = r.fixed_set_oracle()
        samples = fs.sample(20, seed=0)
        Px = projection_oracle(r.space, fs, x)
        checks = [
            quadratic_bound_check(r.space, t, f, 0.0, samples),
            final_bound_check(r.space, t, x, Px, 0.0),
            boundedness_check(r.space, t, f, 0.0, samples),
        ]
        worst = max(c.checks[0].value for c in checks)
        ok &= all(c.passed for c in checks)
        details.append(f"{name} worst violation {worst:.2e}")
    return report(
        "trace inequalities", ok, ", ".join(details))


# -- anchor scheme ------------------------------------------------------------------


def check_anchor_scheme():
    families = {
        "diagonal": (diagonal_family(), load_config(CONFIGS / "diagonal_anchor.cfg"), [0.0, 0.6]),
        "flip": (flip_family(), load_config(CONFIGS / "flip_anchor.cfg"), [-0.5]),
    }
    ok, details = True, []
    for name, (rep, cfg, other) in families.items():
        mu = cfg.mean_schedule(rep.k)(1, rep.k)
        samples = rep.fixed_set_oracle().sample(50, seed=0)
        tr = run_anchor(rep, mu, cfg.anchor, 200, cfg.inner_tol)
        m = tr.mean_residuals
        decreasing = m[-1] < m[1]
        final = m[-1]
        vis = []
        for x, t in ((cfg.anchor, tr), (np.array(other), run_anchor(rep, mu, other, 200, cfg.inner_tol))):
            vis.append(variational_inequality(rep.space, t.z_hat, x, samples)["variational_inequality"].value)
        part = decreasing and final <= 1e-3 and max(vis) <= 1e-4
        ok &= part
        details.append(f"{name}: final |z-T_mu z| {final:.3e}, VI {vis[0]:.2e}/{vis[1]:.2e}")
    return report(
        "anchor scheme", ok, "; ".join(details))


# -- negative controls ------------------------------------------------------------------


def _tampered_verify(tmp):
    cfg = CONFIGS / "diagonal.cfg"
    clean = tmp / "clean"
    if main(["run", "--config", str(cfg), "--out", str(clean), "--quiet"]) != 0:
        return None
    rows = list(csv.reader((clean / "trace.csv").read_text().splitlines()))
    col = rows[0].index("z_1")
    for r in rows[1:]:
        r[col] = repr(float(r[col]) + 0.1)
    bad = tmp / "tampered"
    bad.mkdir()
    (bad / "trace.csv").write_text("\n".join(",".join(r) for r in rows) + "\n")
    return main(["verify", "--config", str(cfg), "--out", str(bad), "--quiet"])


def check_negative_controls():
    rep = diagonal_family()
    fs = rep.fixed_set_oracle()
    u = np.array([1.0, 0.0])
    Pu = projection_oracle(rep.space, fs, u)
    perturbed = Pu + 0.05 * (u - Pu) / np.linalg.norm(u - Pu)
    vi = variational_inequality(rep.space, perturbed, u, fs.sample(50, seed=0))
    vi_fails = not vi.passed
    with tempfile.TemporaryDirectory() as d:
        cert_code = main(["certify", "--config", str(CONFIGS / "noncommuting.cfg"), "--quiet"])
        tamper_code = _tampered_verify(Path(d))
    ok = vi_fails and cert_code == 3 and tamper_code == 1
    return report(
        "negative controls",
        ok,
        f"perturbed VI value {vi['variational_inequality'].value:.3e} (rejected: {vi_fails}), "
        f"noncommuting exit {cert_code}, tampered verify exit {tamper_code}",
    )


# -- determinism ------------------------------------------------------------------

DETERMINISM_CONFIGS = ["diagonal.cfg", "diagonal_harmonic.cfg", "flip.cfg", "diagonal_anchor.cfg", "flip_anchor.cfg"]


def check_determinism():
    same = {}
    with tempfile.TemporaryDirectory() as d:
        for name in DETERMINISM_CONFIGS:
            blobs = []
            for tag in ("a", "b"):
                out = Path(d) / tag / name
                main(["run", "--config", str(CONFIGS / name), "--out", str(out), "--seed", "0", "--quiet"])
                blobs.append((out / "trace.csv").read_bytes())
            same[name] = blobs[0] == blobs[1]
    ok = all(same.values())
    return report(
        "determinism", ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))


CHECKS = [
    check_duality_map,
    check_mean_machinery,
    check_closed_form_values,
    check_viscosity_limit_matches_projection,
    check_trace_inequalities,
    check_anchor_scheme,
    check_negative_controls,
    check_determinism,
]


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__[len("check_"):] for c in CHECKS])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    print(f"{sum(results)}/{len(results)} acceptance checks pass")
    sys.exit(0 if all(results) else 1)
