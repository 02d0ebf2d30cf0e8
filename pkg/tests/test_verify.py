import numpy as np
import pytest

from sunnyfix import (
    AffineMap,
    Ball,
    Box,
    ClampMap,
    ConstantContraction,
    FiniteMean,
    LpSpace,
    Representation,
    SchemeConfig,
    apply_mean,
    approx_fixed_membership,
    cesaro_mean,
    final_bound_check,
    gamma_estimate,
    projection_oracle,
    run_anchor,
    run_viscosity,
    variational_inequality,
)
from sunnyfix.verify import DiagnosticReport, boundedness_check, quadratic_bound_check, retraction_anchor

from conftest import diagonal_family

SP2 = LpSpace(2)
SP1 = LpSpace(1)


def test_approx_fixed_membership(diagonal, flip):
    assert approx_fixed_membership(diagonal, [3, 2], None, 1e-12, [0.3, 0.3])
    D = Box([-1], [1])
    assert approx_fixed_membership(flip, [1], D, 0.1, [0.04])
    assert not approx_fixed_membership(flip, [1], D, 0.1, [0.06])
    assert not approx_fixed_membership(flip, [1], D, 0.1, [1.5])
    with pytest.raises(ValueError):
        approx_fixed_membership(flip, [1], D, 0.0, [0.0])


def test_variational_inequality_examples():
    rpt = variational_inequality(SP2, [0.5, 0.5], [1, 0], [[0.5, 0.5]])
    assert rpt.passed and rpt["variational_inequality"].value == 0.0
    rpt = variational_inequality(SP2, [0.5, 0.5], [1, 0], [[0, 0]])
    assert rpt.passed and rpt["variational_inequality"].value == 0.0
    rpt = variational_inequality(SP2, [0.4, 0.4], [1, 0], [[1, 1]])
    assert not rpt.passed
    assert rpt["variational_inequality"].value == pytest.approx(0.12)
    with pytest.raises(ValueError):
        variational_inequality(SP2, [0.5, 0.5], [1, 0], np.empty((0, 2)))


def test_gamma_examples(flip):
    Px, x = np.zeros(2) + 0.5, np.array([1.0, 0.0])
    assert gamma_estimate(SP2, np.tile(Px, (5, 1)), x, Px, 5) == 0.0
    bad = np.tile(Px + (x - Px), (3, 1))
    assert gamma_estimate(SP2, bad, x, Px, 3) == pytest.approx(0.5)
    tr = run_viscosity(flip, SchemeConfig(outer_steps=200), ConstantContraction([1.0]))
    g = gamma_estimate(SP1, tr, [1.0], [0.0], 10)
    assert 0 < g < 0.01
    with pytest.raises(ValueError):
        gamma_estimate(SP1, tr, [1.0], [0.0], 0)


def test_final_bound_examples(flip):
    Px, x = np.array([0.5, 0.5]), np.array([1.0, 0.0])
    assert final_bound_check(SP2, np.tile(Px, (3, 1)), x, Px, 0.0, inner_tol=0.0).passed
    tr = run_viscosity(flip, SchemeConfig(outer_steps=50), ConstantContraction([1.0]))
    assert final_bound_check(SP1, tr, [1.0], [0.0], 0.0).passed
    bad = (Px - 3 * (x - Px))[None, :]
    rpt = final_bound_check(SP2, bad, x, Px, 0.0, inner_tol=0.0)
    assert not rpt.passed
    # 9|v|^2 + 6|v|^2 with |v|^2 = 0.5
    assert rpt["final_bound"].value == pytest.approx(7.5)


def test_bound_checks_catch_far_points(diagonal):
    f = ConstantContraction([1.0, 0.0])
    samples = diagonal.fixed_set_oracle().sample(10)
    far = np.array([[3.0, -2.0]])
    assert not quadratic_bound_check(SP2, far, f, 0.0, samples, inner_tol=0.0).passed
    assert not boundedness_check(SP2, far, f, 0.0, samples, inner_tol=0.0).passed


def test_projection_oracle_examples(diagonal, flip):
    fs = diagonal.fixed_set_oracle()
    np.testing.assert_allclose(projection_oracle(SP2, fs, [1, 0]), [0.5, 0.5], atol=1e-12)
    np.testing.assert_array_equal(projection_oracle(SP2, fs, [0.3, 0.3]), [0.3, 0.3])
    origin = Representation(SP2, [AffineMap(-np.eye(2))]).fixed_set_oracle()
    np.testing.assert_array_equal(projection_oracle(SP2, origin, [3, 4]), [0, 0])
    with pytest.raises(ValueError):
        projection_oracle(LpSpace(2, 3.0), fs, [1, 0])


@pytest.mark.parametrize("u", [[1.0, 0.0], [3.0, -1.0], [-2.0, 0.5], [2.0, 2.5], [0.2, 0.9]])
def test_dykstra_output_satisfies_vi(diagonal, u):
    fs = diagonal.fixed_set_oracle()
    Pu = projection_oracle(SP2, fs, u)
    assert fs.contains(Pu, 1e-9)
    assert variational_inequality(SP2, Pu, u, fs.sample(50), vi_tol=1e-8).passed


def test_dykstra_matches_closed_form_with_active_box(diagonal):
    # the line projection (t, t) with t = (u1 + u2)/2 is clipped to [0, 1]
    fs = diagonal.fixed_set_oracle()
    np.testing.assert_allclose(projection_oracle(SP2, fs, [3.0, 2.0]), [1.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(projection_oracle(SP2, fs, [-3.0, 1.0]), [0.0, 0.0], atol=1e-9)


def test_dykstra_with_ball_and_box():
    rep = Representation(SP2, [ClampMap([0, -5], [5, 5])], domain=Ball([0, 0], 1.0))
    fs = rep.fixed_set_oracle()
    P = projection_oracle(SP2, fs, [-1.0, 2.0])
    assert fs.contains(P, 1e-8)
    assert variational_inequality(SP2, P, [-1.0, 2.0], fs.sample(50), vi_tol=1e-8).passed


def test_retraction_anchor_constant_map(diagonal):
    fs = diagonal.fixed_set_oracle()
    x, Px = retraction_anchor(SP2, fs, ConstantContraction([1.0, 0.0]), 0.0)
    np.testing.assert_array_equal(x, [1.0, 0.0])
    np.testing.assert_allclose(Px, [0.5, 0.5], atol=1e-12)


def test_perturbation_along_normal_is_not_detected_by_vi(diagonal):
    # u - Pu is normal to the segment, so the VI value stays negative
    fs = diagonal.fixed_set_oracle()
    u = np.array([1.0, 0.0])
    Pu = projection_oracle(SP2, fs, u)
    d = (u - Pu) / np.linalg.norm(u - Pu)
    rpt = variational_inequality(SP2, Pu + 0.05 * d, u, fs.sample(50))
    assert rpt["variational_inequality"].value < 0
    assert diagonal.generator_residuals(Pu + 0.05 * d).max() > 0.05


def test_tangential_perturbation_is_detected(diagonal):
    fs = diagonal.fixed_set_oracle()
    wrong = np.array([0.45, 0.45])
    assert not variational_inequality(SP2, wrong, [1.0, 0.0], fs.sample(50)).passed


def test_anchor_mean_residual_envelope():
    rep = diagonal_family()
    x = np.array([1.0, 0.0])
    mu = cesaro_mean(16, 2)
    tr = run_anchor(rep, mu, x, 100)
    first = np.linalg.norm(x - apply_mean(rep, mu, tr.steps[0].z))
    for s in tr.steps[1:]:
        assert s.mean_residual <= 10 * first / s.n


def test_two_anchor_retractions_pass_vi():
    rep = diagonal_family()
    fs = rep.fixed_set_oracle()
    samples = fs.sample(50)
    for x in ([1.0, 0.0], [0.0, 0.6]):
        tr = run_anchor(rep, cesaro_mean(16, 2), x, 200)
        assert variational_inequality(SP2, tr.z_hat, x, samples, vi_tol=1e-4).passed
        again = run_anchor(rep, cesaro_mean(16, 2), x, 200, warm_start=np.zeros(2))
        assert np.linalg.norm(again.z_hat - tr.z_hat) <= 10 * 1e-10


def test_diagnostic_report_aggregation():
    r = DiagnosticReport().add("a", 1.0, 2.0).add("b", 3.0, 2.0)
    assert not r.passed
    assert r["a"].passed and not r["b"].passed
    d = r.as_dict()
    assert d["verdict"] == "fail" and len(d["checks"]) == 2
    assert "[FAIL] b" in str(r)
    with pytest.raises(KeyError):
        r["missing"]
