"""Data-generating process, misspecification, and truth-oracle tests."""

import numpy as np
import pytest

from dwglm.blip import optimal_action
from dwglm.links import LOGIT
from dwglm.simulation import (Study1Params, Study2aParams, Study2bParams,
                              apply_misspecification, generate_study1,
                              generate_study2a, generate_study2b,
                              psi1_contrast_oracle, study1_specs,
                              study2a_specs, study2b_specs, true_psi1_study2b,
                              true_psi2_study2b, _nonzero)


def test_study1_shapes_and_binary():
    ds = generate_study1(Study1Params(n=500, seed=1))
    assert ds.n_subjects == 500 and ds.n_stages == 1
    assert set(np.unique(ds.outcome)) <= {0.0, 1.0}
    assert set(np.unique(ds.stages[0].treatment)) <= {0.0, 1.0}
    x = ds.stages[0].covariates["x"]
    assert np.all((x > 0) & (x < 2))
    assert np.allclose(ds.stages[0].covariates["x_cub"], x ** 3)


def test_study1_outcome_probability_at_x1_untreated():
    # f(1) = 1 + log(1) + cos(pi) + 1 = 1, so P(Y=1 | x=1, a=0) = expit(1)
    ds = generate_study1(Study1Params(n=400_000, seed=9))
    x = ds.stages[0].covariates["x"]
    a = ds.stages[0].treatment
    window = (np.abs(x - 1.0) < 0.05) & (a == 0.0)
    assert window.sum() > 5000
    assert ds.outcome[window].mean() == pytest.approx(LOGIT.g_inv(1.0), abs=0.03)


def test_study1_treatment_rate_at_x1():
    ds = generate_study1(Study1Params(n=2_000_000, seed=13))
    x = ds.stages[0].covariates["x"]
    window = np.abs(x - 1.0) < 0.05
    # expit(-2 + sin 1 + 1) evaluated directly
    expected = LOGIT.g_inv(-2.0 + np.sin(1.0) + 1.0)
    assert expected == pytest.approx(0.4604505, abs=1e-6)
    assert ds.stages[0].treatment[window].mean() == pytest.approx(expected, abs=0.005)


def test_study1_optimal_rule():
    psi = np.array([-1.0, 2.0])
    assert optimal_action(psi, np.array([1.0, 1.0])) == 1
    assert optimal_action(psi, np.array([1.0, 0.4])) == 0
    # threshold at x = 0.5
    for x, want in ((0.51, 1), (0.49, 0)):
        assert optimal_action(psi, np.array([1.0, x])) == want


def test_study2a_columns_and_regret_nonnegative():
    ds = generate_study2a(Study2aParams(n=20_000, seed=3))
    st1, st2 = ds.stages
    x1 = st1.covariates["x1"]
    mu1 = (((-2.0 - x1) > 0).astype(float) - st1.treatment) * (-2.0 - x1)
    x2 = st2.covariates["x2"]
    mu2 = (((-2.0 - x2) > 0).astype(float) - st2.treatment) * (-2.0 - x2)
    assert np.all(mu1 >= 0.0) and np.all(mu2 >= 0.0)
    assert np.allclose(st2.covariates["a1_x1"], st1.treatment * x1)


def test_study2a_x2_conditional_mean():
    ds = generate_study2a(Study2aParams(n=1_000_000, seed=5))
    x1 = ds.stages[0].covariates["x1"]
    x2 = ds.stages[1].covariates["x2"]
    window = np.abs(x1 - 2.0) < 0.1
    assert window.sum() > 50_000
    assert x2[window].mean() == pytest.approx(2.0, abs=0.02)


def test_study2a_optimal_action_example():
    # blip -2 - x at x = 1 is negative
    assert optimal_action(np.array([-2.0, -1.0]), np.array([1.0, 1.0])) == 0


def test_study2a_optimally_treated_probability():
    ds = generate_study2a(Study2aParams(n=400_000, seed=7))
    st1, st2 = ds.stages
    x1 = st1.covariates["x1"]
    mu1 = (((-2.0 - x1) > 0).astype(float) - st1.treatment) * (-2.0 - x1)
    x2 = st2.covariates["x2"]
    mu2 = (((-2.0 - x2) > 0).astype(float) - st2.treatment) * (-2.0 - x2)
    opt = (mu1 == 0.0) & (mu2 == 0.0)
    eta = x1 + np.log(np.abs(x1)) + np.cos(np.pi * x1)
    want = np.clip(LOGIT.g_inv(eta[opt]), 1e-10, 1 - 1e-10).mean()
    assert ds.outcome[opt].mean() == pytest.approx(want, abs=0.01)


def test_study2b_tailoring_model():
    ds = generate_study2b(Study2bParams(n=400_000, seed=11))
    st1, st2 = ds.stages
    o1, a1, o2 = st1.covariates["o1"], st1.treatment, st2.covariates["o2"]
    cell00 = (o1 == 0) & (a1 == 0)
    cell11 = (o1 == 1) & (a1 == 1)
    assert o2[cell00].mean() == pytest.approx(0.5, abs=0.01)
    assert o2[cell11].mean() == pytest.approx(0.7502601, abs=0.01)


def test_study2b_stage2_truth():
    assert true_psi2_study2b(Study2bParams(n=1)) == (0.25, 0.5, 0.35)


def test_stage1_truth_trivial_case():
    params = Study2bParams(n=1, theta=(0, 1, 0, -0.5, -0.1, 1, 0, 0, 0),
                           delta=(0.0, 0.0))
    assert true_psi1_study2b(params) == pytest.approx((-0.5, -0.1), abs=1e-15)
    assert psi1_contrast_oracle(params) == pytest.approx((-0.5, -0.1), abs=1e-15)


def test_stage1_truth_paper_parameter_values():
    psi10, psi11 = true_psi1_study2b(Study2bParams(n=1))
    assert psi10 == pytest.approx(-0.077172, abs=1e-5)
    assert psi11 == pytest.approx(-0.108928, abs=1e-5)


def test_stage1_oracle_agreement_random_parameters():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(50):
        params = Study2bParams(n=1, theta=tuple(rng.normal(0, 1, 9)),
                               delta=tuple(rng.normal(0, 1, 2)))
        a = np.array(true_psi1_study2b(params))
        b = np.array(psi1_contrast_oracle(params))
        worst = max(worst, np.abs(a - b).max())
    assert worst < 1e-10


def test_stage1_oracle_with_truncation_kinks():
    # theta8 = -1 makes phi1 = 0.25 + 0.5 - 1 < 0, exercising |x|+ = 0
    params = Study2bParams(n=1, theta=(0, 1, 0, -0.5, -0.1, 1, 0.25, 0.5, -1.0))
    assert params.phi[0] < 0.0
    a = np.array(true_psi1_study2b(params))
    b = np.array(psi1_contrast_oracle(params))
    assert np.abs(a - b).max() < 1e-10


def test_apply_misspecification_scenarios():
    spec = study1_specs(4)[0]
    assert apply_misspecification(spec, 4) == spec
    s2 = apply_misspecification(spec, 2)
    assert s2.treatment_free == ("x",)
    assert s2.treatment == ("x", "sin_x", "x_sq")
    s3 = apply_misspecification(spec, 3)
    assert s3.treatment_free == ("x", "log_abs_x", "cos_pi_x", "x_cub")
    assert s3.treatment == ("x",)
    s1 = apply_misspecification(spec, 1)
    assert s1.treatment_free == ("x",) and s1.treatment == ("x",)
    # blip columns are never altered
    for s in (s1, s2, s3):
        assert s.blip == spec.blip
    with pytest.raises(ValueError):
        apply_misspecification(spec, 5)


def test_case_specs_shapes():
    c1 = study2a_specs(1)
    assert c1[0].treatment_free == ("x1",)
    assert c1[0].treatment == ("x1", "x1_sq")
    assert c1[1].treatment_free == ("x1", "a1", "a1_x1", "x2")
    c2 = study2a_specs(2)
    assert c2[0].treatment_free == ("x1", "log_abs_x1", "cos_pi_x1")
    assert c2[0].treatment == ("x1",)
    with pytest.raises(ValueError):
        study2a_specs(3)
    b = study2b_specs(Study2bParams(n=1), 1)
    assert "x1_cub" not in b[0].treatment_free
    assert "log_abs_x2" not in b[1].treatment_free
    assert b[1].blip == ("o2", "a1")


def test_seeded_determinism_all_studies():
    for make, params in ((generate_study1, Study1Params(n=300, seed=5)),
                         (generate_study2a, Study2aParams(n=300, seed=5)),
                         (generate_study2b, Study2bParams(n=300, seed=5))):
        d1, d2 = make(params), make(params)
        assert np.array_equal(d1.outcome, d2.outcome)
        for s1, s2 in zip(d1.stages, d2.stages):
            assert np.array_equal(s1.treatment, s2.treatment)
            for name in s1.covariates:
                assert np.array_equal(s1.covariates[name], s2.covariates[name])


def test_zero_draw_rejection():
    calls = {"n": 0}

    class FakeRng:
        def fake_draw(self, size):
            calls["n"] += 1
            if calls["n"] == 1:
                out = np.ones(size)
                out[0] = 0.0
                return out
            return np.full(size, 2.0)

    rng = FakeRng()
    out = _nonzero(lambda r: r.fake_draw(5), rng)
    assert np.all(out != 0.0)
    assert out[0] == 2.0 and out[1] == 1.0
    assert calls["n"] == 2


def test_study2b_injectable_nonlinearities():
    params = Study2bParams(n=200, seed=2, f1=("x1_half", lambda x: 0.5 * x),
                           f2=("x2_sq", lambda x: x ** 2))
    ds = generate_study2b(params)
    assert "x1_half" in ds.stages[0].covariates
    assert "x2_sq" in ds.stages[1].covariates
