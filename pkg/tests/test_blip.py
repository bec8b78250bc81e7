"""Blip/regret algebra and pseudo-outcome tests."""

import numpy as np
import pytest

from dwglm.blip import (blip, draw_pseudo_outcomes, optimal_action,
                        pseudo_outcome_probability, regret,
                        replicate_generator)
from dwglm.links import CLOGLOG, IDENTITY, LOGIT, PROBIT


def test_blip_examples():
    assert blip(np.array([-1.0, 2.0]), np.array([1.0, 1.0]), 1) == pytest.approx(1.0)
    assert blip(np.array([3.0, -4.0]), np.array([2.0, 0.5]), 0) == 0.0
    assert blip(np.array([-2.0, -1.0]), np.array([1.0, 3.0]), 1) == pytest.approx(-5.0)


def test_optimal_action_examples():
    assert optimal_action(np.array([-1.0, 2.0]), np.array([1.0, 1.0])) == 1
    # exact zero blip prescribes 0 (strict inequality)
    assert optimal_action(np.array([-1.0, 2.0]), np.array([1.0, 0.5])) == 0
    assert optimal_action(np.array([-2.0, -1.0]), np.array([1.0, 3.0])) == 0


def test_regret_examples():
    psi = np.array([-2.0, -1.0])
    h = np.array([1.0, 3.0])
    assert regret(psi, h, optimal_action(psi, h)) == 0.0
    assert regret(psi, h, 1) == pytest.approx(5.0)
    assert regret(np.array([-1.0, 2.0]), np.array([1.0, 1.0]), 0) == pytest.approx(1.0)


def test_regret_properties_random():
    rng = np.random.default_rng(42)
    psi = rng.normal(0, 1, 4)
    h = rng.normal(0, 2, (10_000, 4))
    a = rng.integers(0, 2, 10_000).astype(float)
    mu = regret(psi, h, a)
    assert np.all(mu >= 0.0)
    value = h @ psi
    opt = (value > 0).astype(float)
    # blip/regret identity: mu = blip(opt) - blip(a)
    assert np.abs(mu - (blip(psi, h, opt) - blip(psi, h, a))).max() < 1e-12
    # regret zero iff optimally treated (away from exact-zero blips)
    nz = value != 0.0
    assert np.array_equal(mu[nz] == 0.0, a[nz] == opt[nz])


def test_optimal_action_scale_invariance():
    rng = np.random.default_rng(6)
    psi = rng.normal(0, 1, 3)
    h = rng.normal(0, 1, (500, 3))
    base = optimal_action(psi, h)
    for c in (0.001, 3.7, 4000.0):
        assert np.array_equal(optimal_action(c * psi, h), base)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        blip(np.array([1.0, 2.0]), np.array([1.0]), 1)
    with pytest.raises(ValueError):
        regret(np.array([1.0]), np.array([1.0, 2.0]), 0)


def test_pseudo_outcome_probability_examples():
    assert pseudo_outcome_probability(0.4, 0.0, LOGIT) == pytest.approx(0.4, abs=1e-12)
    assert pseudo_outcome_probability(0.5, 1.0, LOGIT) == pytest.approx(0.7310586, abs=1e-7)
    # identity link: clamp when the sum exits the unit interval
    assert pseudo_outcome_probability(0.9, 0.3, IDENTITY) == pytest.approx(1.0 - 1e-10)


def test_pseudo_outcome_identity_at_zero_regret():
    rng = np.random.default_rng(12)
    p = rng.uniform(1e-9, 1 - 1e-9, 500)
    for link in (LOGIT, PROBIT, CLOGLOG, IDENTITY):
        out = pseudo_outcome_probability(p, np.zeros_like(p), link)
        clamped = np.clip(p, 1e-10, 1 - 1e-10)
        assert np.abs(out - clamped).max() < 1e-9, link.kind


def test_pseudo_outcome_monotone_in_regret():
    mus = np.linspace(0.0, 5.0, 40)
    for link in (LOGIT, PROBIT, CLOGLOG, IDENTITY):
        vals = pseudo_outcome_probability(np.full_like(mus, 0.3), mus, link)
        assert np.all(np.diff(vals) >= 0.0), link.kind


def test_pseudo_outcome_rejects_negative_regret():
    with pytest.raises(ValueError):
        pseudo_outcome_probability(0.5, -0.1, LOGIT)


def test_draw_pseudo_outcomes_degenerate():
    zeros = draw_pseudo_outcomes(np.zeros(100), 5, 1, 1)
    ones = draw_pseudo_outcomes(np.ones(100), 5, 1, 1)
    assert zeros.shape == (5, 100)
    assert not zeros.any()
    assert ones.all()


def test_draw_pseudo_outcomes_mean():
    draws = draw_pseudo_outcomes(np.full(10_000, 0.5), 1, 99, 2)
    # binomial 99% interval: 0.5 +- 2.58 * sqrt(0.25 / 10000)
    assert abs(draws.mean() - 0.5) < 0.02


def test_draw_pseudo_outcomes_reproducible_and_independent():
    p = np.full(1000, 0.4)
    a = draw_pseudo_outcomes(p, 3, 7, 2)
    b = draw_pseudo_outcomes(p, 3, 7, 2)
    assert np.array_equal(a, b)
    # distinct replicates and stages give distinct streams
    assert not np.array_equal(a[0], a[1])
    c = draw_pseudo_outcomes(p, 3, 7, 1)
    assert not np.array_equal(a[0], c[0])
    # the stream is keyed, not sequential: replicate 2 alone matches row 2
    gen = replicate_generator(7, 2, 2)
    assert np.array_equal(a[2], (gen.random(1000) < p).astype(a.dtype))


def test_draw_pseudo_outcomes_validation():
    with pytest.raises(ValueError):
        draw_pseudo_outcomes(np.array([0.5, 1.2]), 2, 0, 1)
    with pytest.raises(ValueError):
        draw_pseudo_outcomes(np.array([0.5]), 0, 0, 1)
