"""Data-generating processes, misspecification scenarios, and truth oracles.

Three studies are implemented.

``study1`` (single stage): X ~ U(0, 2); treatment probability
expit(-2x + sin x + x^2); outcome on the link scale
x + log|x| + cos(pi x) + x^3 + a (psi0 + psi1 x), default psi = (-1, 2), so
the optimal rule is a = 1 iff x > 0.5. Either the logit or the probit link
can generate the outcome.

``study2a`` (two stages): X1 ~ N(2, 1), X2 ~ N(1 + 0.5 x1, 2); treatment
probabilities expit(-5 + x1 + x1^2) and expit(-2.5 x2 + x2^2 + sin x2);
blips a_j (psi0j + psi1j x_j) with psi_j = (-2, -1); the outcome's logit is
x1 + log|x1| + cos(pi x1) minus both stages' regrets.

``study2b`` (two stages, confounded, with binary tailoring variables
o1, o2): X1 ~ N(3, 1), X2 ~ N(-0.5 + 0.5 x1, 1); A_j ~
expit(alpha0j + alpha1j x_j); O1 ~ Bernoulli(0.5), O2 ~
Bernoulli(expit(delta1 o1 + delta2 a1)); the outcome's logit is
theta0 + theta1 x1 + theta2 o1 + theta3 a1 + theta4 o1 a1 + theta5 x2
+ theta6 a2 + theta7 o2 a2 + theta8 a1 a2 + f1(x1) + f2(x2) with nonlinear
f1(x) = x^3 and f2(x) = log|x| by default (both injectable). The stage-2
blip truth is (theta6, theta7, theta8) on terms (a2, o2 a2, a1 a2); the
stage-1 truth has a closed form because o2 depends on a1 - see
:func:`true_psi1_study2b` and its independent re-derivation
:func:`psi1_contrast_oracle`.

Model misspecification drops the flagged nonlinear columns from the
treatment and/or treatment-free models; blip columns are never altered.

Any draw that would evaluate log|x| at x = 0 is rejected and redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LongitudinalDataset, StageData
from .estimators import StageModelSpec
from .links import LOGIT, LinkFunction, PROB_CLAMP

STUDY_NAMES = ("study1", "study2a", "study2b")

# Stream tags keep dataset generation distinct from estimation streams.
_GEN_TAG = {"study1": 101, "study2a": 102, "study2b": 103}


def _generator(study: str, seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence((int(seed), _GEN_TAG[study]))))


def _expit(x):
    return LOGIT.g_inv(x)


def _nonzero(draw, rng):
    """Redraw any exact zeros (log|x| would be singular there)."""
    x = draw(rng)
    while np.any(x == 0.0):
        mask = x == 0.0
        x[mask] = draw(rng)[: mask.sum()]
    return x


def _bernoulli(rng, p):
    return (rng.random(len(p)) < p).astype(float)


def _clamped_prob(link, eta):
    return np.clip(link.g_inv(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)


# ---------------------------------------------------------------------------
# Study 1


@dataclass(frozen=True)
class Study1Params:
    n: int
    psi: tuple = (-1.0, 2.0)
    link: LinkFunction = LOGIT
    seed: int = 0


def generate_study1(params: Study1Params, rng=None) -> LongitudinalDataset:
    if rng is None:
        rng = _generator("study1", params.seed)
    n = params.n
    x = _nonzero(lambda r: r.uniform(0.0, 2.0, n), rng)
    a = _bernoulli(rng, _expit(-2.0 * x + np.sin(x) + x ** 2))
    eta = (x + np.log(np.abs(x)) + np.cos(np.pi * x) + x ** 3
           + a * (params.psi[0] + params.psi[1] * x))
    y = _bernoulli(rng, _clamped_prob(params.link, eta))
    covariates = {
        "x": x,
        "sin_x": np.sin(x),
        "x_sq": x ** 2,
        "log_abs_x": np.log(np.abs(x)),
        "cos_pi_x": np.cos(np.pi * x),
        "x_cub": x ** 3,
    }
    return LongitudinalDataset(stages=[StageData(covariates, a)], outcome=y)


def study1_specs(scenario: int):
    """Stage-model list for study1 under misspecification scenario 1-4."""
    correct = StageModelSpec(
        treatment_free=("x", "log_abs_x", "cos_pi_x", "x_cub"),
        blip=("x",),
        treatment=("x", "sin_x", "x_sq"),
        nonlinear_treatment_free=frozenset({"log_abs_x", "cos_pi_x", "x_cub"}),
        nonlinear_treatment=frozenset({"sin_x", "x_sq"}),
    )
    return [apply_misspecification(correct, scenario)]


# ---------------------------------------------------------------------------
# Study 2a


@dataclass(frozen=True)
class Study2aParams:
    n: int
    psi1: tuple = (-2.0, -1.0)
    psi2: tuple = (-2.0, -1.0)
    seed: int = 0


def generate_study2a(params: Study2aParams, rng=None) -> LongitudinalDataset:
    if rng is None:
        rng = _generator("study2a", params.seed)
    n = params.n
    x1 = _nonzero(lambda r: r.normal(2.0, 1.0, n), rng)
    a1 = _bernoulli(rng, _expit(-5.0 + x1 + x1 ** 2))
    x2 = rng.normal(1.0 + 0.5 * x1, np.sqrt(2.0), n)
    a2 = _bernoulli(rng, _expit(-2.5 * x2 + x2 ** 2 + np.sin(x2)))

    def stage_regret(psi, xj, aj):
        value = psi[0] + psi[1] * xj
        return ((value > 0).astype(float) - aj) * value

    mu1 = stage_regret(params.psi1, x1, a1)
    mu2 = stage_regret(params.psi2, x2, a2)
    eta_opt = x1 + np.log(np.abs(x1)) + np.cos(np.pi * x1)
    y = _bernoulli(rng, _clamped_prob(LOGIT, eta_opt - mu1 - mu2))

    stage1 = StageData(
        {
            "x1": x1,
            "log_abs_x1": np.log(np.abs(x1)),
            "cos_pi_x1": np.cos(np.pi * x1),
            "x1_sq": x1 ** 2,
        },
        a1,
    )
    stage2 = StageData(
        {
            "x1": x1,
            "log_abs_x1": np.log(np.abs(x1)),
            "cos_pi_x1": np.cos(np.pi * x1),
            "a1": a1,
            "a1_x1": a1 * x1,
            "x2": x2,
            "x2_sq": x2 ** 2,
            "sin_x2": np.sin(x2),
        },
        a2,
    )
    return LongitudinalDataset(stages=[stage1, stage2], outcome=y)


def study2a_specs(case: int):
    """Per-stage models for study2a misspecification cases 1 and 2.

    Case 1: both stages' treatment-free models keep linear terms only while
    both treatment models are correct. Case 2: the stage-2 treatment-free
    model is wrong with a correct treatment model, and the stage-1 treatment
    model is wrong with a correct treatment-free model.

    "Linear terms only" drops the nonlinear covariate transforms (log|x1|,
    cos(pi x1), x^2, sin). The past-treatment structure (a1, a1*x1) stays in
    the stage-2 history model under every scenario: it is part of the known
    stage-1 decision structure, not a covariate transform an analyst would
    omit.
    """
    stage1 = StageModelSpec(
        treatment_free=("x1", "log_abs_x1", "cos_pi_x1"),
        blip=("x1",),
        treatment=("x1", "x1_sq"),
        nonlinear_treatment_free=frozenset({"log_abs_x1", "cos_pi_x1"}),
        nonlinear_treatment=frozenset({"x1_sq"}),
    )
    stage2 = StageModelSpec(
        treatment_free=("x1", "log_abs_x1", "cos_pi_x1", "a1", "a1_x1", "x2"),
        blip=("x2",),
        treatment=("x2", "x2_sq", "sin_x2"),
        nonlinear_treatment_free=frozenset({"log_abs_x1", "cos_pi_x1"}),
        nonlinear_treatment=frozenset({"x2_sq", "sin_x2"}),
    )
    if case == 1:
        return [apply_misspecification(stage1, 2), apply_misspecification(stage2, 2)]
    if case == 2:
        return [apply_misspecification(stage1, 3), apply_misspecification(stage2, 2)]
    raise ValueError("study2a defines cases 1 and 2")


# ---------------------------------------------------------------------------
# Study 2b


def _cube(x):
    return x ** 3


def _log_abs(x):
    return np.log(np.abs(x))


@dataclass(frozen=True)
class Study2bParams:
    n: int
    theta: tuple = (0.0, 1.0, 0.0, -0.5, -0.1, 1.0, 0.25, 0.5, 0.35)
    delta: tuple = (0.5, 0.6)
    alpha1: tuple = (-2.5, 1.25)
    alpha2: tuple = (-0.5, 1.25)
    seed: int = 0
    # Injectable nonlinear transforms (name, callable); the names become
    # dataset columns.
    f1: tuple = ("x1_cub", _cube)
    f2: tuple = ("log_abs_x2", _log_abs)

    @property
    def phi(self):
        """Arm-wise blip sums (phi1..phi4) of the stage-2 coefficients."""
        t6, t7, t8 = self.theta[6], self.theta[7], self.theta[8]
        return (t6 + t7 + t8, t6 + t7, t6 + t8, t6)

    @property
    def k(self):
        """Stage-2 tailoring-variable probabilities by (o1, a1) cell."""
        d1, d2 = self.delta
        e = lambda v: float(_expit(np.asarray(v, dtype=float)))
        return (e(d1 + d2), e(d1), e(d2), 0.5)


def generate_study2b(params: Study2bParams, rng=None) -> LongitudinalDataset:
    if rng is None:
        rng = _generator("study2b", params.seed)
    n = params.n
    t = params.theta
    f1_name, f1 = params.f1
    f2_name, f2 = params.f2

    x1 = _nonzero(lambda r: r.normal(3.0, 1.0, n), rng)
    o1 = _bernoulli(rng, np.full(n, 0.5))
    a1 = _bernoulli(rng, _expit(params.alpha1[0] + params.alpha1[1] * x1))
    # x2's mean depends on x1 elementwise, so redraw zeros individually.
    x2 = rng.normal(-0.5 + 0.5 * x1, 1.0, n)
    while np.any(x2 == 0.0):
        mask = x2 == 0.0
        x2[mask] = rng.normal(-0.5 + 0.5 * x1[mask], 1.0, mask.sum())
    o2 = _bernoulli(rng, _expit(params.delta[0] * o1 + params.delta[1] * a1))
    a2 = _bernoulli(rng, _expit(params.alpha2[0] + params.alpha2[1] * x2))

    m = (t[0] + t[1] * x1 + t[2] * o1 + t[3] * a1 + t[4] * o1 * a1 + t[5] * x2
         + t[6] * a2 + t[7] * o2 * a2 + t[8] * a1 * a2 + f1(x1) + f2(x2))
    y = _bernoulli(rng, _clamped_prob(LOGIT, m))

    stage1 = StageData({"x1": x1, "o1": o1, f1_name: f1(x1)}, a1)
    stage2 = StageData(
        {
            "x1": x1,
            "o1": o1,
            "a1": a1,
            "o1_a1": o1 * a1,
            "x2": x2,
            "o2": o2,
            f1_name: f1(x1),
            f2_name: f2(x2),
        },
        a2,
    )
    return LongitudinalDataset(stages=[stage1, stage2], outcome=y)


def study2b_specs(params: Study2bParams = None, scenario: int = 1):
    """Per-stage models for study2b.

    The reported case keeps the treatment models exact and misspecifies the
    treatment-free models by omitting the nonlinear transforms (scenario 2
    at both stages). Scenario 4 returns the fully correct models.
    """
    if params is None:
        params = Study2bParams(n=1)
    f1_name = params.f1[0]
    f2_name = params.f2[0]
    stage1 = StageModelSpec(
        treatment_free=("x1", "o1", f1_name),
        blip=("o1",),
        treatment=("x1",),
        nonlinear_treatment_free=frozenset({f1_name}),
    )
    stage2 = StageModelSpec(
        treatment_free=("x1", "o1", "a1", "o1_a1", "x2", "o2", f1_name, f2_name),
        blip=("o2", "a1"),
        treatment=("x2",),
        nonlinear_treatment_free=frozenset({f1_name, f2_name}),
    )
    if scenario not in (1, 4):
        raise ValueError("study2b defines scenario 1 (reported case) and 4 (all correct)")
    misspec = 2 if scenario == 1 else 4
    return [apply_misspecification(stage1, misspec),
            apply_misspecification(stage2, misspec)]


def _pos(x: float) -> float:
    """|x|+ = x if x > 0 else 0."""
    return x if x > 0.0 else 0.0


def true_psi1_study2b(params: Study2bParams):
    """Closed-form stage-1 blip truth (coefficients of a1 and o1*a1)."""
    t = params.theta
    p1, p2, p3, p4 = (_pos(v) for v in params.phi)
    k1, k2, k3, k4 = params.k
    psi10 = t[3] + p3 - p4 + k3 * (p1 - p3) - k4 * (p2 - p4)
    psi11 = t[4] + (k1 - k3) * (p1 - p3) - (k2 - k4) * (p2 - p4)
    return psi10, psi11


def psi1_contrast_oracle(params: Study2bParams):
    """Independent re-derivation of the stage-1 truth by a 2x2 cell contrast.

    For each (o1, a1) cell, averages the optimal stage-2 blip contribution
    over o2's two values with P(o2 | o1, a1), adds the cell's own linear
    terms, and recovers the a1 and o1*a1 coefficients by exact differencing.
    No sampling is involved, so agreement with the closed form is to
    floating-point rounding.
    """
    t = params.theta
    p1, p2, p3, p4 = (_pos(v) for v in params.phi)
    d1, d2 = params.delta

    def cell(o1, a1):
        p_o2 = float(_expit(np.asarray(d1 * o1 + d2 * a1, dtype=float)))
        best_future = (p_o2 * (a1 * p1 + (1 - a1) * p2)
                       + (1.0 - p_o2) * (a1 * p3 + (1 - a1) * p4))
        return t[2] * o1 + t[3] * a1 + t[4] * o1 * a1 + best_future

    psi10 = cell(0, 1) - cell(0, 0)
    psi11 = (cell(1, 1) - cell(1, 0)) - (cell(0, 1) - cell(0, 0))
    return psi10, psi11


def true_psi2_study2b(params: Study2bParams):
    """Stage-2 blip truth: coefficients of (a2, o2 a2, a1 a2)."""
    return params.theta[6], params.theta[7], params.theta[8]


# ---------------------------------------------------------------------------
# Misspecification machinery


def apply_misspecification(spec: StageModelSpec, scenario: int) -> StageModelSpec:
    """Return a copy of ``spec`` with the scenario's nonlinear columns dropped.

    1 drops them from both the treatment and treatment-free models, 2 from
    the treatment-free model only, 3 from the treatment model only, 4 keeps
    everything. Blip columns are never altered.
    """
    if scenario not in (1, 2, 3, 4):
        raise ValueError("scenario must be 1, 2, 3, or 4")
    tf = spec.treatment_free
    trt = spec.treatment
    if scenario in (1, 2):
        tf = tuple(c for c in tf if c not in spec.nonlinear_treatment_free)
    if scenario in (1, 3):
        trt = tuple(c for c in trt if c not in spec.nonlinear_treatment)
    return StageModelSpec(
        treatment_free=tf,
        blip=spec.blip,
        treatment=trt,
        nonlinear_treatment_free=spec.nonlinear_treatment_free & set(tf),
        nonlinear_treatment=spec.nonlinear_treatment & set(trt),
    )
