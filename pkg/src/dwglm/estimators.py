"""Multi-stage backward-induction estimators.

Three methods share one engine, selected by ``weight_mode``:

* ``"none"``  - unweighted GLM at each stage (Q-learning comparator, M0);
* ``"dwols"`` - GLM with the overlap weights |a - pi_hat| (M1);
* ``"dwglm"`` - the doubly-robust two-step procedure (M2): first a GLM with
  overlap weights, then a second GLM whose weights multiply the overlap
  weight by the inverse-link slope at the first fit's opposite-arm linear
  predictor.

Stages run from last to first. The last stage regresses the observed
outcome; earlier stages regress Bernoulli pseudo-outcomes whose success
probability adds the accumulated later-stage regrets, on the link scale, to
the last-stage fitted probability. Each earlier stage draws R pseudo-outcome
replicates, fits each one, and averages the blip estimates; the last stage
has nothing random, so its replicate loop degenerates to a single fit.

Replicates whose fit fails to converge are dropped (with a counter in the
diagnostics) as long as at least 80% converge; otherwise the stage raises
:class:`AllReplicatesFailed`. Sampling design weights, when present in the
dataset, multiply the balancing weights in every fit, including the
propensity fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blip import draw_pseudo_outcomes, pseudo_outcome_probability, regret
from .data import LongitudinalDataset, StageData
from .errors import (AllReplicatesFailed, EstimationError, MissingColumn,
                     SolverError)
from .links import LOGIT, LinkFunction
from .solver import (DEFAULT_MAX_ITER, DEFAULT_RIDGE, DEFAULT_TOL,
                     DesignMatrix, solve_estimating_equations)
from .weights import WEIGHT_KINDS, dwglm_weights, fit_propensity, overlap_weights


@dataclass(frozen=True)
class StageModelSpec:
    """Covariate-name selections for one stage's three models.

    An intercept is implicit in every model. Blip columns must be a subset
    of the treatment-free columns (strong heredity). The ``nonlinear_*``
    sets mark which columns a misspecification scenario removes.
    """

    treatment_free: tuple
    blip: tuple
    treatment: tuple
    nonlinear_treatment_free: frozenset = frozenset()
    nonlinear_treatment: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "treatment_free", tuple(self.treatment_free))
        object.__setattr__(self, "blip", tuple(self.blip))
        object.__setattr__(self, "treatment", tuple(self.treatment))
        object.__setattr__(self, "nonlinear_treatment_free",
                           frozenset(self.nonlinear_treatment_free))
        object.__setattr__(self, "nonlinear_treatment",
                           frozenset(self.nonlinear_treatment))
        if not set(self.blip) <= set(self.treatment_free):
            extra = sorted(set(self.blip) - set(self.treatment_free))
            raise ValueError(
                f"blip columns {extra} are not in the treatment-free model "
                "(strong heredity)"
            )

    @property
    def blip_terms(self):
        """Coefficient labels for the blip block (intercept first)."""
        return ("intercept",) + self.blip


@dataclass(frozen=True)
class EstimatorConfig:
    """Method selection and knobs shared by every stage fit."""

    weight_mode: str = "dwglm"
    link: LinkFunction = LOGIT
    n_replicates: int = 25  # pseudo-outcome replicates R at stages j < K
    seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    ridge: float = DEFAULT_RIDGE
    min_replicate_success: float = 0.8

    def __post_init__(self):
        if self.weight_mode not in WEIGHT_KINDS:
            raise ValueError(f"weight_mode must be one of {WEIGHT_KINDS}")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class StageEstimate:
    """One stage's blip estimate with per-replicate history."""

    psi_hat: np.ndarray
    terms: tuple
    psi_replicates: np.ndarray   # (R_kept, p_psi)
    beta_replicates: np.ndarray  # (R_kept, p_beta)
    n_replicates: int
    n_failed: int
    iterations: tuple
    curvature: tuple             # uniqueness diagnostic per kept replicate
    failures: tuple              # (replicate index, message) pairs


@dataclass(frozen=True)
class DtrEstimate:
    """Backward-induction result: per-stage estimates plus the last-stage fit."""

    stages: tuple                # StageEstimate, index 0 = stage 1
    beta_last_stage: np.ndarray
    weight_mode: str
    link_name: str
    n_replicates: int
    seed: int

    def psi_hat(self, stage: int) -> np.ndarray:
        return self.stages[stage - 1].psi_hat

    def to_dict(self) -> dict:
        return {
            "weight_mode": self.weight_mode,
            "link": self.link_name,
            "R": self.n_replicates,
            "seed": self.seed,
            "beta_last_stage": [float(v) for v in self.beta_last_stage],
            "stages": [
                {
                    "stage": j + 1,
                    "terms": list(s.terms),
                    "psi_hat": [float(v) for v in s.psi_hat],
                    "n_replicates": s.n_replicates,
                    "n_failed": s.n_failed,
                }
                for j, s in enumerate(self.stages)
            ],
        }


def _columns(stage: StageData, names, stage_num) -> np.ndarray:
    missing = [c for c in names if c not in stage.covariates]
    if missing:
        raise MissingColumn(f"stage {stage_num}: columns {missing} absent from data")
    n = len(stage.treatment)
    cols = [np.ones(n)] + [stage.covariates[c] for c in names]
    return np.column_stack(cols)


def stage_design(stage: StageData, spec: StageModelSpec, stage_num=0) -> DesignMatrix:
    """Outcome-model design for one stage (intercepts prepended)."""
    return DesignMatrix(
        treatment_free=_columns(stage, spec.treatment_free, stage_num),
        blip=_columns(stage, spec.blip, stage_num),
        treatment=stage.treatment,
    )


def propensity_design(stage: StageData, spec: StageModelSpec, stage_num=0) -> np.ndarray:
    """Treatment-model design for one stage (intercept prepended)."""
    return _columns(stage, spec.treatment, stage_num)


def q_function_value(beta, psi, x_beta_row, x_psi_row, a, link: LinkFunction):
    """Fitted outcome probability at arm ``a``: g_inv(beta'x + a psi'x)."""
    eta = (np.asarray(x_beta_row, dtype=float) @ np.asarray(beta, dtype=float)
           + np.asarray(a, dtype=float)
           * (np.asarray(x_psi_row, dtype=float) @ np.asarray(psi, dtype=float)))
    return link.g_inv(eta)


def estimate_dtr(dataset: LongitudinalDataset, specs, config: EstimatorConfig) -> DtrEstimate:
    """Estimate the blip parameters of every stage by backward induction."""
    k = dataset.n_stages
    if len(specs) != k:
        raise ValueError(f"need one StageModelSpec per stage ({k}), got {len(specs)}")
    link = config.link
    base_w = dataset.design_weight
    solver_opts = dict(max_iter=config.max_iter, tol=config.tol, ridge=config.ridge)

    stage_estimates = [None] * k
    beta_last = None
    p_hat_last = None            # last-stage fitted outcome probabilities
    regret_sum = np.zeros(dataset.n_subjects)

    for j in range(k, 0, -1):
        stage = dataset.stages[j - 1]
        spec = specs[j - 1]
        design = stage_design(stage, spec, j)
        a = design.treatment

        # Step 1: the regression target. Observed outcome at the last stage;
        # otherwise R Bernoulli pseudo-outcome replicates.
        if j == k:
            targets = dataset.outcome[None, :]
        else:
            p_tilde = pseudo_outcome_probability(p_hat_last, regret_sum, link)
            targets = draw_pseudo_outcomes(p_tilde, config.n_replicates,
                                           config.seed, j)

        # Step 2: treatment model and overlap weights (skipped for M0).
        pi_hat = None
        if config.weight_mode != "none":
            try:
                prop = fit_propensity(propensity_design(stage, spec, j), a,
                                      base_weights=base_w)
            except SolverError as exc:
                raise EstimationError(f"propensity fit failed: {exc}", stage=j) from exc
            pi_hat = prop.fitted
            w_overlap = overlap_weights(a, pi_hat).values

        psi_reps, beta_reps, iters, curv, failures = [], [], [], [], []
        for r in range(targets.shape[0]):
            try:
                # Step 3: first weighted GLM.
                w1 = base_w if config.weight_mode == "none" else base_w * w_overlap
                fit = solve_estimating_equations(design, targets[r], w1, link,
                                                 **solver_opts)
                if config.weight_mode == "dwglm":
                    # Steps 4-5: adjustment factor from the first fit, then
                    # the second weighted GLM with the balancing weights.
                    w2 = base_w * dwglm_weights(a, pi_hat, design.treatment_free,
                                                design.blip, fit.beta_hat,
                                                fit.psi_hat, link).values
                    fit = solve_estimating_equations(design, targets[r], w2, link,
                                                     **solver_opts)
            except SolverError as exc:
                failures.append((r, f"{type(exc).__name__}: {exc}"))
                continue
            psi_reps.append(fit.psi_hat)
            beta_reps.append(fit.beta_hat)
            iters.append(fit.iterations)
            curv.append(fit.treatment_free_curvature)

        total = targets.shape[0]
        needed = math.ceil(config.min_replicate_success * total)
        if len(psi_reps) < max(needed, 1):
            raise AllReplicatesFailed(
                f"{len(failures)} of {total} replicate fits failed "
                f"(first failure: {failures[0][1] if failures else 'n/a'})",
                stage=j,
            )

        psi_matrix = np.vstack(psi_reps)
        psi_hat = psi_matrix.mean(axis=0)
        stage_estimates[j - 1] = StageEstimate(
            psi_hat=psi_hat,
            terms=spec.blip_terms,
            psi_replicates=psi_matrix,
            beta_replicates=np.vstack(beta_reps),
            n_replicates=total,
            n_failed=len(failures),
            iterations=tuple(iters),
            curvature=tuple(curv),
            failures=tuple(failures),
        )

        if j == k:
            beta_last = beta_reps[0]
            eta = design.treatment_free @ beta_last + a * (design.blip @ psi_hat)
            p_hat_last = link.g_inv(eta)

        # Accumulate this stage's regret for the next (earlier) stage's
        # pseudo-outcome.
        regret_sum = regret_sum + regret(psi_hat, design.blip, a)

    return DtrEstimate(
        stages=tuple(stage_estimates),
        beta_last_stage=beta_last,
        weight_mode=config.weight_mode,
        link_name=link.kind,
        n_replicates=config.n_replicates,
        seed=config.seed,
    )
