"""Doubly-robust dynamic treatment regime estimation for binary outcomes.

The estimator runs, per stage and from the last stage backwards, a two-step
weighted GLM: a first fit with overlap weights |a - pi_hat| identifies the
inverse-link slope ("adjustment factor"), and a second fit reweighted by
|a - pi_hat| * g_inv'(opposite-arm linear predictor) yields blip-parameter
estimates that stay approximately consistent when either the treatment
model or the treatment-free model is misspecified. Earlier stages regress
Bernoulli pseudo-outcomes whose success probabilities add later-stage
regrets to the final-stage fitted probability on the link scale.
"""

__version__ = "0.1.0"

from .blip import (blip, draw_pseudo_outcomes, optimal_action,
                   pseudo_outcome_probability, regret, replicate_generator)
from .data import (AnalysisConfig, LongitudinalDataset, StageData,
                   parse_dataset, write_long_csv)
from .errors import (AllReplicatesFailed, ConfigError, DataError, DwglmError,
                     EmptyGroup, EstimationError, MissingColumn,
                     NonBinaryValue, NonConvergence, ParseError, RaggedStages,
                     Separation, SingularJacobian, SolverError)
from .estimators import (DtrEstimate, EstimatorConfig, StageEstimate,
                         StageModelSpec, estimate_dtr, propensity_design,
                         q_function_value, stage_design)
from .links import (CLOGLOG, IDENTITY, LOGIT, PROBIT, LinkFunction, get_link)
from .simulation import (Study1Params, Study2aParams, Study2bParams,
                         apply_misspecification, generate_study1,
                         generate_study2a, generate_study2b,
                         psi1_contrast_oracle, study1_specs, study2a_specs,
                         study2b_specs, true_psi1_study2b, true_psi2_study2b)
from .solver import (DesignMatrix, WglmFit, check_beta_star_uniqueness,
                     estimating_equations, solve_estimating_equations)
from .weights import (PropensityFit, WeightVector, adjustment_factor,
                      dwglm_weights, fit_propensity, overlap_weights,
                      unit_weights)

__all__ = [
    "AllReplicatesFailed", "AnalysisConfig", "CLOGLOG", "ConfigError",
    "DataError", "DesignMatrix", "DtrEstimate", "DwglmError", "EmptyGroup",
    "EstimationError", "EstimatorConfig", "IDENTITY", "LOGIT",
    "LinkFunction", "LongitudinalDataset", "MissingColumn", "NonBinaryValue",
    "NonConvergence", "PROBIT", "ParseError", "PropensityFit",
    "RaggedStages", "Separation", "SingularJacobian", "SolverError",
    "StageData", "StageEstimate", "StageModelSpec", "Study1Params",
    "Study2aParams", "Study2bParams", "WeightVector", "WglmFit",
    "adjustment_factor", "apply_misspecification", "blip",
    "check_beta_star_uniqueness", "draw_pseudo_outcomes", "dwglm_weights",
    "estimate_dtr", "estimating_equations", "fit_propensity",
    "generate_study1", "generate_study2a", "generate_study2b", "get_link",
    "optimal_action", "overlap_weights", "parse_dataset",
    "propensity_design", "pseudo_outcome_probability",
    "psi1_contrast_oracle", "q_function_value", "regret",
    "replicate_generator", "stage_design", "solve_estimating_equations",
    "study1_specs", "study2a_specs", "study2b_specs", "true_psi1_study2b",
    "true_psi2_study2b", "unit_weights", "write_long_csv",
]
