"""Propensity scores and balancing weights.

Two weight families are provided. The continuous-outcome "overlap" weights
``|a - pi(x)|`` satisfy ``(1 - pi) w(0) = pi w(1)``. For binary outcomes the
flatness of the inverse link must be compensated by the adjustment factor
``g_inv'(beta' x_tf + a psi' x_blip)``; multiplying the overlap weight by the
adjustment factor evaluated at the *opposite* arm,

    w(a, x) = |a - pi(x)| * kappa(1 - a, x),

restores the balance on the binary scale:
``(1 - pi) w(0) kappa(0) = pi w(1) kappa(1)`` holds identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroup
from .links import LOGIT, LinkFunction
from .solver import DesignMatrix, solve_estimating_equations

PROPENSITY_CLAMP = 1e-6

WEIGHT_KINDS = ("none", "dwols", "dwglm")


@dataclass(frozen=True)
class PropensityFit:
    """Logistic treatment model: coefficients and clamped fitted values."""

    alpha_hat: np.ndarray
    fitted: np.ndarray  # strictly inside (0, 1)


@dataclass(frozen=True)
class WeightVector:
    """Non-negative per-row weights tagged with the scheme that built them."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if np.any(values < 0):
            raise ValueError("weights must be non-negative")
        if self.kind == "none" and not np.all(values == 1.0):
            raise ValueError("kind 'none' requires unit weights")
        object.__setattr__(self, "values", values)


def unit_weights(n: int) -> WeightVector:
    return WeightVector(values=np.ones(n), kind="none")


def fit_propensity(x_alpha, a, base_weights=None) -> PropensityFit:
    """Weighted maximum-likelihood logistic regression of a on x_alpha.

    ``x_alpha`` must include its intercept column. ``base_weights`` (e.g.
    sampling design weights) multiply each observation's score contribution.
    Fitted values are clamped to [1e-6, 1 - 1e-6] to keep positivity numeric.
    """
    x_alpha = np.asarray(x_alpha, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(np.unique(a)) < 2:
        raise EmptyGroup("treatment is constant; cannot fit a propensity model")
    w = np.ones(len(a)) if base_weights is None else np.asarray(base_weights, dtype=float)
    design = DesignMatrix(treatment_free=x_alpha,
                          blip=np.zeros((len(a), 0)),
                          treatment=np.zeros(len(a)))
    fit = solve_estimating_equations(design, y=a, weights=w, link=LOGIT)
    fitted = np.clip(LOGIT.g_inv(x_alpha @ fit.beta_hat),
                     PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP)
    return PropensityFit(alpha_hat=fit.beta_hat, fitted=fitted)


def overlap_weights(a, pi_hat) -> WeightVector:
    """Continuous-outcome balancing weights |a - pi_hat|."""
    a = np.asarray(a, dtype=float)
    pi_hat = np.asarray(pi_hat, dtype=float)
    if np.any(pi_hat <= 0) or np.any(pi_hat >= 1):
        raise ValueError("pi_hat must lie strictly inside (0, 1)")
    return WeightVector(values=np.abs(a - pi_hat), kind="dwols")


def adjustment_factor(a, x_beta, x_psi, beta, psi, link: LinkFunction):
    """Inverse-link slope at the linear predictor for arm ``a``.

    Accepts a single row or stacked rows; ``a`` may be a scalar or a vector.
    """
    x_beta = np.asarray(x_beta, dtype=float)
    x_psi = np.asarray(x_psi, dtype=float)
    eta = x_beta @ np.asarray(beta, dtype=float)
    blip_part = x_psi @ np.asarray(psi, dtype=float) if x_psi.size else 0.0
    return link.g_inv_prime(eta + np.asarray(a, dtype=float) * blip_part)


def dwglm_weights(a, pi_hat, x_beta, x_psi, beta, psi, link: LinkFunction) -> WeightVector:
    """Balancing weights for binary outcomes.

    Per-row product of the overlap weight and the adjustment factor at the
    opposite treatment arm. Under the identity link this reduces exactly to
    the overlap weights.
    """
    a = np.asarray(a, dtype=float)
    base = overlap_weights(a, pi_hat).values
    kappa_flip = adjustment_factor(1.0 - a, x_beta, x_psi, beta, psi, link)
    return WeightVector(values=base * kappa_flip, kind="dwglm")
