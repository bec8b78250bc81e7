"""Weighted estimating-equation solver for binary-outcome regressions.

The model is ``g(E[y | a, x]) = beta' x_tf + psi' a x_blip`` and the fitted
coefficients are the root of

    sum_i (x_tf_i ; a_i x_blip_i) w_i (y_i - g_inv(eta_i)) = 0,

with ``eta_i = beta' x_tf_i + a_i psi' x_blip_i``. This exact system is
solved by damped Newton iteration. For the logit link the system coincides
with the weighted maximum-likelihood score of logistic regression; for
probit/cloglog it deliberately differs from the textbook variance-weighted
GLM score, which solves a different equation.

The negated Jacobian ``sum_i x_i w_i g_inv'(eta_i) x_i'`` is symmetric
positive semi-definite whenever the weights are non-negative, so damped
Newton with step halving is globally well behaved. Convergence requires the
residual to fall under ``tol`` *and* the Newton step to be negligible; the
second condition stops the solver from declaring victory in the
exponentially flat region that a separated fit produces, so separated data
reliably march the coefficients into the divergence bound instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroup, NonConvergence, Separation, SingularJacobian
from .links import LinkFunction, PROB_CLAMP

# |coefficient| beyond this on the link scale means the fitted probabilities
# are numerically saturated: treat as perfect separation.
SEPARATION_BOUND = 30.0

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
DEFAULT_RIDGE = 1e-10
_RIDGE_CEILING = 1e-6
_MAX_HALVINGS = 30
_STEP_TOL = 1e-3


@dataclass(frozen=True)
class DesignMatrix:
    """Stage design: treatment-free columns, blip columns, treatment vector.

    Both column blocks carry their own leading intercept column. The blip
    columns must each appear among the treatment-free columns (strong
    heredity); the treatment vector is binary.
    """

    treatment_free: np.ndarray  # (n, p_beta)
    blip: np.ndarray            # (n, p_psi), possibly zero columns
    treatment: np.ndarray       # (n,) in {0, 1}

    def __post_init__(self):
        tf = np.asarray(self.treatment_free, dtype=float)
        bl = np.asarray(self.blip, dtype=float)
        a = np.asarray(self.treatment, dtype=float)
        if bl.ndim == 1:
            bl = bl.reshape(len(bl), 0) if bl.size == 0 else bl.reshape(-1, 1)
        if tf.ndim != 2 or bl.ndim != 2:
            raise ValueError("design blocks must be 2-D")
        if len(a) != tf.shape[0] or bl.shape[0] != tf.shape[0]:
            raise ValueError("design blocks must share the row count")
        if not np.isin(a, (0.0, 1.0)).all():
            raise ValueError("treatment vector must be binary")
        for block, name in ((tf, "treatment-free"), (bl, "blip")):
            if block.shape[1] and np.any(np.all(block == 0.0, axis=0)):
                raise ValueError(f"{name} block contains an all-zero column")
        for k in range(bl.shape[1]):
            if not any(np.array_equal(bl[:, k], tf[:, j]) for j in range(tf.shape[1])):
                raise ValueError(
                    f"blip column {k} is not among the treatment-free columns "
                    "(strong heredity violated)"
                )
        object.__setattr__(self, "treatment_free", tf)
        object.__setattr__(self, "blip", bl)
        object.__setattr__(self, "treatment", a)

    @property
    def n(self) -> int:
        return self.treatment_free.shape[0]

    @property
    def p_beta(self) -> int:
        return self.treatment_free.shape[1]

    @property
    def p_psi(self) -> int:
        return self.blip.shape[1]

    def stacked(self) -> np.ndarray:
        """Full regressor matrix (x_tf ; a * x_blip)."""
        return np.hstack([self.treatment_free, self.treatment[:, None] * self.blip])


@dataclass(frozen=True)
class WglmFit:
    """Solution of the weighted estimating equations plus diagnostics."""

    beta_hat: np.ndarray
    psi_hat: np.ndarray
    iterations: int
    residual_norm: float
    # Uniqueness diagnostic of the untreated-rows Hessian analogue at the
    # solution: "negative_definite" / "negative_semidefinite" / "indefinite".
    treatment_free_curvature: str = "negative_definite"

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.beta_hat, self.psi_hat])


def estimating_equations(design: DesignMatrix, y, weights, link: LinkFunction,
                         beta, psi) -> np.ndarray:
    """The stacked estimating-equation vector at (beta, psi)."""
    x = design.stacked()
    eta = x @ np.concatenate([np.asarray(beta, dtype=float), np.asarray(psi, dtype=float)])
    return x.T @ (np.asarray(weights, dtype=float)
                  * (np.asarray(y, dtype=float) - link.g_inv(eta)))


def check_beta_star_uniqueness(design: DesignMatrix, weights, link: LinkFunction,
                               beta) -> str:
    """Classify the curvature of the untreated-rows score analogue.

    Evaluates H = -sum_{i: a_i = 0} w_i x_i g_inv'(beta' x_i) x_i' over the
    treatment-free columns and reports "negative_definite",
    "negative_semidefinite", or "indefinite". A negative-definite H means
    the treatment-free root is unique. Degenerate inputs (no untreated rows,
    all-zero weights) classify as semidefinite.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    mask = design.treatment == 0.0
    xb = design.treatment_free[mask]
    if xb.shape[0] == 0:
        return "negative_semidefinite"
    slope = link.g_inv_prime(xb @ np.asarray(beta, dtype=float))
    h = -(xb * (w[mask] * slope)[:, None]).T @ xb
    eig = np.linalg.eigvalsh(h)
    tol = 1e-10 * max(1.0, float(np.abs(eig).max()))
    if eig.max() < -tol:
        return "negative_definite"
    if eig.max() <= tol:
        return "negative_semidefinite"
    return "indefinite"


def _initial_beta(design, y, w, link):
    # One weighted least-squares step on the working response formed at the
    # clamped weighted mean of y.
    ybar = float(np.clip(np.sum(w * y) / np.sum(w), PROB_CLAMP, 1.0 - PROB_CLAMP))
    eta0 = link.g(ybar)
    slope = max(link.g_inv_prime(eta0), 1e-12)
    z = eta0 + (y - ybar) / slope
    xb = design.treatment_free
    m = (xb * w[:, None]).T @ xb + 1e-10 * np.eye(design.p_beta)
    rhs = (xb * w[:, None]).T @ z
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError:
        return np.zeros(design.p_beta)


def solve_estimating_equations(design: DesignMatrix, y, weights, link: LinkFunction,
                               *, max_iter: int = DEFAULT_MAX_ITER,
                               tol: float = DEFAULT_TOL,
                               ridge: float = DEFAULT_RIDGE) -> WglmFit:
    """Solve the weighted estimating equations by damped Newton iteration.

    ``y`` may hold binary outcomes or probabilities in [0, 1] (pseudo-outcome
    means). Raises :class:`Separation` when a coefficient passes the
    divergence bound, :class:`SingularJacobian` when the Newton step stays
    unsolvable after ridge escalation, :class:`NonConvergence` otherwise on
    failure, and :class:`EmptyGroup` when a blip is requested but only one
    treatment arm is present.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, p_beta, p_psi = design.n, design.p_beta, design.p_psi

    if y.shape != (n,) or w.shape != (n,):
        raise ValueError("y and weights must be length-n vectors")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(w > 0):
        raise ValueError("weights must not be all zero")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("y must lie in [0, 1]")
    if n < p_beta + p_psi:
        raise ValueError(f"n = {n} rows cannot identify {p_beta + p_psi} coefficients")
    if p_psi > 0 and len(np.unique(design.treatment)) < 2:
        raise EmptyGroup("both treatment arms are required to fit a blip")

    x = design.stacked()
    theta = np.concatenate([_initial_beta(design, y, w, link), np.zeros(p_psi)])
    eye = np.eye(len(theta))

    def residual(t):
        return x.T @ (w * (y - link.g_inv(x @ t)))

    f = residual(theta)
    fnorm = float(np.abs(f).max())
    iterations = 0
    converged = False

    for _ in range(max_iter):
        slope = link.g_inv_prime(x @ theta)
        m = (x * (w * slope)[:, None]).T @ x

        # Newton step with ridge escalation; a stalled line search escalates
        # the ridge too (an ill-conditioned step behaves like a singular one).
        accepted = False
        checked_convergence = False
        r = ridge
        while r <= _RIDGE_CEILING:
            try:
                step = np.linalg.solve(m + r * eye, f)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                r *= 10.0
                continue

            if not checked_convergence:
                checked_convergence = True
                step_tol = _STEP_TOL * max(1.0, float(np.abs(theta).max()))
                if fnorm < tol and float(np.abs(step).max()) < step_tol:
                    converged = True
                    break

            scale = 1.0
            for _ in range(_MAX_HALVINGS + 1):
                trial = theta + scale * step
                ft = residual(trial)
                if np.all(np.isfinite(ft)) and float(np.abs(ft).max()) < fnorm:
                    theta, f = trial, ft
                    fnorm = float(np.abs(ft).max())
                    accepted = True
                    break
                scale *= 0.5
            if accepted:
                break
            r *= 10.0
        if converged:
            break
        if not checked_convergence:
            raise SingularJacobian(
                f"Newton step unsolvable at iteration {iterations + 1} "
                f"(ridge escalated past {_RIDGE_CEILING:g})"
            )
        if not accepted:
            raise NonConvergence(
                f"step halving stalled at iteration {iterations + 1} "
                f"(residual {fnorm:g})"
            )
        iterations += 1
        if float(np.abs(theta).max()) > SEPARATION_BOUND:
            raise Separation(
                f"coefficient magnitude exceeded {SEPARATION_BOUND:g} "
                "on the link scale (perfect separation)"
            )

    if not converged:
        raise NonConvergence(
            f"no convergence in {max_iter} iterations (residual {fnorm:g})"
        )

    beta_hat = theta[:p_beta]
    psi_hat = theta[p_beta:]
    diag = check_beta_star_uniqueness(design, w, link, beta_hat)
    return WglmFit(beta_hat=beta_hat, psi_hat=psi_hat, iterations=iterations,
                   residual_norm=fnorm, treatment_free_curvature=diag)
