"""Blip/regret algebra, optimal-rule evaluation, and pseudo-outcomes.

Blips are linear on the link scale: ``gamma(h, a; psi) = a * psi' h``, zero
at the reference arm a = 0. The rule treats exactly when the blip at a = 1
is strictly positive; a blip of exactly zero prescribes a = 0, so downstream
comparisons are deterministic.

Pseudo-outcome draws are reproducible by construction: replicate ``r`` of
stage ``j`` uses a Philox counter-based generator keyed by the seed tuple
``(base_seed, stage, r)`` through ``numpy.random.SeedSequence``, so
replicates are mutually independent streams and any (seed, stage, replicate)
triple regenerates its draws bit-for-bit on every platform.
"""

from __future__ import annotations

import numpy as np

from .links import LinkFunction, PROB_CLAMP


def _check_dims(psi, h_psi):
    psi = np.asarray(psi, dtype=float)
    h_psi = np.asarray(h_psi, dtype=float)
    if psi.ndim != 1 or h_psi.shape[-1] != psi.shape[0]:
        raise ValueError(
            f"blip dimensions do not match: psi has {psi.shape[0]} entries, "
            f"h_psi rows have {h_psi.shape[-1]}"
        )
    return psi, h_psi


def blip(psi, h_psi, a):
    """Link-scale treatment contrast ``a * psi' h_psi``; zero at a = 0."""
    psi, h_psi = _check_dims(psi, h_psi)
    return np.asarray(a, dtype=float) * (h_psi @ psi)


def optimal_action(psi, h_psi):
    """1 when the blip at a = 1 is strictly positive, else 0."""
    psi, h_psi = _check_dims(psi, h_psi)
    value = h_psi @ psi
    if np.ndim(value) == 0:
        return int(value > 0.0)
    return (value > 0.0).astype(np.int64)


def regret(psi, h_psi, a):
    """Forgone blip (a_opt - a) * psi' h_psi; non-negative by construction."""
    psi, h_psi = _check_dims(psi, h_psi)
    value = h_psi @ psi
    opt = (np.asarray(value) > 0.0).astype(float)
    out = (opt - np.asarray(a, dtype=float)) * value
    if np.ndim(out) == 0:
        return float(out)
    return out


def pseudo_outcome_probability(p_hat_last, regrets_sum, link: LinkFunction):
    """Success probability of the stage-j pseudo-outcome.

    Clamps the last-stage fitted probability to [1e-10, 1 - 1e-10], adds the
    accumulated later-stage regrets on the link scale, maps back through the
    inverse link, and clamps again. Monotone non-decreasing in the regrets.
    """
    p = np.clip(np.asarray(p_hat_last, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)
    mu = np.asarray(regrets_sum, dtype=float)
    if np.any(mu < 0):
        raise ValueError("regrets_sum must be non-negative")
    out = np.clip(link.g_inv(link.g(p) + mu), PROB_CLAMP, 1.0 - PROB_CLAMP)
    if np.ndim(p_hat_last) == 0 and np.ndim(regrets_sum) == 0:
        return float(out)
    return out


def replicate_generator(base_seed: int, stage: int, replicate: int) -> np.random.Generator:
    """Philox stream for one (seed, stage, replicate) triple."""
    seq = np.random.SeedSequence((int(base_seed), int(stage), int(replicate)))
    return np.random.Generator(np.random.Philox(seq))


def draw_pseudo_outcomes(probabilities, n_replicates: int, base_seed: int,
                         stage: int) -> np.ndarray:
    """R independent Bernoulli vectors, one row per replicate.

    Row ``r`` comes from the stream keyed by (base_seed, stage, r).
    """
    probabilities = np.asarray(probabilities, dtype=float)
    if np.any(probabilities < 0) or np.any(probabilities > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if n_replicates < 1:
        raise ValueError("n_replicates must be at least 1")
    draws = np.empty((n_replicates, len(probabilities)), dtype=np.int64)
    for r in range(n_replicates):
        rng = replicate_generator(base_seed, stage, r)
        draws[r] = rng.random(len(probabilities)) < probabilities
    return draws
