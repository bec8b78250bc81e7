"""Study harness, CSV/JSON result emission, and the self-check battery.

``run_simulation_command`` executes one (study, scenario, method) cell:
for each Monte Carlo replication it generates a fresh dataset from a
replication-specific stream, estimates the regime, and records every blip
coefficient. It writes three files into the output directory:

* ``estimates.csv``  - one row per (replication, stage, term);
* ``summary.csv``    - per (stage, term): truth, mean, bias, Monte Carlo SD;
* ``manifest.json``  - every knob that affects the output, so a run can be
  reproduced exactly from the manifest alone (``run_from_manifest``).

``run_estimate_command`` is the observational-data pipeline: CSV dataset +
JSON configuration in; per-stage coefficient table, treatment-rule strings,
per-replicate coefficients, and a manifest out.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .blip import optimal_action, regret
from .data import (AnalysisConfig, METHOD_TO_WEIGHT_MODE, parse_dataset)
from .errors import DwglmError, EstimationError
from .estimators import (DtrEstimate, EstimatorConfig, StageModelSpec,
                         estimate_dtr)
from .links import get_link
from .simulation import (Study1Params, Study2aParams, Study2bParams,
                         generate_study1, generate_study2a, generate_study2b,
                         psi1_contrast_oracle, study1_specs, study2a_specs,
                         study2b_specs, true_psi1_study2b, true_psi2_study2b,
                         STUDY_NAMES)

_VALID_SCENARIOS = {"study1": (1, 2, 3, 4), "study2a": (1, 2), "study2b": (1,)}


def _study_pieces(study, scenario, n):
    """(params, generator, specs, truth) for one study/scenario cell.

    ``truth`` lists (stage, term, value) triples for every blip coefficient.
    """
    if study == "study1":
        params = Study1Params(n=n)
        specs = study1_specs(scenario)
        truth = [(1, "intercept", params.psi[0]), (1, "x", params.psi[1])]
        return params, generate_study1, specs, truth
    if study == "study2a":
        params = Study2aParams(n=n)
        specs = study2a_specs(scenario)
        truth = [(1, "intercept", params.psi1[0]), (1, "x1", params.psi1[1]),
                 (2, "intercept", params.psi2[0]), (2, "x2", params.psi2[1])]
        return params, generate_study2a, specs, truth
    if study == "study2b":
        params = Study2bParams(n=n)
        specs = study2b_specs(params, scenario)
        psi10, psi11 = true_psi1_study2b(params)
        psi2 = true_psi2_study2b(params)
        truth = [(1, "intercept", psi10), (1, "o1", psi11),
                 (2, "intercept", psi2[0]), (2, "o2", psi2[1]), (2, "a1", psi2[2])]
        return params, generate_study2b, specs, truth
    raise ValueError(f"unknown study {study!r}; expected one of {STUDY_NAMES}")


def _replication_rng(seed, rep):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, rep, 0))))


def _replication_estimator_seed(seed, rep):
    return int(np.random.SeedSequence((seed, rep, 1)).generate_state(1)[0])


def run_simulation_command(study, scenario, method, n, replications, seed,
                           out_path, link="logit", n_pseudo_replicates=25,
                           max_failure_fraction=0.2):
    """Run one simulation cell and write estimates/summary/manifest files.

    Returns the summary as a list of dict rows. Raises if more than
    ``max_failure_fraction`` of the replications fail to estimate.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if scenario not in _VALID_SCENARIOS.get(study, ()):
        raise ValueError(
            f"{study} accepts scenarios {_VALID_SCENARIOS.get(study)}, got {scenario}"
        )
    if method not in METHOD_TO_WEIGHT_MODE:
        raise ValueError(f"method must be one of {tuple(METHOD_TO_WEIGHT_MODE)}")

    out_dir = Path(out_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, generate, specs, truth = _study_pieces(study, scenario, n)
    link_fn = get_link(link)

    estimate_rows = []
    failures = []
    started = time.time()
    for rep in range(replications):
        dataset = generate(params, rng=_replication_rng(seed, rep))
        config = EstimatorConfig(
            weight_mode=METHOD_TO_WEIGHT_MODE[method],
            link=link_fn,
            n_replicates=n_pseudo_replicates,
            seed=_replication_estimator_seed(seed, rep),
        )
        try:
            result = estimate_dtr(dataset, specs, config)
        except DwglmError as exc:
            failures.append({"replication": rep, "error": str(exc)})
            continue
        for stage_num, stage_est in enumerate(result.stages, start=1):
            for term, value in zip(stage_est.terms, stage_est.psi_hat):
                estimate_rows.append({
                    "replication": rep,
                    "stage": stage_num,
                    "term": term,
                    "estimate": float(value),
                })

    if len(failures) > max_failure_fraction * replications:
        raise EstimationError(
            f"{len(failures)} of {replications} replications failed "
            f"(limit {max_failure_fraction:.0%}); first: {failures[0]['error']}"
        )

    summary = summarize_estimates(estimate_rows, truth)
    manifest = {
        "command": "simulate",
        "study": study,
        "scenario": scenario,
        "method": method,
        "link": link,
        "n": n,
        "replications": replications,
        "R": n_pseudo_replicates,
        "seed": seed,
        "max_failure_fraction": max_failure_fraction,
        "version": __version__,
        "truth": [{"stage": s, "term": t, "value": v} for s, t, v in truth],
        "n_failed": len(failures),
        "failures": failures,
        "elapsed_seconds": round(time.time() - started, 3),
    }

    _write_csv(out_dir / "estimates.csv",
               ["replication", "stage", "term", "estimate"], estimate_rows)
    _write_csv(out_dir / "summary.csv",
               ["stage", "term", "truth", "mean", "bias", "mc_sd", "n_ok"],
               summary)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return summary


def summarize_estimates(estimate_rows, truth):
    """Per-(stage, term) mean, bias against truth, and Monte Carlo SD."""
    truth_map = {(s, t): v for s, t, v in truth}
    grouped = {}
    for row in estimate_rows:
        grouped.setdefault((row["stage"], row["term"]), []).append(row["estimate"])
    summary = []
    for (stage, term), values in sorted(grouped.items()):
        arr = np.asarray(values)
        true_value = truth_map.get((stage, term))
        mean = float(arr.mean())
        summary.append({
            "stage": stage,
            "term": term,
            "truth": float(true_value) if true_value is not None else "",
            "mean": mean,
            "bias": mean - float(true_value) if true_value is not None else "",
            "mc_sd": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
            "n_ok": len(arr),
        })
    return summary


def run_from_manifest(manifest_path, out_path):
    """Re-execute a simulation run from its manifest."""
    with open(manifest_path, encoding="utf-8") as fh:
        m = json.load(fh)
    if m.get("command") != "simulate":
        raise ValueError("manifest does not describe a simulate run")
    return run_simulation_command(
        study=m["study"], scenario=m["scenario"], method=m["method"], n=m["n"],
        replications=m["replications"], seed=m["seed"], out_path=out_path,
        link=m["link"], n_pseudo_replicates=m["R"],
        max_failure_fraction=m["max_failure_fraction"])


def _specs_from_config(config: AnalysisConfig):
    return [
        StageModelSpec(
            treatment_free=tuple(model["treatment_free"]),
            blip=tuple(model["blip"]),
            treatment=tuple(model["treatment"]),
        )
        for model in config.stage_models
    ]


def rule_description(stage_num, terms, psi_hat):
    """Human-readable optimal rule 'prescribe a_j = 1 if psi_hat' h > 0'."""
    pieces = []
    for term, value in zip(terms, psi_hat):
        pieces.append(f"({value:+.6g})" if term == "intercept"
                      else f"({value:+.6g})*{term}")
    return (f"stage {stage_num}: prescribe a_{stage_num} = 1 if "
            f"{' + '.join(pieces)} > 0; otherwise a_{stage_num} = 0")


def run_estimate_command(csv_path, config_path, out_path, method=None,
                         link=None, pseudo_replicates=None, seed=None) -> DtrEstimate:
    """Estimate a DTR from a CSV dataset and JSON config; write result files."""
    config = AnalysisConfig.from_json(config_path)
    overrides = {}
    if method is not None:
        overrides["method"] = method.lower()
    if link is not None:
        overrides["link"] = link
    if pseudo_replicates is not None:
        overrides["pseudo_replicates"] = pseudo_replicates
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)

    dataset = parse_dataset(csv_path, config)
    est_config = EstimatorConfig(
        weight_mode=METHOD_TO_WEIGHT_MODE[config.method],
        link=get_link(config.link),
        n_replicates=config.pseudo_replicates,
        seed=config.seed,
        **{k: v for k, v in config.solver.items()},
    )
    result = estimate_dtr(dataset, _specs_from_config(config), est_config)

    out_dir = Path(out_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    table_rows = []
    replicate_rows = []
    rules = []
    for stage_num, stage_est in enumerate(result.stages, start=1):
        for term, value in zip(stage_est.terms, stage_est.psi_hat):
            table_rows.append({
                "stage": stage_num, "term": term,
                "estimate": float(value), "method": config.method,
            })
        for r in range(stage_est.psi_replicates.shape[0]):
            for term, value in zip(stage_est.terms, stage_est.psi_replicates[r]):
                replicate_rows.append({
                    "stage": stage_num, "replicate": r, "term": term,
                    "estimate": float(value),
                })
        rules.append(rule_description(stage_num, stage_est.terms, stage_est.psi_hat))

    _write_csv(out_dir / "psi_table.csv",
               ["stage", "term", "estimate", "method"], table_rows)
    _write_csv(out_dir / "replicates.csv",
               ["stage", "replicate", "term", "estimate"], replicate_rows)
    (out_dir / "rules.txt").write_text("\n".join(rules) + "\n", encoding="utf-8")
    manifest = {
        "command": "estimate",
        "data": str(csv_path),
        "config": str(config_path),
        "method": config.method,
        "link": config.link,
        "R": config.pseudo_replicates,
        "seed": config.seed,
        "stages": config.stages,
        "version": __version__,
        "result": result.to_dict(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return result


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Self-check battery (the `check` subcommand)


def run_self_checks():
    """Fast invariant battery. Returns a list of (name, ok, detail)."""
    from .links import CLOGLOG, IDENTITY, LOGIT, PROBIT
    from .solver import DesignMatrix, solve_estimating_equations
    from .weights import dwglm_weights as new_weights
    from .weights import overlap_weights

    checks = []
    rng = np.random.default_rng(20260810)

    # Balancing identity of the binary-outcome weights, 10^4 random tuples.
    n = 10_000
    pi = rng.uniform(0.01, 0.99, n)
    xb = np.column_stack([np.ones(n), rng.normal(0, 2, n)])
    xp = xb.copy()
    worst = 0.0
    for link in (LOGIT, PROBIT, CLOGLOG, IDENTITY):
        beta = rng.normal(0, 1, 2)
        psi = rng.normal(0, 1, 2)
        w0 = new_weights(np.zeros(n), pi, xb, xp, beta, psi, link).values
        w1 = new_weights(np.ones(n), pi, xb, xp, beta, psi, link).values
        k0 = link.g_inv_prime(xb @ beta)
        k1 = link.g_inv_prime(xb @ beta + xp @ psi)
        worst = max(worst, float(np.abs((1 - pi) * w0 * k0 - pi * w1 * k1).max()))
    checks.append(("balancing-criterion identity", worst < 1e-12, f"max |lhs-rhs| = {worst:.2e}"))

    # Overlap weights satisfy the continuous-outcome criterion exactly.
    w0 = overlap_weights(np.zeros(n), pi).values
    w1 = overlap_weights(np.ones(n), pi).values
    gap = float(np.abs((1 - pi) * w0 - pi * w1).max())
    checks.append(("overlap-weight criterion", gap < 1e-15, f"max gap = {gap:.2e}"))

    # Link round trips on the float64-invertible ranges.
    ranges = {LOGIT: (-10, 10), PROBIT: (-10, 5.5), CLOGLOG: (-10, 2.9)}
    worst = 0.0
    for link, (lo, hi) in ranges.items():
        eta = rng.uniform(lo, hi, 1000)
        worst = max(worst, float(np.abs(link.g(link.g_inv(eta)) - eta).max()))
    p = rng.uniform(1e-6, 1 - 1e-6, 1000)
    worst = max(worst, float(np.abs(IDENTITY.g(IDENTITY.g_inv(p)) - p).max()))
    checks.append(("link round trips", worst < 1e-8, f"max |g(g_inv(eta))-eta| = {worst:.2e}"))

    # Finite-difference check of the inverse-link derivative.
    h = 1e-6
    fd_ranges = {LOGIT: (-6, 6), PROBIT: (-6, 4.2), CLOGLOG: (-6, 2.4)}
    worst = 0.0
    for link, (lo, hi) in fd_ranges.items():
        eta = rng.uniform(lo, hi, 200)
        fd = (link.g_inv(eta + h) - link.g_inv(eta - h)) / (2 * h)
        worst = max(worst, float((np.abs(fd - link.g_inv_prime(eta))
                                  / link.g_inv_prime(eta)).max()))
    checks.append(("inverse-link derivative", worst < 1e-5, f"max rel err = {worst:.2e}"))

    # Solver closed forms.
    n_fit = 400
    y = np.zeros(n_fit)
    y[:100] = 1.0  # mean 0.25
    design = DesignMatrix(np.ones((n_fit, 1)), np.zeros((n_fit, 0)), np.zeros(n_fit))
    fit = solve_estimating_equations(design, y, np.ones(n_fit), LOGIT)
    err = abs(fit.beta_hat[0] - np.log(1.0 / 3.0))
    checks.append(("solver intercept-only closed form", err < 1e-8, f"|err| = {err:.2e}"))

    # Weight-scaling invariance.
    x = rng.normal(0, 1, 300)
    design = DesignMatrix(np.column_stack([np.ones(300), x]), np.zeros((300, 0)),
                          np.zeros(300))
    yy = (rng.random(300) < LOGIT.g_inv(0.3 + 0.5 * x)).astype(float)
    w = rng.uniform(0.5, 2.0, 300)
    fit1 = solve_estimating_equations(design, yy, w, LOGIT)
    fit2 = solve_estimating_equations(design, yy, 7.25 * w, LOGIT)
    gap = float(np.abs(fit1.beta_hat - fit2.beta_hat).max())
    checks.append(("weight-scaling invariance", gap < 1e-8, f"max |diff| = {gap:.2e}"))

    # Regret algebra on random draws.
    psi = rng.normal(0, 1, 3)
    hmat = rng.normal(0, 1, (2000, 3))
    a = rng.integers(0, 2, 2000).astype(float)
    mu = regret(psi, hmat, a)
    ok = bool(np.all(mu >= 0.0))
    blip_gap = float(np.abs(
        mu - (np.asarray([optimal_action(psi, row) for row in hmat]) - a)
        * (hmat @ psi)).max())
    checks.append(("regret non-negativity and blip identity",
                   ok and blip_gap < 1e-12, f"min mu = {mu.min():.2e}"))

    # Stage-1 truth: closed form vs the independent cell contrast.
    worst = 0.0
    for _ in range(50):
        params = Study2bParams(n=1, theta=tuple(rng.normal(0, 1, 9)),
                               delta=tuple(rng.normal(0, 1, 2)))
        a_form = true_psi1_study2b(params)
        b_form = psi1_contrast_oracle(params)
        worst = max(worst, abs(a_form[0] - b_form[0]), abs(a_form[1] - b_form[1]))
    checks.append(("stage-1 truth oracle agreement", worst < 1e-10,
                   f"max |diff| = {worst:.2e}"))

    # Seeded determinism of a small study1 run.
    d1 = generate_study1(Study1Params(n=200, seed=7))
    d2 = generate_study1(Study1Params(n=200, seed=7))
    same = (np.array_equal(d1.outcome, d2.outcome)
            and np.array_equal(d1.stages[0].treatment, d2.stages[0].treatment)
            and all(np.array_equal(d1.stages[0].covariates[c],
                                   d2.stages[0].covariates[c])
                    for c in d1.stages[0].covariates))
    checks.append(("seeded generation determinism", same, "bitwise equal"))

    return checks
