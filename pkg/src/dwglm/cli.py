"""Command-line interface: simulate, estimate, oracle, check."""

from __future__ import annotations

import argparse
import sys

from .errors import DwglmError
from .links import LINK_NAMES
from .simulation import Study2bParams, true_psi1_study2b, true_psi2_study2b


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dwglm",
        description="Doubly-robust dynamic treatment regime estimation "
                    "for binary outcomes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation study cell")
    sim.add_argument("--study", required=True,
                     choices=("study1", "study2a", "study2b"))
    sim.add_argument("--scenario", type=int, default=4,
                     help="misspecification scenario/case (study1: 1-4, "
                          "study2a: 1-2, study2b: 1)")
    sim.add_argument("--method", default="m2", choices=("m0", "m1", "m2"))
    sim.add_argument("--link", default="logit", choices=LINK_NAMES)
    sim.add_argument("--n", type=int, default=1000, help="subjects per dataset")
    sim.add_argument("--reps", type=int, default=200,
                     help="Monte Carlo replications")
    sim.add_argument("--R", type=int, default=25,
                     help="pseudo-outcome replicates per stage")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    est = sub.add_parser("estimate", help="estimate a DTR from a CSV dataset")
    est.add_argument("--data", required=True, help="CSV dataset path")
    est.add_argument("--config", required=True, help="JSON analysis config")
    est.add_argument("--out", required=True, help="output directory")
    est.add_argument("--method", choices=("m0", "m1", "m2"),
                     help="override the config's method")
    est.add_argument("--link", choices=LINK_NAMES, help="override the config's link")
    est.add_argument("--R", type=int, help="override pseudo-outcome replicates")
    est.add_argument("--seed", type=int, help="override the config's seed")

    orc = sub.add_parser(
        "oracle",
        help="print the closed-form blip truth for the confounded two-stage study")
    orc.add_argument("--theta", default=None,
                     help="nine comma-separated outcome coefficients")
    orc.add_argument("--delta", default=None,
                     help="two comma-separated tailoring-model coefficients")

    sub.add_parser("check", help="run the embedded invariant battery")
    return parser


def _cmd_simulate(args) -> int:
    from .runner import run_simulation_command

    summary = run_simulation_command(
        study=args.study, scenario=args.scenario, method=args.method,
        n=args.n, replications=args.reps, seed=args.seed, out_path=args.out,
        link=args.link, n_pseudo_replicates=args.R)
    for row in summary:
        print(f"stage {row['stage']} {row['term']:<10} truth={row['truth']:+.4f} "
              f"mean={row['mean']:+.4f} bias={row['bias']:+.4f} "
              f"mc_sd={row['mc_sd']:.4f} n={row['n_ok']}")
    print(f"wrote estimates.csv, summary.csv, manifest.json to {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    from .runner import run_estimate_command, rule_description

    result = run_estimate_command(args.data, args.config, args.out,
                                  method=args.method, link=args.link,
                                  pseudo_replicates=args.R, seed=args.seed)
    for stage_num, stage_est in enumerate(result.stages, start=1):
        print(rule_description(stage_num, stage_est.terms, stage_est.psi_hat))
    print(f"wrote psi_table.csv, replicates.csv, rules.txt, manifest.json to {args.out}")
    return 0


def _parse_floats(text, count, what):
    values = tuple(float(v) for v in text.split(","))
    if len(values) != count:
        raise ValueError(f"{what} needs {count} comma-separated values")
    return values


def _cmd_oracle(args) -> int:
    kwargs = {}
    if args.theta is not None:
        kwargs["theta"] = _parse_floats(args.theta, 9, "--theta")
    if args.delta is not None:
        kwargs["delta"] = _parse_floats(args.delta, 2, "--delta")
    params = Study2bParams(n=1, **kwargs)
    psi10, psi11 = true_psi1_study2b(params)
    psi2 = true_psi2_study2b(params)
    print(f"stage 1 blip truth: intercept = {psi10:.6f}, o1 = {psi11:.6f}")
    print(f"stage 2 blip truth: intercept = {psi2[0]:.6f}, "
          f"o2 = {psi2[1]:.6f}, a1 = {psi2[2]:.6f}")
    return 0


def _cmd_check(_args) -> int:
    from .runner import run_self_checks

    failed = 0
    for name, ok, detail in run_self_checks():
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} check(s) failed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "oracle": _cmd_oracle,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except (DwglmError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
