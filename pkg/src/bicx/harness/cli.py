"""``bicx`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigError
from ..priors import estimate_constants, parse_prior
from . import runner
from .audit import audit_bic
from .config import load_config
from .lemmas import SUITES, verify_lemmas
from .scenarios import SCENARIOS, counterexample_scenarios


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, default=float))


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    try:
        result = runner.execute(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    out = Path(args.out) if args.out else Path("runs") / Path(args.config).stem
    runner.write_outputs(result, out)
    rep = result.report
    print(f"certified={rep.certified} min_eig={rep.achieved_lambda:.6g} lambda_bar={rep.lambda_bar:g} "
          f"pulls={rep.total_pulls} failure={rep.failure} out={out}")
    return result.exit_code


def cmd_audit(args) -> int:
    rep = audit_bic(args.trace, n_particles=args.particles, seed=args.seed)
    _print(rep.to_dict())
    return 0 if rep.passed else 1


def cmd_verify(args) -> int:
    checks = verify_lemmas(args.suite)
    ok = True
    for c in checks:
        tag = "PASS" if c.passed else ("FAIL" if c.normative else "INFO")
        note = "" if c.normative else " (exploratory)"
        print(f"{tag} {c.name}{note}")
        ok &= c.passed or not c.normative
    return 0 if ok else 1


def cmd_estimate(args) -> int:
    try:
        prior = parse_prior(args.prior)
    except (ValueError, KeyError, OSError) as exc:
        print(f"bad prior: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    ac = estimate_constants(prior, n_dirs=args.dirs, n_samples=args.samples, seed=args.seed)
    _print(ac.to_dict())
    return 0


def cmd_scenario(args) -> int:
    kwargs = {"seed": args.seed}
    if args.name == "degenerate_variance" and args.atom_weight is not None:
        kwargs["atom_weight"] = args.atom_weight
    if args.steps is not None:
        kwargs["steps"] = args.steps
    _print(counterexample_scenarios(args.name, **kwargs))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bicx", description="Incentive-compatible exploration for linear bandits")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configuration and write metrics, trace and report")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="re-estimate every recommendation on an independent cloud")
    a.add_argument("--trace", required=True)
    a.add_argument("--particles", type=int, default=100_000)
    a.add_argument("--seed", type=int, default=12345)
    a.set_defaults(func=cmd_audit)

    v = sub.add_parser("verify", help="randomized and Monte Carlo checks of the supporting inequalities")
    v.add_argument("--suite", default="all", choices=["all", *SUITES])
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("estimate", help="estimate the distributional constants of a prior")
    e.add_argument("--prior", required=True, help="inline JSON, a JSON file, or a points file")
    e.add_argument("--samples", type=int, default=100_000)
    e.add_argument("--dirs", type=int, default=256)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("scenario", help="run a prior on which exploration stalls")
    s.add_argument("--name", required=True, choices=SCENARIOS)
    s.add_argument("--atom-weight", type=float, default=None)
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
