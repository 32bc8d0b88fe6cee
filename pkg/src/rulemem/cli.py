"""Command-line entry points.

    rulemem run --exp 5 --domain logistics --beta 3 --seeds 42,123 --out results/
    rulemem theory --bound B6 --p 0.75 --n 10 --trials 100000
    rulemem verify-goldens

A JSON config file may supply any `run` option; precedence is
flags > config file > defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .envs import verify_goldens
from .harness import (DEFAULT_SEEDS, ConfigError, ExperimentConfig,
                      emit_report, run_experiment)
from .theory import TheoryParams, monte_carlo_validate, oracle_report

RUN_DEFAULTS = dict(
    experiment="5", domain="logistics", n_conditions=5, beta=3, max_retries=3,
    seeds=",".join(str(s) for s in DEFAULT_SEEDS), test_mode="matched",
    train_salt=0, test_salt=0, sk="off", compass_outer="disabled",
    prompt_baking=True, test_encounters=4,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulemem")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment analog")
    run.add_argument("--exp", dest="experiment")
    run.add_argument("--domain")
    run.add_argument("--n-conditions", type=int, dest="n_conditions")
    run.add_argument("--beta", type=int)
    run.add_argument("--max-retries", type=int, dest="max_retries")
    run.add_argument("--seeds", help="comma-separated seed list")
    run.add_argument("--test-mode", dest="test_mode", choices=["matched", "both"])
    run.add_argument("--train-salt", type=int, dest="train_salt")
    run.add_argument("--test-salt", type=int, dest="test_salt")
    run.add_argument("--sk", choices=["off", "adversarial"])
    run.add_argument("--compass-outer", dest="compass_outer", choices=["on", "off"])
    run.add_argument("--test-encounters", type=int, dest="test_encounters")
    run.add_argument("--config", help="JSON config file (flags override it)")
    run.add_argument("--out", help="report output directory")

    theory = sub.add_parser("theory", help="validate a closed-form bound")
    theory.add_argument("--bound", required=True,
                        choices=["coverage", "B1", "B2", "B4", "B6", "B8"])
    theory.add_argument("--trials", type=int, default=100_000)
    theory.add_argument("--seed", type=int, default=0)
    theory.add_argument("--p", type=float, default=0.75)
    theory.add_argument("--n", type=int, default=10, help="condition count")
    theory.add_argument("--alpha", type=float, default=0.85)
    theory.add_argument("--theta", type=int, default=2)
    theory.add_argument("--detection", type=float, default=0.95)
    theory.add_argument("--training-episodes", type=int, default=12)
    theory.add_argument("--unique-keys", type=int, default=4)
    theory.add_argument("--retries", type=int, default=5)
    theory.add_argument("--out", help="CSV output path")

    sub.add_parser("verify-goldens", help="check environment goldens and stats fixtures")
    return parser


def _merge_run_config(args: argparse.Namespace) -> ExperimentConfig:
    merged = dict(RUN_DEFAULTS)
    if args.config:
        merged.update(json.loads(Path(args.config).read_text()))
    for name in RUN_DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if merged["compass_outer"] in ("on", "off"):
        merged["compass_outer"] = "enabled" if merged["compass_outer"] == "on" else "disabled"
    seeds = merged["seeds"]
    if isinstance(seeds, str):
        seeds = tuple(int(s) for s in seeds.split(",") if s.strip())
    return ExperimentConfig(
        experiment=str(merged["experiment"]), domain=merged["domain"],
        n_conditions=int(merged["n_conditions"]), beta=int(merged["beta"]),
        max_retries=int(merged["max_retries"]), seeds=tuple(seeds),
        test_mode=merged["test_mode"], train_salt=int(merged["train_salt"]),
        test_salt=int(merged["test_salt"]), sk=merged["sk"],
        compass_outer=merged["compass_outer"],
        prompt_baking=bool(merged["prompt_baking"]),
        test_encounters=int(merged["test_encounters"]),
    )


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = _merge_run_config(args)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(f"experiment {cfg.resolved_experiment()} on {cfg.domain}; seeds {list(cfg.seeds)}")
    for outcome in result.outcomes:
        print(f"  seed {outcome.seed}: P1={outcome.p1:.3f} Pt={outcome.pt:.3f} "
              f"steps={outcome.avg_steps:.3f} conflicts={outcome.conflicts}")
    if args.out:
        csv_path, md_path = emit_report(result, args.out)
        print(f"wrote {csv_path} and {md_path}")
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    params = TheoryParams(p=args.p, alpha=args.alpha, theta=args.theta,
                          detection=args.detection,
                          training_episodes=args.training_episodes,
                          unique_keys=args.unique_keys, retries=args.retries)
    report = monte_carlo_validate(args.bound, params, trials=args.trials,
                                  seed=args.seed, n_conditions=args.n)
    print(f"{report.bound_id}: analytic={report.analytic:.6f} "
          f"empirical={report.empirical:.6f} |err|={report.abs_error:.6f}")
    if args.out:
        oracle_report([report], args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_verify_goldens() -> int:
    problems = verify_goldens()
    if problems:
        for problem in problems:
            print(f"MISMATCH {problem}", file=sys.stderr)
        return 1
    print("environment goldens verified (all domains, salts 0 and 1)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "theory":
        return _cmd_theory(args)
    if args.command == "verify-goldens":
        return _cmd_verify_goldens()
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
