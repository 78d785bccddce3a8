"""Command-line entry points: run experiments, fit rates, check acceptance."""

from __future__ import annotations

import argparse
import sys

from .accept import SUITES, check_acceptance
from .bench import ExperimentConfig, RunTrace, fit_rate, run_experiment
from .errors import ConfigurationError, RecipeViolationError


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ckit", description="catalyzed-solver benchmark harness")
    cmds = p.add_subparsers(dest="command", required=True)

    run_p = cmds.add_parser("run", help="execute a config over a seed batch and write a CSV trace")
    run_p.add_argument("--config", required=True, help="path to the JSON experiment config")
    run_p.add_argument("--out", default=None, help="output directory for the CSV trace")
    run_p.add_argument("--seeds", type=int, default=None, help="override the config's seed count")

    fit_p = cmds.add_parser("fit", help="fit a decay rate to a recorded trace")
    fit_p.add_argument("--trace", required=True, help="path to a trace CSV")
    fit_p.add_argument("--model", required=True, choices=["power", "geometric"])
    fit_p.add_argument("--column", default="primal_gap")

    acc_p = cmds.add_parser("accept", help="run a named acceptance suite")
    acc_p.add_argument("--suite", required=True, help=f"one of: {', '.join(SUITES)}, or 'all'")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = ExperimentConfig.from_json(args.config)
            if args.seeds is not None:
                if args.seeds < 1:
                    raise ConfigurationError("must be >= 1", field="--seeds")
                cfg = ExperimentConfig(
                    problem=cfg.problem, algorithm=cfg.algorithm, target=cfg.target,
                    seeds=args.seeds, out=cfg.out,
                )
            trace = run_experiment(cfg, out_dir=args.out)
            dest = args.out or cfg.out
            where = f" -> {dest}/{cfg.algorithm}.csv" if dest else ""
            print(f"{cfg.algorithm}: {len(trace.rows)} rows over {cfg.seeds} run(s){where}")
            return 0
        if args.command == "fit":
            trace = RunTrace.from_csv(args.trace)
            value, resid = fit_rate(trace, args.model, column=args.column)
            label = "exponent" if args.model == "power" else "factor"
            print(f"model={args.model} column={args.column} {label}={value:.6g} residual={resid:.3g}")
            return 0
        if args.command == "accept":
            name = args.suite
            if name != "all" and name not in SUITES:
                print(f"unknown suite {name!r}; available: {', '.join(SUITES)} (or 'all')", file=sys.stderr)
                return 2
            reports = check_acceptance(name)
            failed = False
            for rep in reports:
                print(rep.summary_line())
                for line in rep.detail_lines():
                    print(f"  {line}")
                failed = failed or not rep.passed
            return 1 if failed else 0
    except RecipeViolationError as err:
        print(f"recipe check failed: {err}", file=sys.stderr)
        return 2
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
