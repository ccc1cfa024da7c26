"""Command-line entry point.

Subcommands:

* ``metaexp run --config <path> [--seed N] [--replications N] [--out DIR]
  [--format {md,csv,json}] [--parallelism N] [--emit-events]`` runs a
  scenario and writes the artifact directory. ``--config`` accepts a file
  path or a bundled preset name (``table1``, ``table1_null``, ``spillover``,
  ``closed_form``). The seed defaults to the scenario's, overridable by the
  ``METAEXP_SEED`` environment variable, overridable by ``--seed``.
* ``metaexp report --out DIR [--format ...]`` regenerates the report of a
  finished run from its recorded metadata.
* ``metaexp power --baseline R --mde E [--alpha A] (--power P | --n N)``
  prints the required per-arm sample size for a target power, or the
  achieved power at a given n.

Exit codes: 0 success, 2 validation failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import stats
from .runner import report_from_artifacts, run_scenario
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaexp",
        description="Meta-experiment laboratory: simulate and analyze A/B tests"
        " run on the experimentation process itself.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write an artifact directory")
    run.add_argument("--config", required=True, help="scenario file or bundled preset name")
    run.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    run.add_argument("--replications", type=int, default=None)
    run.add_argument("--out", default="out", help="artifact directory")
    run.add_argument("--format", choices=("md", "csv", "json"), default="md")
    run.add_argument("--parallelism", type=int, default=1)
    run.add_argument("--emit-events", action="store_true",
                     help="write per-replication event/snapshot logs")
    run.add_argument("--mode", choices=("rct", "rollout"), default="rct",
                     help="rct randomizes; rollout treats every eligible"
                     " experiment from the scenario's rollout week on")

    rep = sub.add_parser("report", help="regenerate the report of a finished run")
    rep.add_argument("--out", required=True, help="artifact directory of the run")
    rep.add_argument("--format", choices=("md", "csv", "json"), default="md")

    power = sub.add_parser("power", help="standalone power / sample-size calculator")
    power.add_argument("--baseline", type=float, required=True)
    power.add_argument("--mde", type=float, required=True, help="absolute MDE")
    power.add_argument("--alpha", type=float, default=0.05)
    power.add_argument("--power", type=float, default=None, help="target power")
    power.add_argument("--n", type=int, default=None, help="per-arm sample size")
    return parser


def _resolve_seed(args, scenario) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("METAEXP_SEED")
    if env is not None:
        return int(env)
    return scenario.seed


def _cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    seed = _resolve_seed(args, scenario)
    replications = args.replications if args.replications is not None else scenario.replications
    if replications < 1:
        print("error: --replications must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    if args.parallelism < 1:
        print("error: --parallelism must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    report = run_scenario(
        scenario,
        master_seed=seed,
        replications=replications,
        out_dir=Path(args.out),
        parallelism=args.parallelism,
        emit_events=args.emit_events,
        fmt=args.format,
        mode=args.mode,
    )
    print(f"wrote {args.out} (scenario {scenario.name!r}, seed {seed},"
          f" {replications} replication(s))")
    success = next((m for m in report.metrics if m.kind == "success"), None)
    if success is not None and success.significant_fraction is not None:
        print(f"success metric: effect {success.absolute_effect:+.4f},"
              f" significant in {success.significant_fraction:.1%} of replications")
    return EXIT_OK


def _cmd_report(args) -> int:
    report = report_from_artifacts(Path(args.out), fmt=args.format)
    if args.format == "json":
        print(report.to_json(), end="")
    else:
        print(report.to_markdown())
    return EXIT_OK


def _cmd_power(args) -> int:
    if (args.power is None) == (args.n is None):
        print("error: give exactly one of --power or --n", file=sys.stderr)
        return EXIT_VALIDATION
    if args.n is not None:
        spec = stats.PowerSpec(
            baseline_rate=args.baseline, mde_abs=args.mde, alpha=args.alpha,
            n_per_arm=args.n,
        )
        achieved = stats.power_two_proportions(spec)
        print(f"baseline {args.baseline:g}, mde {args.mde:g} absolute,"
              f" alpha {args.alpha:g} two-sided")
        print(f"power at n={args.n} per arm: {achieved:.4f}")
    else:
        spec = stats.PowerSpec(
            baseline_rate=args.baseline, mde_abs=args.mde, alpha=args.alpha,
            target_power=args.power,
        )
        n = stats.required_sample_size(spec)
        achieved = stats.power_two_proportions(
            stats.PowerSpec(
                baseline_rate=args.baseline, mde_abs=args.mde, alpha=args.alpha,
                target_power=args.power, n_per_arm=n,
            )
        )
        print(f"baseline {args.baseline:g}, mde {args.mde:g} absolute,"
              f" alpha {args.alpha:g} two-sided, target power {args.power:g}")
        print(f"required n per arm: {n} (achieved power {achieved:.4f})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_power(args)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
