"""Command line: ``fraudsim run|validate|schema``.

Exit status of ``run``: 0 when every verdict passes, 2 when any fails,
3 when none fails but some are indeterminate, 1 for invalid configs.
"""
import argparse
import json
import sys

from .config import ExperimentConfig, OUTPUT_ENV, validate_config
from .errors import ConfigError
from .runner import run_experiment


def _print_config_error(exc):
    print("invalid config:", file=sys.stderr)
    for loc, msg in exc.errors:
        print(f"  {loc}: {msg}", file=sys.stderr)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fraudsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--output-dir", help=f"overrides output_dir and ${OUTPUT_ENV}")
    run.add_argument("--workers", type=int, help="overrides sim.workers")
    val = sub.add_parser("validate", help="check a config without simulating")
    val.add_argument("config")
    sub.add_parser("schema", help="print the config JSON schema")
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(ExperimentConfig.json_schema(), indent=2))
        return 0
    try:
        plan = validate_config(args.config)
    except ConfigError as exc:
        _print_config_error(exc)
        return 1
    if args.command == "validate":
        print(f"ok: {plan.config.experiment} experiment, beta = {plan.betas}")
        return 0
    report = run_experiment(plan.config, output_dir=args.output_dir, workers=args.workers)
    for line in report.summary_lines():
        print(line)
    print(f"report: {report.output_dir}/report.json")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
