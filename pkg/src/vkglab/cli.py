"""Command line interface.

Subcommands:

* ``run``      execute a scenario config and write artifacts
* ``validate`` check a config without running it
* ``report``   summarize the artifacts of a previous run

Exit codes: 0 pass, 1 invariant failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from vkglab.diagnostics import DiagnosticsTimeline
from vkglab.errors import ConfigurationError
from vkglab.harness import emit_report, run_scenario
from vkglab.scenarios import ScenarioConfig, validate_config

__all__ = ["main"]


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="vkg-lab",
        description="Vlasov-Klein-Gordon numerical laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario config")
    run_p.add_argument("--config", required=True, help="YAML scenario config")
    run_p.add_argument("--output", required=True, help="output directory")
    run_p.add_argument("--workers", type=int, default=None,
                       help="worker threads for batched kernel verification")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    run_p.add_argument("--snapshot-every", type=int, default=None,
                       help="write field/phase snapshots every N steps")

    val_p = sub.add_parser("validate", help="validate a config")
    val_p.add_argument("--config", required=True)

    rep_p = sub.add_parser("report", help="summarize a finished run")
    rep_p.add_argument("--output", required=True,
                       help="output directory of a previous run")
    return parser


def _cmd_run(args):
    try:
        config = ScenarioConfig.load(args.config)
    except (OSError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        status = run_scenario(config, args.output, workers=args.workers,
                              seed=args.seed, snapshot_every=args.snapshot_every)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    summary_path = os.path.join(args.output, "summary.json")
    with open(summary_path, encoding="ascii") as fh:
        summary = json.load(fh)
    text, _ = emit_report(_load_timeline(args.output), summary=summary,
                          convergence=_load_convergence(args.output))
    print(text, end="")
    if status != 0:
        failing = [n for n, ok in summary["verdicts"].items() if not ok]
        print(f"invariant failure: {', '.join(sorted(failing))}", file=sys.stderr)
    return status


def _cmd_validate(args):
    try:
        config = ScenarioConfig.load(args.config)
    except (OSError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    violations = validate_config(config)
    if violations:
        for item in violations:
            print(f"violation: {item}")
        return 2
    print("config ok")
    return 0


def _load_timeline(out_dir):
    path = os.path.join(out_dir, "diagnostics.csv")
    if not os.path.exists(path):
        return None
    try:
        return DiagnosticsTimeline.from_csv(path)
    except ValueError:
        return None  # a mode with a different diagnostics schema


def _load_convergence(out_dir):
    path = os.path.join(out_dir, "convergence.json")
    if not os.path.exists(path):
        return None
    with open(path, encoding="ascii") as fh:
        return json.load(fh)


def _cmd_report(args):
    summary_path = os.path.join(args.output, "summary.json")
    if not os.path.exists(summary_path):
        print(f"no summary.json under {args.output}", file=sys.stderr)
        return 2
    with open(summary_path, encoding="ascii") as fh:
        summary = json.load(fh)
    text, payload = emit_report(_load_timeline(args.output), summary=summary,
                                convergence=_load_convergence(args.output))
    print(text, end="")
    with open(os.path.join(args.output, "report.json"), "w",
              encoding="ascii", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=float)
        fh.write("\n")
    return 0 if summary.get("all_pass") else 1


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate,
               "report": _cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
