"""Command-line entry point.

Exit codes: 0 when the pipeline completed (stage-level geometry failures are
findings recorded in the report), 1 for configuration errors, 2 for anything
unexpected.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .errors import ScenarioError
from .pipeline import run_pipeline
from .report import ReportIOError, emit_report
from .scenario import list_scenarios, parse_scenario, shipped_scenario

SUBCOMMANDS = {
    "geodesic": ("geodesic",),
    "conjugate": ("geodesic", "conjugate"),
    "indexform": ("geodesic", "index_form", "kernel"),
    "perturb": ("geodesic", "index_form", "kernel", "surjectivity"),
    "sweep": ("geodesic", "index_form", "kernel", "surjectivity", "sweep"),
    "hyperbolic-check": ("hyperbolic",),
    "counterexample": ("geodesic", "index_form", "kernel", "surjectivity", "counterexample"),
    "run": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semigeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True,
                       help="path to a .toml scenario, or the name of a shipped one")
        p.add_argument("--out", help="output directory (default: the scenario's outputs.dir)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--m", type=int, help="override grid.m")
        p.add_argument("--eps", action="append",
                       help="comma-separated sweep values, e.g. --eps=-0.01,0.01; may be repeated "
                            "(replaces sweep.eps)")
    sub.add_parser("list", help="list shipped scenarios")
    return parser


class ConfigError(Exception):
    pass


def load(ref: str):
    if ref.endswith(".toml") or "/" in ref:
        return parse_scenario(ref)
    return shipped_scenario(ref)


def apply_overrides(sc, args):
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        sc.seed = args.seed
    if args.m is not None:
        if args.m < 16:
            raise ConfigError("--m must be at least 16")
        sc.grid = {**sc.grid, "m": args.m}
    if args.eps is not None:
        try:
            sc.eps = [float(e) for chunk in args.eps for e in chunk.split(",") if e.strip()]
        except ValueError:
            raise ConfigError(f"--eps: cannot parse {args.eps}") from None
    return sc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command == "list":
        print("\n".join(list_scenarios()))
        return 0
    try:
        sc = apply_overrides(load(args.scenario), args)
        stages = SUBCOMMANDS[args.command]
        if stages is not None and args.command == "hyperbolic-check" and sc.hyperbolic is None:
            raise ConfigError("scenario has no [hyperbolic] section")
        if args.command == "counterexample" and sc.metric.kind != "standard-stationary":
            raise ConfigError("counterexample needs a standard-stationary metric")
        if stages is not None and "geodesic" in stages and sc.endpoints is None and sc.initial is None:
            raise ConfigError("scenario has no [endpoints] or [initial] section")
        report = run_pipeline(sc, stages)
        paths = emit_report(report, args.out or sc.out_dir, args.format)
    except (ScenarioError, ConfigError, ReportIOError) as exc:
        print(f"semigeo: configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - last-resort reporting
        traceback.print_exc()
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
