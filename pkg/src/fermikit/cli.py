"""Command-line front end: ``fermikit verify | demo | list-checks``."""
from __future__ import annotations

import argparse
import json
import sys

from .checks import run_scenario
from .errors import FermikitError, ScenarioError
from .scenario import CHECKS, demo_scenario, load_scenario, parse_scenario

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def dump_report(report):
    return json.dumps(report, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def _emit(report, out):
    text = dump_report(report)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for rec in report["checks"]:
        status = "PASS" if rec["pass"] else "FAIL"
        print(f"{status}  {rec['name']}", file=sys.stderr)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_verify(args):
    sc = load_scenario(args.scenario, tol=args.tol, seed=args.seed)
    return _emit(run_scenario(sc, timing=args.timing), args.out)


def cmd_demo(args):
    data = demo_scenario(args.sites)
    if args.seed is not None:
        data["seed"] = args.seed
    sc = parse_scenario(data, tol=args.tol)
    return _emit(run_scenario(sc, timing=args.timing), args.out)


def cmd_list(args):
    for name in CHECKS:
        print(name)
    return EXIT_PASS


def build_parser():
    p = argparse.ArgumentParser(prog="fermikit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the checks listed in a scenario file")
    v.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    v.add_argument("--tol", type=float, default=None, help="override the scenario tolerance")
    v.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    v.add_argument("--out", default=None, help="write the report here instead of stdout")
    v.add_argument("--timing", action="store_true", help="record elapsed_ms per check")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="uniform state on half an even chain, grading map, all checks")
    d.add_argument("--sites", type=int, default=4)
    d.add_argument("--tol", type=float, default=None)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--out", default=None)
    d.add_argument("--timing", action="store_true")
    d.set_defaults(func=cmd_demo)

    ls = sub.add_parser("list-checks", help="print the available check names")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
    except (OSError, FermikitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
