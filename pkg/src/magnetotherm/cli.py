"""Command-line entry point: ``magnetotherm run <scenario>`` and ``magnetotherm check-config``."""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .config import load_config, tomllib
from .errors import MagnetothermError
from .experiments import SCENARIO_DEFAULTS, SCENARIOS, run_scenario, scenario_config

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def _read_toml(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _overrides(args, raw: dict) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.n is not None:
        kind = raw.get("grid", {}).get("kind") or SCENARIO_DEFAULTS[args.scenario].get("grid", {}).get("kind")
        grid = dict(raw.get("grid", {}))
        if kind == "shell_masked":
            grid["n"] = args.n
        else:
            grid["dims"] = [args.n] * 3
        raw["grid"] = grid
    if args.steps is not None:
        raw["time"] = {**raw.get("time", {}), "n_steps": args.steps}
    return raw


def cmd_run(args) -> int:
    try:
        cfg = scenario_config(args.scenario, _overrides(args, _read_toml(args.config)))
        res = run_scenario(cfg, args.scenario, out_dir=args.out, resume=args.resume)
    except (MagnetothermError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return EXIT_ERROR
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<34} {c.value!s:<28} {c.rule}")
    print(f"{res.scenario}: {'passed' if res.passed else 'FAILED'} in {res.runtime_s:.1f} s"
          + (f"; outputs in {args.out}" if args.out else ""))
    return EXIT_OK if res.passed else EXIT_FAILED


def cmd_check_config(args) -> int:
    try:
        if args.scenario:
            cfg = scenario_config(args.scenario, _read_toml(args.file))
        else:
            cfg = load_config(args.file)
        cfg.grid()
        cfg.laws()
    except (MagnetothermError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"valid (hash {cfg.hash()})")
    if args.show:
        print(json.dumps(cfg.data, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magnetotherm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and report pass/fail")
    r.add_argument("scenario", choices=SCENARIOS)
    r.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    r.add_argument("--out", help="output directory for CSV, JSON and PNG files")
    r.add_argument("--seed", type=int, help="random seed")
    r.add_argument("--n", type=int, help="cells per axis")
    r.add_argument("--steps", type=int, help="number of time steps")
    r.add_argument("--resume", help="checkpoint to resume from (trajectory scenarios)")
    r.add_argument("-v", "--verbose", action="store_true", help="print tracebacks on error")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-config", help="validate a config file")
    c.add_argument("file")
    c.add_argument("--scenario", choices=SCENARIOS, help="validate against a scenario's defaults")
    c.add_argument("--show", action="store_true", help="print the resolved config")
    c.set_defaults(func=cmd_check_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
