"""Command-line entry point: ``averseek <subcommand>``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..ode import IntegrationError
from .config import ConfigError, load_config, load_probe_config
from .io import write_json
from .probes import builtin_probe, run_probe
from .scenarios import FIGURES, reproduce_figure, run_scenario, sweep
from .verify import battery

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=os.environ.get("AVERSEEK_OUT", "averseek-out"), help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel jobs for sweeps and probes")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--tol", type=float, default=None, help="override rtol and atol")

    ap = argparse.ArgumentParser(prog="averseek", description="Averaging-based extremum seeking simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="run one scenario from a JSON config")
    p.add_argument("config")
    p = sub.add_parser("reproduce", parents=[common], help="run a built-in figure scenario")
    p.add_argument("figure", choices=FIGURES)
    p = sub.add_parser("sweep", parents=[common], help="run a scenario over a parameter grid")
    p.add_argument("config")
    p.add_argument("--grid", required=True, help="JSON object mapping keys to value lists")
    sub.add_parser("verify", parents=[common], help="run the identity battery")
    p = sub.add_parser("probe", parents=[common], help="run the stability probe")
    p.add_argument("config", help="probe JSON path, or classical or source for the built-in probes")
    return ap


def _overrides(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.tol is not None:
        changes["integrator"] = {"rtol": args.tol, "atol": args.tol}
    return cfg.with_overrides(**changes) if changes else cfg


def _load_grid(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"grid file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def _dispatch(args) -> int:
    out = Path(args.out)
    if args.command == "simulate":
        paths = run_scenario(_overrides(load_config(args.config), args), out)
        print(json.dumps(paths, indent=2))
        return EXIT_OK
    if args.command == "reproduce":
        result, paths = reproduce_figure(args.figure, out, args.tol)
        print(json.dumps(paths, indent=2))
        return EXIT_OK
    if args.command == "sweep":
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        rows = sweep(_overrides(load_config(args.config), args), _load_grid(args.grid), out, args.jobs)
        for row in rows:
            print(row["name"], row["status"])
        return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NUMERIC
    if args.command == "verify":
        results = battery(args.tol)
        for r in results:
            print(r.line())
        write_json(out / "verify.json", {"checks": [r.as_dict() for r in results]})
        return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC
    if args.command == "probe":
        pc = builtin_probe(args.config) if args.config in ("classical", "source") else load_probe_config(args.config)
        if args.seed is not None:
            pc = type(pc)(**{**pc.__dict__, "seed": args.seed})
        if args.tol is not None:
            from ..ode import IntegratorConfig

            pc = type(pc)(**{**pc.__dict__, "integrator": IntegratorConfig(rtol=args.tol, atol=args.tol)})
        report = run_probe(pc, max(1, args.jobs))
        path = write_json(out / f"{pc.name}.json", report.as_dict())
        for row in report.rows:
            print(f"eps={row.eps:g} {'PASS' if row.passed else 'FAIL'} ({len(row.failures)}/{row.n_runs} runs failed)")
        for w in report.warnings:
            print("warning:", w)
        print(path)
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
