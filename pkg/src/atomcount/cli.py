"""Command-line front end: ``atomcount run|fig|verify``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_scenario
from .counting import ConditioningError
from .permanent import CapacityError
from .propagation import InvariantViolation
from .scenarios import (
    FIGURES,
    MatrixInvariantError,
    UnsupportedScenario,
    dump_matrices,
    run_figure,
    run_scenario,
    verify_scenario,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_INVARIANT = 4
VERIFY_TOL = 1e-8

log = logging.getLogger("atomcount")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="output directory (default: $ATOMCOUNT_OUT or ./atomcount_out)")
    common.add_argument("--mode", choices=("exact", "far_field"), help="override the correlation-matrix mode")
    common.add_argument("--threads", type=int, help="worker threads for the permanent kernels")

    p = argparse.ArgumentParser(prog="atomcount", description="Atom counting statistics of lattice gases.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("scenario")
    fig = sub.add_parser("fig", parents=[common], help="write plot data for a figure preset")
    fig.add_argument("figure", help="1..7, fig1..fig7, or 'all'")
    ver = sub.add_parser("verify", parents=[common], help="compare a scenario against the Fock-space oracle")
    ver.add_argument("scenario")
    return p


def _figures(arg: str) -> list[str]:
    if arg == "all":
        return list(FIGURES)
    name = arg if arg.startswith("fig") else f"fig{arg}"
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {arg!r}; choose 1..7 or all")
    return [name]


def _execute(args, out_dir) -> int:
    if args.command == "run":
        scenario = load_scenario(args.scenario)
        try:
            summary = run_scenario(scenario, out_dir, args.mode)
        except MatrixInvariantError as exc:
            exc.dump = dump_matrices(out_dir, scenario.name, exc.matrices)
            raise
        print(f"wrote {', '.join(summary['files'])} to {out_dir}")
        return EXIT_OK
    if args.command == "fig":
        for name in _figures(args.figure):
            summary = run_figure(name, out_dir, args.mode or "exact")
            print(f"{name}: wrote {', '.join(summary['files'])} to {out_dir}")
        return EXIT_OK
    scenario = load_scenario(args.scenario)
    if args.mode:
        scenario = replace(scenario, mode=args.mode)
    worst = verify_scenario(scenario)
    ok = worst <= VERIFY_TOL
    print(f"{scenario.name}: max |dp| = {worst:.3e} ({'ok' if ok else 'FAIL'}, tolerance {VERIFY_TOL:g})")
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    out_dir = args.out_dir or os.environ.get("ATOMCOUNT_OUT") or "atomcount_out"
    if args.threads is not None:
        if args.threads < 1:
            log.error("--threads must be positive")
            return EXIT_CONFIG
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return _execute(args, out_dir)
    except (ConfigError, UnsupportedScenario, FileNotFoundError) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_CONFIG
    except CapacityError as exc:
        log.error("capacity exceeded: %s", exc)
        return EXIT_CAPACITY
    except (InvariantViolation, ConditioningError) as exc:
        log.error("invariant violated: %s", exc)
        for path in getattr(exc, "dump", None) or dump_matrices(out_dir, "failed", getattr(exc, "matrices", [])):
            log.error("correlation matrix written to %s", path)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
