"""
Command-line entry point: ``activescalar <subcommand> [--config PATH] ...``.

Exit codes: 0 success, 1 configuration error, 2 solver failure (CFL or
blow-up), 3 an acceptance threshold failed (or a run is missing) in report.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from scipy import fft

from .config import ConfigError, load_config
from .evolution import SolverError
from .experiments import (EXPERIMENTS, LINEARIZE_SOURCES, collect_report, write_result,
                          write_table)

log = logging.getLogger("activescalar")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_REPORT = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file; missing keys keep defaults")
    common.add_argument("--out", type=Path, help="output directory (default: [run] output_dir)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="activescalar",
                                description="Forced fractional active scalar experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        if name == "linearize":
            sp.add_argument("--source", choices=LINEARIZE_SOURCES, default="two_mode")
        if name == "runge":
            sp.add_argument("--no-lambda-sweep", action="store_true",
                            help="skip the regularisation sweep")
        sp.add_argument("--no-trajectories", action="store_true",
                        help="do not dump snapshot directories")
    sub.add_parser("report", parents=[common], help="aggregate prior runs into the "
                   "acceptance table")
    return p


def _run_experiment(args, cfg, out: Path) -> int:
    kw = {}
    if args.command == "linearize":
        kw["source"] = args.source
    if args.command == "runge":
        kw["lambda_sweep"] = not args.no_lambda_sweep
    t0 = time.perf_counter()
    result = EXPERIMENTS[args.command](cfg, **kw)
    wall = time.perf_counter() - t0
    d = write_result(result, cfg, out, wall, dump_trajectories=not args.no_trajectories)
    for c in result.criteria:
        print(f"criterion {c.id:2d} {'PASS' if c.passed else 'FAIL'}  {c.name}: "
              f"{float(c.value):.6g} ({c.threshold})")
    print(f"wrote {d} in {wall:.1f}s")
    return EXIT_OK


def _report(out: Path) -> int:
    rows, missing = collect_report(out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["criterion", "name", "subcommand", "status", "value", "threshold"]
    write_table(out / "report.csv", header, [[r[h] for h in header] for r in rows])
    (out / "report.json").write_text(json.dumps({"criteria": rows, "missing_runs": missing},
                                                indent=2) + "\n")
    for r in rows:
        print(f"criterion {r['criterion']:2d} {r['status']:7s} {r['name']}")
    if missing:
        print("missing runs: " + ", ".join(missing))
    failed = [r for r in rows if r["status"] != "PASS"]
    return EXIT_REPORT if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, rng_seed=args.seed,
                          output_dir=str(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    if args.command == "report":
        return _report(out)
    if args.threads < 1:
        print("config error: threads: must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with fft.set_workers(args.threads):
            return _run_experiment(args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
