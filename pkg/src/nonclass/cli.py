"""Command-line entry point: ``nonclass <target> [options]``.

Exit status 0 when every check passes, 1 on a tolerance failure, 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .repro import DEFAULT_GRIDS, TARGETS, ReproJob, parse_grid_value, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nonclass",
        description="Reproduce minor tables, figure datasets and verification suites as CSV.",
    )
    p.add_argument("target", nargs="?", choices=TARGETS, help="artifact to produce")
    p.add_argument("--target", dest="target_opt", choices=TARGETS, help="same as the positional target")
    p.add_argument("--config", type=Path, help="JSON file with target, out, tol, tail_tol and grids")
    p.add_argument("--out", type=Path, help="output directory (default: current directory)")
    p.add_argument("--tol", type=float, help="override the target's comparison tolerance")
    p.add_argument("--tail-tol", type=float, help="photon-number tail tolerance for truncation")
    p.add_argument(
        "--grid",
        action="append",
        default=[],
        metavar="NAME=V1,V2",
        help="override a parameter grid; known names: " + ", ".join(sorted(DEFAULT_GRIDS)),
    )
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    allowed = {"target", "out", "tol", "tail_tol", "grids"}
    extra = set(data) - allowed
    if extra:
        raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
    return data


def job_from_args(args: argparse.Namespace) -> ReproJob:
    cfg = _load_config(args.config)
    grids = {}
    for k, v in cfg.get("grids", {}).items():
        grids[k] = parse_grid_value(v) if isinstance(v, str) else list(v)
    for item in args.grid:
        name, sep, values = item.partition("=")
        if not sep:
            raise ValueError(f"--grid expects NAME=V1,V2, got {item!r}")
        grids[name.strip()] = parse_grid_value(values)
    target = args.target or args.target_opt or cfg.get("target")
    if target is None:
        raise ValueError("no target given")
    if args.target and args.target_opt and args.target != args.target_opt:
        raise ValueError("positional target and --target disagree")
    return ReproJob(
        target=target,
        out=args.out or Path(cfg.get("out", ".")),
        tol=args.tol if args.tol is not None else cfg.get("tol"),
        tail_tol=args.tail_tol if args.tail_tol is not None else cfg.get("tail_tol", 1e-12),
        grids=grids,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        job = job_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"nonclass: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        summary = run(job)
    except OSError as exc:
        print(f"nonclass: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, c in sorted(summary["checks"].items()):
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {job.target}:{name} rows={c['rows']} failed={c['failed']} max_abs_err={c['max_abs_err']:.3g}")
    print(f"{'PASS' if summary['passed'] else 'FAIL'} {job.target}: {summary['rows']} rows, {summary['failed']} failed")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
