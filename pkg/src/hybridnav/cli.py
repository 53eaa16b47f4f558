"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 certification failure,
4 run-time singularity (gimbal lock, coplanar beacons under the abort policy).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, GimbalLock, SchemaMismatch, SingularBeaconGeometry, UncertifiedGain
from .harness import certify_scenario, run_scenario
from .report import compare_runs
from .scenario import builtin_names, load

OUTPUT_ENV = "HYBRIDNAV_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERT = 3
EXIT_SINGULAR = 4


def _output_root(arg: Optional[str]) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_ENV, "hybridnav-out"))


def _run_one(spec: str, out_root: str, dt: Optional[float] = None) -> tuple[int, str]:
    """Run a scenario and map failures to exit codes; returns ``(code, message)``."""
    try:
        cfg = load(spec)
        if dt:
            cfg.dt = dt
        res = run_scenario(cfg, Path(out_root) / cfg.name)
        return EXIT_OK, res.summary.format()
    except ConfigError as exc:
        return EXIT_CONFIG, f"{spec}: configuration error: {exc}"
    except UncertifiedGain as exc:
        return EXIT_CERT, f"{spec}: certification failed: {exc.args[0]}"
    except (GimbalLock, SingularBeaconGeometry) as exc:
        return EXIT_SINGULAR, f"{spec}: singularity: {exc}"


def cmd_run(args) -> int:
    code, msg = _run_one(args.scenario, str(_output_root(args.out)), args.dt)
    print(msg, file=sys.stdout if code == EXIT_OK else sys.stderr)
    return code


def cmd_batch(args) -> int:
    d = Path(args.directory)
    if not d.is_dir():
        print(f"{d}: not a directory", file=sys.stderr)
        return EXIT_CONFIG
    files = sorted(str(p) for p in d.glob("*.ini"))
    if not files:
        print(f"{d}: no *.ini scenario files", file=sys.stderr)
        return EXIT_CONFIG
    out = str(_output_root(args.out))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_run_one, files, [out] * len(files)))
    worst = EXIT_OK
    for f, (code, msg) in zip(files, results):
        print(msg if code == EXIT_OK else f"FAILED ({code}) {msg}")
        worst = max(worst, code)
    return worst


def cmd_compare(args) -> int:
    try:
        rep = compare_runs(args.baseline, args.candidate)
    except (SchemaMismatch, OSError) as exc:
        print(f"cannot compare: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(rep.format())
    if args.tol is not None and rep.state_max() > args.tol:
        print(f"state deviation {rep.state_max():.3e} exceeds tolerance {args.tol:g}")
        return 1
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        cfg = load(args.scenario)
        info = certify_scenario(cfg)
        code = EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UncertifiedGain as exc:
        info = exc.args[1] if len(exc.args) > 1 else {}
        print(exc.args[0], file=sys.stderr)
        code = EXIT_CERT
    print(json.dumps(info, indent=2))
    return code


def cmd_list(args) -> int:
    for name in builtin_names():
        cfg = load(name)
        print(f"{name:<26} {cfg.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridnav", description="Hybrid nonlinear observers for strapdown navigation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log singular-geometry skips and other warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario (file path or built-in name)")
    r.add_argument("scenario")
    r.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./hybridnav-out)")
    r.add_argument("--dt", type=float, help="override the integrator step")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run every *.ini in a directory in parallel")
    b.add_argument("directory")
    b.add_argument("--out")
    b.add_argument("-j", "--jobs", type=int, default=None)
    b.set_defaults(func=cmd_batch)

    c = sub.add_parser("compare", help="per-column max deviation between two trace CSVs")
    c.add_argument("baseline")
    c.add_argument("candidate")
    c.add_argument("--tol", type=float, help="exit 1 if any state column deviates by more")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("certify", help="gain certificates and schedule margins, no simulation")
    k.add_argument("scenario")
    k.set_defaults(func=cmd_certify)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
