"""Command line entry point: ``stein-audit run|list-families|demo``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .densities import FAMILIES
from .errors import ConfigError
from .harness import emit_report, exit_code, load_config, run


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stein-audit", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the checks declared in a JSON config")
    r.add_argument("--config", required=True, help="path to the JSON run config")
    r.add_argument("--out", help="output directory (default: config output.path or '.')")
    r.add_argument("--format", choices=("csv", "json"), help="report format (default: config or csv)")
    r.add_argument("--strict", action="store_true", help="also fail (exit 2) on audited violations")
    r.add_argument("--seed", type=int, help="seed for randomized parameter sweeps")
    r.add_argument("--tol", type=float, help="absolute quadrature tolerance override")
    sub.add_parser("list-families", help="list density families and their parameters")
    sub.add_parser("demo", help="run the built-in acceptance suite")
    return ap


def _run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed, tol=args.tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    records, summary = run(cfg)
    fmt = args.format or cfg.output_format
    out = args.out or cfg.output_path or "."
    try:
        path = emit_report(records, summary, cfg, out, fmt)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"report": str(path), **summary.as_dict(with_time=True)}, indent=2))
    return exit_code(summary, args.strict)


def _list_families() -> int:
    for name, info in FAMILIES.items():
        params = ", ".join(f"{k}: {v}" for k, v in info["params"].items())
        print(f"{name:18s} {params}")
    return 0


def _demo() -> int:
    from .acceptance import run_all

    results = run_all()
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 2


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    if args.command == "list-families":
        return _list_families()
    return _demo()


if __name__ == "__main__":
    sys.exit(main())
