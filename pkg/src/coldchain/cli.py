"""Command-line front end: ``coldchain {affine,twave,field,sweep} --config FILE``.

Exit codes: 0 on completion (a blow-up is a result, not a failure), 2 when
the scenario fails validation, 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ColdChainError, ConfigError
from .scenario import KINDS, load_scenario, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("coldchain")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coldchain", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} scenario")
        p.add_argument("--config", required=True, help="scenario INI file")
        p.add_argument("--out", default=None, help="output directory (default: ./out/<name>)")
        p.add_argument("--tol", type=float, default=None, help="override the relative tolerance")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    try:
        sc = load_scenario(args.config)
        if sc.kind != args.command:
            raise ConfigError(f"scenario kind is {sc.kind!r}, not {args.command!r}",
                              field="scenario.kind", path=args.config)
        out = Path(args.out) if args.out else Path("out") / sc.name
        log.info("running %s scenario %s -> %s", sc.kind, sc.name, out)
        summary = run_scenario(sc, out, args.tol)
    except ConfigError as exc:
        print(f"coldchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ColdChainError, ArithmeticError, RuntimeError) as exc:
        print(f"coldchain: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"coldchain: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("termination: %s; wrote %s", summary.termination, ", ".join(summary.artifacts))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
