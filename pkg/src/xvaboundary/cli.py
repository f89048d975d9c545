"""Command-line entry point: ``xvaboundary {run,price,smile,mva-table,portfolio}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, shipped_config
from .runner import OUTPUTS, run_case


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xvaboundary",
        description="Swaption exercise boundaries and prices with XVA in the exercise decision.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "all reports",
        "price": "per-strike exercise report",
        "smile": "implied-vol smiles with and without XVA",
        "mva-table": "MVA at exercise against MVA in the price",
        "portfolio": "joint exercise of a netting set of options",
    }
    for name in OUTPUTS:
        p = sub.add_parser(name, help=helps[name])
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="TOML run configuration")
        src.add_argument("--case", help="name of a shipped configuration")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--out", type=Path, help="output directory (default: output.dir)")
        p.add_argument("--no-market-risk", action="store_true",
                       help="drop market-risk capital from the capital profile")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        path = args.config if args.config is not None else shipped_config(args.case)
        cfg, warnings, digest = load_config(path)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path(cfg.output.dir)
    manifest = run_case(cfg, out, command=args.command, seed=args.seed,
                        market_risk=False if args.no_market_risk else None,
                        base_dir=Path(path).parent, config_hash=digest,
                        config_path=str(path), warnings=warnings)
    for name in manifest["outputs"]:
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
