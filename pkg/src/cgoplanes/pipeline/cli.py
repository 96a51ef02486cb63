"""Command line: ``cgoplanes <experiment> [--config PATH] [--out DIR] [--workers N] [--seed S]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .experiments import EXPERIMENTS, InfeasibleSweep, write_manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgoplanes", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        sp.add_argument("--config", type=Path, help="INI file; defaults are used for missing keys")
        sp.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
        sp.add_argument("--workers", type=int, help="worker processes (overrides [run] workers)")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides [run] seed)")
        sp.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("default-config", help="print the default configuration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(ExperimentConfig().to_text())
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        run = {}
        if args.out is not None:
            run["out"] = str(args.out)
        if args.workers is not None:
            run["workers"] = args.workers
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            run["seed"] = args.seed
        cfg = cfg.replace(run=run).validate()
    except (OSError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    np.random.seed(cfg.run.seed % 2**32)
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.ini")
    try:
        rep = EXPERIMENTS[args.command](cfg)
    except InfeasibleSweep as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    write_manifest(cfg, [rep], out / f"{rep.name}_manifest.json")
    for k in sorted(rep.summary):
        print(f"{k} = {rep.summary[k]}")
    for k in sorted(rep.checks):
        print(f"check {k}: {'PASS' if rep.checks[k] else 'FAIL'}")
    if not rep.complete:
        print("incomplete: some jobs failed, see the log", file=sys.stderr)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
