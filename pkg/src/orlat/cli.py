"""Command line entry point ``orlat``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load
from .errors import ConfigInvalid, OrlatError, WeightSpecError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("orlat")

_HELP = {
    "theta": "solve the mean-field equation for theta and the limit survival",
    "fgrid": "finite-d branching extinction profile F_d(s)",
    "branching": "Monte Carlo survival of the branching process on the d-ary tree",
    "sir": "Monte Carlo survival of the SIR generations on the lattice",
    "contact": "Monte Carlo survival of the contact process on the lattice",
    "couple": "coupling success frequency of lattice and tree generations",
    "gap": "extinction-probability gap between contact layers and SIR generations",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--out", default=None, help="output directory (default from config)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    p.add_argument("--log", action="store_true", help="write a per-replica CSV log")
    p.add_argument("--quenched", type=int, default=None, metavar="SEED",
                   help="freeze one environment seed across replicas")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orlat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in _HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "fgrid":
            p.add_argument("--d", type=int, action="append", dest="dims",
                           help="dimension (repeatable; overrides the config list)")
    rw = sub.add_parser("rwalk", help="oriented random walk collisions")
    rsub = rw.add_subparsers(dest="mode", required=True)
    for mode, text in (("collide", "collision probability of a walk pair"),
                       ("bound", "second-moment survival lower bound")):
        p = rsub.add_parser(mode, help=text, description=text)
        _common(p)
        p.add_argument("--dump", action="store_true", help="write per-record CSV (bound mode)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .harness import run_experiment

    process = "rwalk" if args.command == "rwalk" else args.command
    try:
        cfg = load(args.config, process)
        if process == "rwalk":
            cfg = cfg.with_overrides(options=dict(cfg.options, mode=args.mode))
        cfg = cfg.with_overrides(master_seed=args.seed)
        if getattr(args, "dims", None):
            cfg = cfg.with_overrides(ds=tuple(args.dims))
        if args.jobs < 1:
            raise ConfigInvalid("--jobs must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigInvalid("--seed must be non-negative")
    except (ConfigInvalid, WeightSpecError) as exc:
        print(f"orlat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(cfg, args.out, args.jobs, args.log, args.quenched,
                                 getattr(args, "dump", False))
    except ConfigInvalid as exc:
        print(f"orlat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OrlatError, OSError, ValueError, RuntimeError) as exc:
        print(f"orlat: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
