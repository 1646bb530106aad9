"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from flyqubit import __version__
from flyqubit.config import load, loads
from flyqubit.errors import ConfigError, FlyQubitError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

FIG2_CONFIG = """\
scenario = "fig2"
units = "natural"
tiers = ["clock", "perturbative", "grid"]
output = "fig2.csv"

[fig2]
"""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flyqubit", description="Decoherence of flying quantum systems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="CSV path (overrides the config)")

    s = sub.add_parser("sweep", help="vary one scenario field")
    s.add_argument("config")
    s.add_argument("--axis", help="field of the scenario table (default: the config's [sweep] axis)")
    s.add_argument("--values", nargs="*", help="values, bare numbers inherit the field's unit")
    s.add_argument("--workers", type=int, help="worker processes")
    s.add_argument("-o", "--output")

    v = sub.add_parser("validate", help="check a config and print diagnostics without running")
    v.add_argument("config")

    t = sub.add_parser("table", help="print a derived table")
    t.add_argument("which", choices=["trapped"])
    t.add_argument("-o", "--output", help="also write CSV")

    f = sub.add_parser("fig2", help="run the reference Gaussian-potential flight with all tiers")
    f.add_argument("-o", "--output", default="fig2.csv")
    f.add_argument("--tiers", nargs="+", choices=["clock", "perturbative", "grid"])
    return p


def _run(args) -> int:
    # imported here so that `flyqubit --help` stays fast
    from flyqubit import experiments as ex

    if args.command == "run":
        cfg = load(args.config)
        meta = ex.run(cfg, args.output)
        print(f"wrote {args.output or cfg.output} (epsilon = {meta.get('epsilon', float('nan')):.4g})"
              if "epsilon" in meta else f"wrote {args.output or cfg.output}")
    elif args.command == "fig2":
        text = FIG2_CONFIG
        if args.tiers:
            text = text.replace('tiers = ["clock", "perturbative", "grid"]',
                                "tiers = [" + ", ".join(f'"{t}"' for t in args.tiers) + "]")
        cfg = loads(text, "<fig2>")
        meta = ex.run(cfg, args.output)
        print(f"wrote {args.output} (epsilon = {meta['epsilon']:.4g})")
    elif args.command == "sweep":
        cfg = load(args.config)
        sw = cfg.sweep or {}
        axis = args.axis or sw.get("axis")
        values = args.values if args.values is not None else sw.get("values")
        if not axis:
            raise ConfigError(f"{cfg.source}: no sweep axis given (use --axis or a [sweep] table)")
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        rows = ex.sweep(cfg, axis, values or [], workers, args.output)
        failed = sum(1 for r in rows if r.get("error"))
        print(f"wrote {args.output or cfg.output}: {len(rows)} points, {failed} failed")
    elif args.command == "validate":
        cfg = load(args.config)
        checks = ex.validate(cfg)
        for c in checks:
            print(f"{c.status.upper():5s} {c.name}: {c.detail}")
        if any(c.status == "fail" for c in checks):
            return EXIT_CONFIG
    elif args.command == "table":
        rows = ex.trapped_table(args.output)
        print(f"{'regime':10s} {'delta_x [m]':>12s} {'v0 [m/s]':>10s} {'tau [s]':>10s} "
              f"{'harmonic':>11s} {'box':>11s}")
        for r in rows:
            print(f"{r['name']:10s} {r['delta_x_m']:12.3g} {r['v0_m_per_s']:10.3g} {r['tau_s']:10.3g} "
                  f"{r['bound_harmonic']:11.4g} {r['bound_box']:11.4g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlyQubitError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
