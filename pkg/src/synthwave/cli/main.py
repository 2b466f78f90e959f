"""``synthwave <command> --scenario PATH [--seed N] [--out DIR] [--format csv|json]``."""
from __future__ import annotations

import argparse
import sys
import traceback

from ..errors import SynthwaveError
from .commands import COMMANDS, run
from .report import write_report
from .scenario import parse_scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synthwave",
                                description="Synthetic multi-wave mixing: synthesis, simulation "
                                            "and photon-counting analysis.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, help="scenario file (TOML)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--allow-unknown", action="store_true",
                   help="ignore unknown scenario keys instead of rejecting them")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = parse_scenario(args.scenario, strict=not args.allow_unknown)
        if args.seed is not None:
            if args.seed < 0:
                raise SynthwaveError("seed must be nonnegative")
            scn = scn.with_seed(args.seed)
        report = run(args.command, scn)
        paths = write_report(report, args.out, args.format)
    except SynthwaveError as exc:
        print(f"synthwave: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        traceback.print_exc()
        return 4
    for name, t in report.tables.items():
        print(f"{name}: {len(t.rows)} rows")
    for p in paths:
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
