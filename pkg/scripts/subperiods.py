"""Split a backtest's returns.csv into consecutive date ranges and report each.

    python3 scripts/subperiods.py runs/demo/returns.csv --cuts 2003-06-30 2004-12-31
"""

import argparse
import datetime as dt
from pathlib import Path

from intraday_alpha.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("returns")
    ap.add_argument("--cuts", nargs="+", required=True, help="last date of every range but the final one")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    out = Path(args.out) if args.out else Path(args.returns).parent / "subperiods"
    bounds = [None] + args.cuts + [None]
    for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        start = (dt.date.fromisoformat(lo) + dt.timedelta(days=1)).isoformat() if lo else None
        argv = ["report", args.returns, "--out", str(out / f"part_{i}")]
        argv += ["--start", start] if start else []
        argv += ["--end", hi] if hi else []
        if cli_main(argv) != 0:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
