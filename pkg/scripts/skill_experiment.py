"""Planted-signal vs signal-free backtests on synthetic panels.

    python3 scripts/skill_experiment.py --stocks 100 --years 6 --trees 100 --controls 5
"""

import argparse
import math

from intraday_alpha.backtest import StrategyConfig, run_backtest
from intraday_alpha.models import ClassifierSpec
from intraday_alpha.study_periods import periods_for_panel
from intraday_alpha.synth import SynthParams, make_panel


def run(phi, seed, args):
    panel = make_panel(SynthParams(n_stocks=args.stocks, n_years=args.years, phi=phi, seed=seed))
    spec = ClassifierSpec(kind=args.model, n_trees=args.trees, max_epochs=args.epochs, seed=seed)
    series = run_backtest(panel, periods_for_panel(panel), spec, StrategyConfig(k=args.k)).series
    g = series.gross
    t = g.mean() / (g.std(ddof=1) / math.sqrt(len(g)))
    rep = series.report("net")
    print(f"phi={phi:.2f} seed={seed}: {len(g)} days, mean gross {g.mean():.5f}, t={t:6.2f}, "
          f"net sharpe {rep.sharpe:.2f}")
    return t


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--stocks", type=int, default=100)
    ap.add_argument("--years", type=int, default=6)
    ap.add_argument("--phi", type=float, default=0.3)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--model", choices=("forest", "lstm"), default="forest")
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--controls", type=int, default=5)
    args = ap.parse_args()
    run(args.phi, 0, args)
    ts = [run(0.0, seed, args) for seed in range(1, args.controls + 1)]
    print(f"controls with |t| < 2: {sum(abs(t) < 2 for t in ts)} of {len(ts)}")


if __name__ == "__main__":
    main()
