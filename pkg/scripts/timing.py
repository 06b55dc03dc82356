"""Training and decision-time measurements for one study period of each model.

    python3 scripts/timing.py --stocks 100 --trees 100 --epochs 3
"""

import argparse
import json

from intraday_alpha.backtest import StrategyConfig, trade_period
from intraday_alpha.models import ClassifierSpec
from intraday_alpha.study_periods import periods_for_panel
from intraday_alpha.synth import SynthParams, make_panel


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--stocks", type=int, default=100)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    panel = make_panel(SynthParams(n_stocks=args.stocks, n_years=4, seed=args.seed))
    period = periods_for_panel(panel)[0]
    rows = {}
    for kind in ("forest", "lstm"):
        spec = ClassifierSpec(kind=kind, n_trees=args.trees, max_epochs=args.epochs, seed=args.seed)
        _, _, timing = trade_period(panel, period, spec, StrategyConfig())
        epochs = timing.epoch_seconds
        rows[kind] = {
            "fit_seconds": round(timing.fit_seconds, 3),
            "seconds_per_epoch": round(sum(epochs) / len(epochs), 3) if epochs else None,
            "decision_seconds_per_day": round(timing.decision_seconds_per_day, 6),
        }
    print(json.dumps({"stocks": args.stocks, "trees": args.trees, **rows}, indent=2))


if __name__ == "__main__":
    main()
