"""Command-line entry point: ``intraday-alpha {backtest,report,synth,dump-features}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 failure while running.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import features as ft
from .backtest import BacktestResult, ReturnSeries, run_backtest
from .config import FIELD_TYPES, RunConfig, coerce, load_config
from .errors import CalendarTooShort, ConfigError, IntradayAlphaError, PanelError, SeriesTooShort
from .market_data import load_panel, write_panel
from .metrics import MetricsReport, wealth_curve
from .models.base import save_model
from .study_periods import load_membership, periods_for_panel
from .synth import SynthParams, make_panel

logger = logging.getLogger("intraday_alpha")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ValidationFailure(Exception):
    """Bad input detected before any computation."""


# ---------------------------------------------------------------- outputs


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_json(obj, path) -> None:
    text = json.dumps(_clean(obj), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def reports_for(series: ReturnSeries) -> dict:
    return {"gross": series.report("gross").as_dict(), "net": series.report("net").as_dict()}


def write_reports(series: ReturnSeries, out: Path) -> dict:
    reps = reports_for(series)
    write_json(reps, out / "report.json")
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "gross", "net"))
        for name in MetricsReport.field_names():
            w.writerow((name, _fmt(reps["gross"][name]), _fmt(reps["net"][name])))
    return reps


def _fmt(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def rolling(values: np.ndarray, window: int, fn) -> np.ndarray:
    if len(values) < window:
        return np.empty(0)
    win = np.lib.stride_tricks.sliding_window_view(values, window)
    return fn(win)


def _rolling_sharpe(win: np.ndarray) -> np.ndarray:
    sd = win.std(axis=1, ddof=1)
    mu = win.mean(axis=1)
    out = np.full(len(win), np.nan)
    ok = sd > 0
    out[ok] = mu[ok] / sd[ok] * math.sqrt(252)
    return out


def write_plot_series(series: ReturnSeries, out: Path, window: int) -> None:
    """Wealth curve (starting at 1 the day before the first trade) and rolling statistics."""
    dates = [str(d) for d in series.dates]
    gw, nw = wealth_curve(series.gross)[1:], wealth_curve(series.net)[1:]
    _write_columns(out / "wealth.csv", ("date", "gross_wealth", "net_wealth"), dates, gw, nw)
    for name, fn in (("rolling_mean", lambda w: w.mean(axis=1)), ("rolling_sharpe", _rolling_sharpe)):
        g = rolling(series.gross, window, fn)
        n = rolling(series.net, window, fn)
        _write_columns(out / f"{name}.csv", ("date", "gross", "net"), dates[window - 1:], g, n)


def _write_columns(path, header, dates, *cols) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, d in enumerate(dates):
            w.writerow((d, *(_fmt(float(c[i])) for c in cols)))


def timing_summary(result: BacktestResult, total_seconds: float) -> dict:
    per = [asdict(t) for t in result.timing]
    epochs = [s for t in result.timing for s in t.epoch_seconds]
    days = sum(t.trade_days for t in result.timing)
    return {
        "periods": per,
        "total_fit_seconds": sum(t.fit_seconds for t in result.timing),
        "mean_epoch_seconds": float(np.mean(epochs)) if epochs else None,
        "mean_decision_seconds_per_day": (
            sum(t.decision_seconds_per_day * t.trade_days for t in result.timing) / days if days else None
        ),
        "wall_seconds": total_seconds,
    }


# ---------------------------------------------------------------- commands


def _prepare(cfg: RunConfig):
    try:
        cfg.validate()
        panel = load_panel(cfg.panel)
        membership = load_membership(cfg.membership) if cfg.membership else None
    except (ConfigError, PanelError, OSError) as exc:
        raise ValidationFailure(str(exc)) from exc
    if cfg.start or cfg.end:
        panel = panel.restrict_dates(cfg.start, cfg.end)
    try:
        periods = periods_for_panel(panel, membership, cfg.window_days, cfg.stride_days, cfg.train_days)
    except (ConfigError, CalendarTooShort) as exc:
        raise ValidationFailure(str(exc)) from exc
    return panel, periods


def cmd_backtest(cfg: RunConfig) -> int:
    panel, periods = _prepare(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("panel: %d days x %d stocks, %d study periods", panel.n_days, panel.n_stocks, len(periods))
    t0 = time.perf_counter()
    result = run_backtest(panel, periods, cfg.classifier_spec(), cfg.strategy(), cache_dir=cfg.cache_dir,
                          model_sink=(out / "models") if cfg.save_models else None)
    total = time.perf_counter() - t0
    if len(result.series) < 2:
        raise SeriesTooShort(f"backtest produced only {len(result.series)} trading days")
    result.series.write_csv(out / "returns.csv", out / "legs.csv")
    reps = write_reports(result.series, out)
    write_plot_series(result.series, out, cfg.rolling_window)
    write_json(timing_summary(result, total), out / "timing.json")
    (out / "config.cfg").write_text(cfg.to_text(), encoding="utf-8")
    g, n = reps["gross"], reps["net"]
    print(f"{len(result.series)} trading days; mean gross {g['mean_return']:.5f}, net {n['mean_return']:.5f}; "
          f"sharpe gross {_fmt(g['sharpe'])}; outputs in {out}")
    return EXIT_OK


def cmd_report(returns_path: str, start: Optional[str], end: Optional[str], out: Optional[str]) -> int:
    path = Path(returns_path)
    if not path.is_file():
        raise ValidationFailure(f"returns file not found: {path}")
    legs = path.with_name("legs.csv")
    try:
        series = ReturnSeries.read_csv(path, legs if legs.is_file() else None)
    except (ValueError, KeyError) as exc:
        raise ValidationFailure(f"cannot read {path}: {exc}") from exc
    sliced = series.filter(start, end)
    if len(sliced) < 2:
        raise SeriesTooShort(f"date filter leaves {len(sliced)} trading days; need at least 2")
    dest = Path(out) if out else path.parent
    dest.mkdir(parents=True, exist_ok=True)
    reps = write_reports(sliced, dest)
    print(f"{len(sliced)} trading days {sliced.dates[0]}..{sliced.dates[-1]}; "
          f"mean gross {reps['gross']['mean_return']:.5f}; report in {dest}")
    return EXIT_OK


def cmd_synth(params: SynthParams, out: str) -> int:
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    panel = make_panel(params)
    write_panel(panel, path)
    print(f"wrote {panel.n_days} days x {panel.n_stocks} stocks to {path}")
    return EXIT_OK


def cmd_dump_features(cfg: RunConfig, period_index: int) -> int:
    """Forest features of every universe stock for every featurisable day of one period."""
    panel, periods = _prepare(cfg)
    if not 0 <= period_index < len(periods):
        raise ValidationFailure(f"period {period_index} out of range (panel has {len(periods)})")
    period = periods[period_index]
    start, stop = period.full_range.start, period.full_range.stop
    dest = Path(cfg.out)
    dest.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("ticker", "date", *ft.FEATURE_NAMES))
        for s in period.universe:
            f = ft.forest_feature_matrix(panel.open[start:stop, s], panel.close_adj[start:stop, s])
            for t in range(ft.FIRST_FEATURE_DAY, stop - start):
                if np.isnan(f[t]).any():
                    continue
                w.writerow((panel.tickers[s], str(panel.dates[start + t]), *(repr(float(v)) for v in f[t])))
                rows += 1
    print(f"wrote {rows} feature rows for period {period_index} to {dest}")
    return EXIT_OK


# ---------------------------------------------------------------- parsing


def _add_run_flags(p: argparse.ArgumentParser, skip=()) -> None:
    p.add_argument("--config", help="flat key = value config file")
    for name, kind in FIELD_TYPES.items():
        if name in skip:
            continue
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        extra = {"choices": ("forest", "lstm")} if name == "model" else {}
        p.add_argument(*flags, dest=name, default=None, metavar=name.upper(), help=f"override {name} ({kind})",
                       **extra)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intraday-alpha", description="Intraday long-short backtests.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("backtest", help="walk-forward backtest, writes returns and reports"))

    rp = sub.add_parser("report", help="recompute reports from returns.csv over a date range")
    rp.add_argument("returns", help="path to returns.csv")
    rp.add_argument("--start")
    rp.add_argument("--end")
    rp.add_argument("--out", help="output directory (default: alongside returns.csv)")

    sp = sub.add_parser("synth", help="write a synthetic panel CSV")
    defaults = SynthParams()
    for f in fields(SynthParams):
        sp.add_argument(f"--{f.name.replace('_', '-')}", f"--{f.name}", dest=f.name,
                        type=type(getattr(defaults, f.name)), default=getattr(defaults, f.name))
    sp.add_argument("--out", required=True, help="panel CSV path")

    dp = sub.add_parser("dump-features", help="write the forest feature matrix of one period")
    _add_run_flags(dp)
    dp.add_argument("--period", type=int, default=0)
    return parser


def _run_config(args) -> RunConfig:
    overrides = {}
    for name in FIELD_TYPES:
        raw = getattr(args, name, None)
        if raw is not None:
            overrides[name] = coerce(name, raw)
    return load_config(args.config, overrides)


def _dispatch(args) -> int:
    if args.command == "backtest":
        return cmd_backtest(_run_config(args))
    if args.command == "report":
        return cmd_report(args.returns, args.start, args.end, args.out)
    if args.command == "synth":
        params = SynthParams(**{f.name: getattr(args, f.name) for f in fields(SynthParams)})
        return cmd_synth(params, args.out)
    cfg = _run_config(args)
    if getattr(args, "out", None) is None:
        raise ValidationFailure("dump-features needs --out FILE")
    return cmd_dump_features(cfg, args.period)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _dispatch(args)
    except (ValidationFailure, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SeriesTooShort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if args.command == "report" else EXIT_RUNTIME
    except (IntradayAlphaError, ValueError, OSError, MemoryError) as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
