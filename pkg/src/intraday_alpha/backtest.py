"""Daily long-short portfolio formation and the walk-forward backtest loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import build_dataset
from .errors import ConfigError, MissingData, NoTradableStocks, SeriesTooShort
from .market_data import PricePanel
from .metrics import MetricsReport, compute_report
from .models.base import ClassifierSpec, fit, predict_proba, save_model
from .study_periods import StudyPeriod

logger = logging.getLogger(__name__)

RETURNS_HEADER = ("date", "gross_return", "net_return", "long_tickers", "short_tickers")
LEGS_HEADER = ("date", "gross_long_mean", "gross_short_mean")


@dataclass(frozen=True)
class StrategyConfig:
    k: int = 10
    cost_per_halfturn: float = 0.0005
    # four half-turns a day: open and close of both legs
    daily_total_cost: Optional[float] = None
    skip_degenerate_days: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.cost_per_halfturn < 0:
            raise ConfigError("costs must be non-negative")
        if self.daily_total_cost is None:
            object.__setattr__(self, "daily_total_cost", 4 * self.cost_per_halfturn)
        if self.daily_total_cost < 0:
            raise ConfigError("costs must be non-negative")


@dataclass(frozen=True)
class DailyResult:
    day_index: int
    long_set: Tuple[int, ...]
    short_set: Tuple[int, ...]
    gross_long_mean: float
    gross_short_mean: float
    gross_return: float
    net_return: float


def select_portfolio(probabilities: Mapping, tradable_today, k: int) -> Tuple[list, list]:
    """Long the ``k`` highest, short the ``k`` lowest probabilities among tradable stocks.

    Stocks are ranked once by ``(-probability, key)``; the long leg is the
    head of that ranking and the short leg its tail, so equal probabilities
    resolve by ticker order.  With ``u < 2k`` tradable stocks each leg gets
    ``u // 2``.
    """
    pool = [s for s in probabilities if s in tradable_today]
    if not pool:
        raise NoTradableStocks("no tradable stock has a forecast")
    ranked = sorted(pool, key=lambda s: (-probabilities[s], s))
    kk = k
    if len(ranked) < 2 * k:
        kk = len(ranked) // 2
        logger.warning("only %d tradable stocks; using %d per leg", len(ranked), kk)
    if kk == 0:
        return [], []
    return ranked[:kk], ranked[-kk:][::-1]


def intraday_returns_at(panel: PricePanel, stocks: Sequence[int], t: int) -> np.ndarray:
    stocks = list(stocks)
    op = panel.open[t, stocks]
    cp = panel.close_adj[t, stocks]
    if np.isnan(op).any() or np.isnan(cp).any():
        bad = [panel.tickers[s] for s, a, b in zip(stocks, op, cp) if math.isnan(a) or math.isnan(b)]
        raise MissingData(f"no prices on day {t} for selected stocks {bad}")
    return cp / op - 1.0


def daily_return(panel: PricePanel, long_set, short_set, t: int, daily_total_cost: float = 0.002) -> DailyResult:
    """Equal-weight intraday return: long-leg mean plus short-leg mean, minus costs."""
    long_set, short_set = tuple(long_set), tuple(short_set)
    if set(long_set) & set(short_set):
        raise ValueError("long and short legs overlap")
    gl = float(np.mean(intraday_returns_at(panel, long_set, t))) if long_set else 0.0
    gs = float(np.mean(-intraday_returns_at(panel, short_set, t))) if short_set else 0.0
    gross = gl + gs
    return DailyResult(t, long_set, short_set, gl, gs, gross, gross - daily_total_cost)


@dataclass
class ReturnSeries:
    dates: np.ndarray  # datetime64[D]
    gross: np.ndarray
    net: np.ndarray
    gross_long: np.ndarray
    gross_short: np.ndarray
    long_tickers: List[Tuple[str, ...]]
    short_tickers: List[Tuple[str, ...]]

    def __len__(self):
        return len(self.dates)

    @classmethod
    def empty(cls) -> "ReturnSeries":
        z = np.empty(0)
        return cls(np.empty(0, dtype="datetime64[D]"), z, z, z, z, [], [])

    @classmethod
    def concat(cls, parts: Sequence["ReturnSeries"]) -> "ReturnSeries":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        out = cls(
            np.concatenate([p.dates for p in parts]),
            np.concatenate([p.gross for p in parts]),
            np.concatenate([p.net for p in parts]),
            np.concatenate([p.gross_long for p in parts]),
            np.concatenate([p.gross_short for p in parts]),
            sum((p.long_tickers for p in parts), []),
            sum((p.short_tickers for p in parts), []),
        )
        if len(out.dates) > 1 and not np.all(out.dates[1:] > out.dates[:-1]):
            raise ValueError("return series dates must be strictly increasing")
        return out

    @property
    def daily_cost(self) -> np.ndarray:
        return self.gross - self.net

    def legs(self, variant: str = "gross"):
        """Per-day (long, short) leg returns; the net variant charges half the day's cost to each leg."""
        if variant == "gross":
            return self.gross_long, self.gross_short
        half = self.daily_cost / 2.0
        return self.gross_long - half, self.gross_short - half

    def returns(self, variant: str = "gross") -> np.ndarray:
        if variant not in ("gross", "net"):
            raise ValueError("variant must be gross or net")
        return self.gross if variant == "gross" else self.net

    def report(self, variant: str = "gross", periods_per_year: int = 252) -> MetricsReport:
        lo, sh = self.legs(variant)
        return compute_report(self.returns(variant), lo, sh, periods_per_year)

    def filter(self, start=None, end=None) -> "ReturnSeries":
        keep = np.ones(len(self), dtype=bool)
        if start is not None:
            keep &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            keep &= self.dates <= np.datetime64(end, "D")
        idx = np.flatnonzero(keep)
        return ReturnSeries(
            self.dates[idx], self.gross[idx], self.net[idx], self.gross_long[idx], self.gross_short[idx],
            [self.long_tickers[i] for i in idx], [self.short_tickers[i] for i in idx],
        )

    def write_csv(self, path, legs_path=None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RETURNS_HEADER)
            for i in range(len(self)):
                w.writerow((
                    str(self.dates[i]), repr(float(self.gross[i])), repr(float(self.net[i])),
                    ";".join(self.long_tickers[i]), ";".join(self.short_tickers[i]),
                ))
        if legs_path is not None:
            with open(legs_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(LEGS_HEADER)
                for i in range(len(self)):
                    w.writerow((str(self.dates[i]), repr(float(self.gross_long[i])), repr(float(self.gross_short[i]))))

    @classmethod
    def read_csv(cls, path, legs_path=None) -> "ReturnSeries":
        dates, gross, net, longs, shorts = [], [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != RETURNS_HEADER:
                raise ValueError(f"{path}: header must be {','.join(RETURNS_HEADER)}")
            for row in reader:
                dates.append(row["date"])
                gross.append(float(row["gross_return"]))
                net.append(float(row["net_return"]))
                longs.append(tuple(t for t in row["long_tickers"].split(";") if t))
                shorts.append(tuple(t for t in row["short_tickers"].split(";") if t))
        n = len(dates)
        gl = np.full(n, np.nan)
        gs = np.full(n, np.nan)
        if legs_path is not None:
            legs = {}
            with open(legs_path, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    legs[row["date"]] = (float(row["gross_long_mean"]), float(row["gross_short_mean"]))
            for i, d in enumerate(dates):
                if d in legs:
                    gl[i], gs[i] = legs[d]
        return cls(np.array(dates, dtype="datetime64[D]"), np.array(gross), np.array(net), gl, gs, longs, shorts)


@dataclass
class PeriodTiming:
    period_index: int
    fit_seconds: float
    epochs_run: Optional[int]
    epoch_seconds: List[float]
    decision_seconds_per_day: float
    trade_days: int


@dataclass
class BacktestResult:
    series: ReturnSeries
    daily: List[DailyResult] = field(default_factory=list)
    timing: List[PeriodTiming] = field(default_factory=list)


def _degenerate(probs: Dict[int, float]) -> bool:
    vals = list(probs.values())
    return len(vals) > 1 and max(vals) == min(vals)


def trade_period(
    panel: PricePanel,
    period: StudyPeriod,
    spec: ClassifierSpec,
    strategy: StrategyConfig,
    cache_dir=None,
    model_sink=None,
) -> Tuple[ReturnSeries, List[DailyResult], PeriodTiming]:
    """Fit on the period's training rows, then trade its out-of-sample days.

    ``model_sink`` is an optional directory receiving the fitted model as JSON.
    """
    ds = build_dataset(panel, period, spec.kind, cache_dir=cache_dir)
    model = fit(spec, ds.train, period_tag=period.index)
    if model_sink is not None:
        Path(model_sink).mkdir(parents=True, exist_ok=True)
        save_model(model, Path(model_sink) / f"period_{period.index:02d}.json")
    t0 = time.perf_counter()
    probs = predict_proba(model, ds.trade)
    predict_seconds = time.perf_counter() - t0

    tmask = panel.tradable_mask
    by_day: Dict[int, Dict[int, float]] = {}
    for s, t, p in zip(ds.trade.stock_index, ds.trade.day_index, probs):
        by_day.setdefault(int(t), {})[int(s)] = float(p)

    daily, select_seconds = [], 0.0
    for t_local in sorted(by_day):
        t = ds.offset + t_local
        day_probs = by_day[t_local]
        t1 = time.perf_counter()
        tradable_today = {s for s in day_probs if tmask[t, s]}
        if not tradable_today or len(tradable_today) < 2:
            logger.warning("period %d day %s: fewer than 2 tradable stocks, not trading", period.index, panel.dates[t])
            continue
        if strategy.skip_degenerate_days and _degenerate({s: day_probs[s] for s in tradable_today}):
            logger.warning("period %d day %s: all forecasts equal, skipping", period.index, panel.dates[t])
            continue
        long_set, short_set = select_portfolio(day_probs, tradable_today, strategy.k)
        select_seconds += time.perf_counter() - t1
        daily.append(daily_return(panel, long_set, short_set, t, strategy.daily_total_cost))

    series = _series_from_daily(panel, daily)
    n_days = max(1, len(by_day))
    meta = model.metadata
    timing = PeriodTiming(
        period.index,
        float(meta.get("fit_seconds", 0.0)),
        meta.get("epochs_run"),
        list(meta.get("epoch_seconds", [])),
        (predict_seconds + select_seconds) / n_days,
        len(daily),
    )
    logger.info(
        "period %d: %d train rows, %d trade days, fit %.1fs, mean gross %.5f",
        period.index, len(ds.train), len(daily), timing.fit_seconds,
        float(series.gross.mean()) if len(series) else math.nan,
    )
    return series, daily, timing


def _series_from_daily(panel: PricePanel, daily: List[DailyResult]) -> ReturnSeries:
    if not daily:
        return ReturnSeries.empty()
    return ReturnSeries(
        panel.dates[[d.day_index for d in daily]],
        np.array([d.gross_return for d in daily]),
        np.array([d.net_return for d in daily]),
        np.array([d.gross_long_mean for d in daily]),
        np.array([d.gross_short_mean for d in daily]),
        [tuple(panel.tickers[s] for s in d.long_set) for d in daily],
        [tuple(panel.tickers[s] for s in d.short_set) for d in daily],
    )


def run_backtest(
    panel: PricePanel,
    periods: Sequence[StudyPeriod],
    spec: ClassifierSpec,
    strategy: StrategyConfig = StrategyConfig(),
    cache_dir=None,
    model_sink=None,
) -> BacktestResult:
    if not periods:
        raise SeriesTooShort("no study periods to backtest")
    parts, daily, timing = [], [], []
    for period in periods:
        if not period.universe:
            logger.warning("period %d has an empty universe; skipped", period.index)
            continue
        s, d, tm = trade_period(panel, period, spec, strategy, cache_dir, model_sink)
        parts.append(s)
        daily += d
        timing.append(tm)
    return BacktestResult(ReturnSeries.concat(parts), daily, timing)
