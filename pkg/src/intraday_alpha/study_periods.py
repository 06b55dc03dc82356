"""Walk-forward study periods: fixed-length windows advanced by a fixed stride."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import CalendarTooShort, ConfigError, MalformedRow
from .market_data import PricePanel, complete_history

WINDOW_DAYS = 1008
STRIDE_DAYS = 252
TRAIN_DAYS = 756


@dataclass(frozen=True)
class StudyPeriod:
    """One fold. Ranges are absolute day indices into the panel calendar."""

    index: int
    full_range: range
    train_range: range
    trade_range: range
    universe: Tuple[int, ...] = ()

    @property
    def start(self) -> int:
        return self.full_range.start

    @property
    def length(self) -> int:
        return len(self.full_range)

    def with_universe(self, universe) -> "StudyPeriod":
        return StudyPeriod(self.index, self.full_range, self.train_range, self.trade_range, tuple(universe))


def validate_period_params(window_days: int, stride_days: int, train_days: int) -> None:
    if window_days <= train_days:
        raise ConfigError(f"window_days ({window_days}) must exceed train_days ({train_days})")
    if stride_days < 1:
        raise ConfigError("stride_days must be >= 1")
    if train_days < 1:
        raise ConfigError("train_days must be >= 1")
    if stride_days < window_days - train_days:
        raise ConfigError("stride_days shorter than the trade window would overlap trade ranges")


def generate_periods(
    calendar,
    window_days: int = WINDOW_DAYS,
    stride_days: int = STRIDE_DAYS,
    train_days: int = TRAIN_DAYS,
) -> List[StudyPeriod]:
    """Split a calendar into walk-forward folds.

    ``calendar`` is anything with a length (a date array or a day count).
    Folds start at offsets ``0, stride, 2*stride, ...``; the last one may be
    shorter than ``window_days`` as long as its trade part is non-empty.
    """
    validate_period_params(window_days, stride_days, train_days)
    n = calendar if isinstance(calendar, (int, np.integer)) else len(calendar)
    if n < window_days:
        raise CalendarTooShort(f"calendar has {n} days, need at least {window_days}")
    periods = []
    offset = 0
    while offset + train_days < n:
        stop = min(offset + window_days, n)
        periods.append(
            StudyPeriod(
                index=len(periods),
                full_range=range(offset, stop),
                train_range=range(offset, offset + train_days),
                trade_range=range(offset + train_days, stop),
            )
        )
        offset += stride_days
    return periods


@dataclass
class ConstituencyTable:
    """Date-range index memberships: ticker -> list of inclusive (start, end)."""

    spans: Dict[str, List[Tuple[dt.date, dt.date]]] = field(default_factory=dict)

    def is_member(self, ticker: str, date) -> bool:
        d = _as_date(date)
        return any(lo <= d <= hi for lo, hi in self.spans.get(ticker, ()))

    def members(self, date) -> set:
        d = _as_date(date)
        return {t for t, spans in self.spans.items() if any(lo <= d <= hi for lo, hi in spans)}


def _as_date(date) -> dt.date:
    if isinstance(date, dt.date):
        return date
    return np.datetime64(date, "D").astype(dt.date)


def load_membership(path) -> ConstituencyTable:
    """Read a ``ticker,start_date,end_date`` CSV (inclusive ranges)."""
    table = ConstituencyTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header != ("ticker", "start_date", "end_date"):
            raise MalformedRow("membership header must be ticker,start_date,end_date")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise MalformedRow(f"line {lineno}: expected 3 fields")
            try:
                lo = dt.date.fromisoformat(row[1].strip())
                hi = dt.date.fromisoformat(row[2].strip())
            except ValueError:
                raise MalformedRow(f"line {lineno}: bad date") from None
            if hi < lo:
                raise MalformedRow(f"line {lineno}: end_date before start_date")
            table.spans.setdefault(row[0].strip(), []).append((lo, hi))
    return table


def build_universe(
    panel: PricePanel, period: StudyPeriod, membership: Optional[ConstituencyTable] = None
) -> List[int]:
    """Stocks that are members on the last training day and complete over the window.

    Without a membership table every panel ticker counts as a member.
    """
    last_train = panel.dates[period.train_range.stop - 1]
    members = None if membership is None else membership.members(last_train)
    out = []
    for s, ticker in enumerate(panel.tickers):
        if members is not None and ticker not in members:
            continue
        if complete_history(panel, s, period.full_range):
            out.append(s)
    return out


def periods_for_panel(
    panel: PricePanel,
    membership: Optional[ConstituencyTable] = None,
    window_days: int = WINDOW_DAYS,
    stride_days: int = STRIDE_DAYS,
    train_days: int = TRAIN_DAYS,
) -> List[StudyPeriod]:
    periods = generate_periods(panel.dates, window_days, stride_days, train_days)
    return [p.with_universe(build_universe(panel, p, membership)) for p in periods]
