"""Date x stock panel of opening prices, adjusted closes and volumes.

Missing observations are stored explicitly as NaN in every matrix so that
positional lag arithmetic stays valid.  A cell is either fully present
(open, close and volume) or fully missing.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateObservation,
    IndexOutOfRange,
    MalformedRow,
    NonPositivePrice,
    PanelError,
)

logger = logging.getLogger(__name__)

CSV_HEADER = ("date", "ticker", "open", "close_adj", "volume")
PANEL_FORMATS = ("csv_long",)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned panel; matrices are ``[day, stock]`` with NaN for missing cells."""

    dates: np.ndarray  # datetime64[D], strictly increasing
    tickers: tuple
    open: np.ndarray
    close_adj: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if dates.ndim != 1:
            raise PanelError("dates must be one-dimensional")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise PanelError("calendar must be strictly increasing")
        tickers = tuple(str(t) for t in self.tickers)
        for t in tickers:
            if not t or any(c.isspace() for c in t):
                raise PanelError(f"invalid ticker {t!r}")
        if len(set(tickers)) != len(tickers):
            raise PanelError("tickers must be unique")
        if list(tickers) != sorted(tickers):
            # stock index order doubles as the ticker tie-break order downstream
            raise PanelError("tickers must be sorted")
        shape = (len(dates), len(tickers))
        arrays = {}
        for name in ("open", "close_adj", "volume"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != shape:
                raise PanelError(f"{name} has shape {a.shape}, expected {shape}")
            arrays[name] = a
        missing = (
            np.isnan(arrays["open"]) | np.isnan(arrays["close_adj"]) | np.isnan(arrays["volume"])
        )
        partial = missing & ~(
            np.isnan(arrays["open"]) & np.isnan(arrays["close_adj"]) & np.isnan(arrays["volume"])
        )
        if partial.any():
            logger.warning("promoting %d partially present cells to missing", int(partial.sum()))
            for name in arrays:
                arrays[name] = np.where(missing, np.nan, arrays[name])
        for name in ("open", "close_adj"):
            a = arrays[name]
            if np.any(a[~missing] <= 0):
                raise NonPositivePrice(f"{name} contains non-positive prices")
        if np.any(arrays["volume"][~missing] < 0):
            raise PanelError("volume contains negative values")
        dates = dates.copy()
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tickers)
        for name, a in arrays.items():
            object.__setattr__(self, name, _freeze(a))

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.open)

    @property
    def tradable_mask(self) -> np.ndarray:
        return self.present & (np.nan_to_num(self.volume, nan=0.0) > 0)

    def ticker_index(self, ticker: str) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise KeyError(ticker) from None

    def date_index(self, date) -> int:
        d = np.datetime64(date, "D")
        i = int(np.searchsorted(self.dates, d))
        if i >= self.n_days or self.dates[i] != d:
            raise KeyError(str(date))
        return i

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.dates.astype("int64").tobytes())
        h.update("\x1f".join(self.tickers).encode("utf-8"))
        for a in (self.open, self.close_adj, self.volume):
            h.update(a.tobytes())
        return h.hexdigest()

    def slice_days(self, start: int, stop: int) -> "PricePanel":
        return PricePanel(
            self.dates[start:stop],
            self.tickers,
            self.open[start:stop],
            self.close_adj[start:stop],
            self.volume[start:stop],
        )

    def restrict_dates(self, start=None, end=None) -> "PricePanel":
        """Sub-panel with ``start <= date <= end`` (either bound optional)."""
        lo = 0 if start is None else int(np.searchsorted(self.dates, np.datetime64(start, "D"), "left"))
        hi = self.n_days if end is None else int(np.searchsorted(self.dates, np.datetime64(end, "D"), "right"))
        return self.slice_days(lo, hi)

    def equals(self, other: "PricePanel") -> bool:
        """Bit-equal comparison (NaN cells compare equal to NaN cells)."""
        if self.tickers != other.tickers or not np.array_equal(self.dates, other.dates):
            return False
        return all(
            np.array_equal(getattr(self, n), getattr(other, n), equal_nan=True)
            for n in ("open", "close_adj", "volume")
        )


def _check_indices(panel: PricePanel, day_index: int, stock_index: int) -> None:
    if not (0 <= day_index < panel.n_days and 0 <= stock_index < panel.n_stocks):
        raise IndexOutOfRange(f"cell ({day_index}, {stock_index}) outside {panel.n_days}x{panel.n_stocks} panel")


def tradable(panel: PricePanel, day_index: int, stock_index: int) -> bool:
    """A cell is tradable when it is present and has strictly positive volume."""
    _check_indices(panel, day_index, stock_index)
    v = panel.volume[day_index, stock_index]
    return bool(not math.isnan(panel.open[day_index, stock_index]) and v > 0)


def complete_history(panel: PricePanel, stock_index: int, date_range: range) -> bool:
    if not 0 <= stock_index < panel.n_stocks:
        raise IndexOutOfRange(f"stock index {stock_index} outside panel")
    if len(date_range) == 0:
        return True
    if date_range.start < 0 or date_range.stop > panel.n_days:
        raise IndexOutOfRange(f"range {date_range} outside calendar of {panel.n_days} days")
    return bool(panel.present[date_range.start:date_range.stop, stock_index].all())


def _parse_float(text: str, lineno: int, field: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        x = float(text)
    except ValueError:
        raise MalformedRow(f"line {lineno}: bad number {text!r} in {field}") from None
    if math.isnan(x) or math.isinf(x):
        raise MalformedRow(f"line {lineno}: non-finite {field}")
    return x


def load_panel(path, format: str = "csv_long") -> PricePanel:
    """Read a long-format CSV (``date,ticker,open,close_adj,volume``) into a panel."""
    if format not in PANEL_FORMATS:
        raise ValueError(f"unknown panel format {format!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        return _read_rows(csv.reader(fh))


def _read_rows(reader: Iterable[Sequence[str]]) -> PricePanel:
    it = iter(reader)
    try:
        header = tuple(h.strip() for h in next(it))
    except StopIteration:
        raise MalformedRow("empty file: header required") from None
    if header != CSV_HEADER:
        raise MalformedRow(f"header must be {','.join(CSV_HEADER)}, got {','.join(header)}")

    cells = {}
    for lineno, row in enumerate(it, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise MalformedRow(f"line {lineno}: expected 5 fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise MalformedRow(f"line {lineno}: bad date {row[0]!r}") from None
        ticker = row[1].strip()
        if not ticker or any(c.isspace() for c in ticker):
            raise MalformedRow(f"line {lineno}: bad ticker {row[1]!r}")
        o = _parse_float(row[2], lineno, "open")
        c = _parse_float(row[3], lineno, "close_adj")
        v = _parse_float(row[4], lineno, "volume")
        for name, x in (("open", o), ("close_adj", c)):
            if x <= 0:
                raise NonPositivePrice(f"line {lineno}: {name} = {x} for {ticker} on {date}")
        if v < 0:
            raise MalformedRow(f"line {lineno}: negative volume")
        key = (date, ticker)
        if key in cells:
            raise DuplicateObservation(f"line {lineno}: duplicate observation for {ticker} on {date}")
        cells[key] = (o, c, v)

    dates = sorted({d for d, _ in cells})
    tickers = sorted({t for _, t in cells})
    di = {d: i for i, d in enumerate(dates)}
    ti = {t: j for j, t in enumerate(tickers)}
    shape = (len(dates), len(tickers))
    arrays = [np.full(shape, np.nan) for _ in range(3)]
    for (d, t), values in cells.items():
        i, j = di[d], ti[t]
        for a, x in zip(arrays, values):
            a[i, j] = x
    return PricePanel(np.array(dates, dtype="datetime64[D]"), tuple(tickers), *arrays)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_panel(panel: PricePanel, path) -> None:
    """Write every cell (missing cells as empty fields) in long format."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, d in enumerate(panel.dates.astype(str)):
            for j, t in enumerate(panel.tickers):
                w.writerow((d, t, _fmt(panel.open[i, j]), _fmt(panel.close_adj[i, j]), _fmt(panel.volume[i, j])))
