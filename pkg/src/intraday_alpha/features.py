"""Lagged return features and the per-stock robust scaler.

Three return families are computed for every lag ``m``:

* intraday        ``ir[t, m] = cp[t-m] / op[t-m] - 1``
* close-to-close  ``cr[t, m] = cp[t-1] / cp[t-1-m] - 1``
* open-relative   ``or[t, m] = op[t] / cp[t-m] - 1``

A feature for day ``t`` only ever reads the opening price of day ``t`` and
closes up to ``t - 1``.  Day indices are 0-based positions in whatever
panel (usually one study-period slice) is passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, InsufficientData, MissingData
from .market_data import PricePanel

LAGS = tuple(range(1, 21)) + tuple(range(40, 241, 20))
FAMILIES = ("ir", "cr", "or")
N_FOREST_FEATURES = len(FAMILIES) * len(LAGS)
SEQUENCE_LENGTH = 240
# deepest read is cp[t - 1 - 240]
FIRST_FEATURE_DAY = 1 + max(LAGS)
FEATURE_NAMES = tuple(f"{fam}_{m}" for fam in FAMILIES for m in LAGS)


def _cell(panel: PricePanel, which: str, day: int, s: int) -> float:
    if day < 0 or day >= panel.n_days or not 0 <= s < panel.n_stocks:
        raise IndexOutOfRange(f"day {day}, stock {s} outside panel")
    x = getattr(panel, which)[day, s]
    if math.isnan(x):
        raise MissingData(f"{which} missing for stock {panel.tickers[s]} at day {day}")
    return float(x)


def intraday_return(panel: PricePanel, s: int, t: int, m: int) -> float:
    return _cell(panel, "close_adj", t - m, s) / _cell(panel, "open", t - m, s) - 1.0


def close_return(panel: PricePanel, s: int, t: int, m: int) -> float:
    if t - 1 - m < 0:
        raise IndexOutOfRange(f"close return at t={t} with lag {m} reads before day 0")
    return _cell(panel, "close_adj", t - 1, s) / _cell(panel, "close_adj", t - 1 - m, s) - 1.0


def open_return(panel: PricePanel, s: int, t: int, m: int) -> float:
    return _cell(panel, "open", t, s) / _cell(panel, "close_adj", t - m, s) - 1.0


def forest_features(panel: PricePanel, s: int, t: int, lags=LAGS) -> np.ndarray:
    """93 raw returns for one (stock, day): ``[ir lags | cr lags | or lags]``."""
    if t < 1 + max(lags):
        raise IndexOutOfRange(f"day {t} lacks the {1 + max(lags)}-day history the lag set needs")
    out = [intraday_return(panel, s, t, m) for m in lags]
    out += [close_return(panel, s, t, m) for m in lags]
    out += [open_return(panel, s, t, m) for m in lags]
    return np.array(out)


def _shift(x: np.ndarray, k: int) -> np.ndarray:
    """``y[t] = x[t - k]`` along axis 0, NaN where ``t - k < 0``."""
    y = np.full_like(x, np.nan)
    if k < len(x):
        y[k:] = x[: len(x) - k]
    return y


def forest_feature_matrix(op: np.ndarray, cp: np.ndarray, lags=LAGS) -> np.ndarray:
    """Vectorised forest features for every day.

    ``op`` and ``cp`` are ``(T,)`` or ``(T, S)``; the result has an extra
    trailing axis of ``3 * len(lags)`` values and is NaN wherever a value
    is undefined (including every day before ``1 + max(lags)``).
    """
    op = np.asarray(op, dtype=np.float64)
    cp = np.asarray(cp, dtype=np.float64)
    intraday = cp / op - 1.0
    prev_close = _shift(cp, 1)
    blocks = []
    blocks += [_shift(intraday, m) for m in lags]
    blocks += [prev_close / _shift(cp, 1 + m) - 1.0 for m in lags]
    blocks += [op / _shift(cp, m) - 1.0 for m in lags]
    out = np.stack(blocks, axis=-1)
    out[: 1 + max(lags)] = np.nan
    return out


def unit_lag_features(op: np.ndarray, cp: np.ndarray) -> np.ndarray:
    """``(ir, cr, or)`` at lag 1 for every day, NaN where undefined."""
    op = np.asarray(op, dtype=np.float64)
    cp = np.asarray(cp, dtype=np.float64)
    prev_close = _shift(cp, 1)
    ir = _shift(cp / op - 1.0, 1)
    cr = prev_close / _shift(cp, 2) - 1.0
    orr = op / prev_close - 1.0
    return np.stack([ir, cr, orr], axis=-1)


@dataclass(frozen=True)
class ScalerParams:
    """Quartiles per feature kind; ``q[k] = (q1, q2, q3)`` for kind ``k`` in ``FAMILIES``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64).reshape(len(FAMILIES), 3)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def q1(self):
        return self.q[:, 0]

    @property
    def q2(self):
        return self.q[:, 1]

    @property
    def q3(self):
        return self.q[:, 2]


def quartiles(x) -> tuple:
    """Q1, median, Q3 with linear interpolation between order statistics."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 4:
        raise InsufficientData(f"need at least 4 observations for quartiles, got {len(x)}")
    q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    return float(q1), float(q2), float(q3)


def fit_scaler_arrays(op: np.ndarray, cp: np.ndarray, train_range: range) -> ScalerParams:
    f = unit_lag_features(op, cp)[train_range.start:train_range.stop]
    rows = []
    for k in range(len(FAMILIES)):
        col = f[:, k]
        rows.append(quartiles(col[~np.isnan(col)]))
    return ScalerParams(np.array(rows))


def fit_scaler(panel: PricePanel, s: int, train_range: range) -> ScalerParams:
    """Quartiles of the stock's three lag-1 features over the training days."""
    if len(train_range) == 0:
        raise InsufficientData("empty training range")
    window = slice(train_range.start, train_range.stop)
    if np.isnan(panel.open[window, s]).any():
        raise MissingData(f"stock {panel.tickers[s]} incomplete over training range")
    return fit_scaler_arrays(panel.open[:, s], panel.close_adj[:, s], train_range)


def _scale(params: ScalerParams, values: np.ndarray) -> np.ndarray:
    iqr = params.q3 - params.q1
    safe = np.where(iqr > 0, iqr, 1.0)
    return np.where(iqr > 0, (values - params.q2) / safe, 0.0)


def apply_scaler(params: ScalerParams, value: float, feature_kind) -> float:
    """Robust-scale one value; a zero interquartile range maps everything to 0."""
    k = FAMILIES.index(feature_kind) if isinstance(feature_kind, str) else int(feature_kind)
    q1, q2, q3 = params.q[k]
    if q3 - q1 == 0:
        return 0.0
    return (value - q2) / (q3 - q1)


def scale_unit_lag(params: ScalerParams, features: np.ndarray) -> np.ndarray:
    """Apply one stock's scaler to an array whose last axis is ``(ir, cr, or)``."""
    return _scale(params, np.asarray(features, dtype=np.float64))


def lstm_sequence(panel: PricePanel, s: int, t: int, params: ScalerParams) -> np.ndarray:
    """``(240, 3)`` scaled lag-1 features for days ``t-239 .. t``, oldest first."""
    first = t - SEQUENCE_LENGTH + 1
    if first < 2:
        raise IndexOutOfRange(f"day {t} lacks the history for a {SEQUENCE_LENGTH}-step sequence")
    if t >= panel.n_days:
        raise IndexOutOfRange(f"day {t} outside panel")
    lo = first - 2
    op = panel.open[lo : t + 1, s]
    cp = panel.close_adj[lo : t + 1, s]
    # cp[t] is never read
    if np.isnan(op).any() or np.isnan(cp[:-1]).any():
        raise MissingData(f"missing prices for stock {panel.tickers[s]} in sequence ending at day {t}")
    raw = unit_lag_features(op, cp)[2:]
    return scale_unit_lag(params, raw)
