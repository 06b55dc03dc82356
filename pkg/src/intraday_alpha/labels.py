"""Binary targets: does a stock beat the cross-sectional median intraday return?"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from .errors import EmptyUniverse
from .market_data import PricePanel


@dataclass(frozen=True)
class LabeledDay:
    day_index: int
    median_ir: float
    labels: Dict[int, int]


def rank_labels(returns: Sequence[float], tiebreak: Sequence = None) -> np.ndarray:
    """Label the lower half 0 and the upper half 1.

    Stocks are ordered by ``(return, tiebreak)`` ascending and the first
    ``n // 2`` get label 0, so the classes never differ by more than one
    and exact ties at the median are split deterministically.
    """
    r = np.asarray(returns, dtype=np.float64)
    n = len(r)
    if n == 0:
        raise EmptyUniverse("no stocks to label")
    secondary = np.arange(n) if tiebreak is None else np.asarray(tiebreak)
    order = np.lexsort((secondary, r))
    out = np.ones(n, dtype=np.int8)
    out[order[: n // 2]] = 0
    return out


def label_day(panel: PricePanel, universe: Sequence[int], t: int) -> LabeledDay:
    """Label the universe stocks that have data on day ``t``.

    Stocks with a missing cell at ``t`` are left out of both the median and
    the label map.
    """
    stocks = [s for s in universe if not np.isnan(panel.open[t, s])]
    if not stocks:
        raise EmptyUniverse(f"no stock in the universe has data on day {t}")
    ir = panel.close_adj[t, stocks] / panel.open[t, stocks] - 1.0
    # tickers are stored sorted in the panel, so the index is the ticker order
    lab = rank_labels(ir, tiebreak=np.asarray(stocks))
    return LabeledDay(t, float(np.median(ir)), {s: int(v) for s, v in zip(stocks, lab)})


def label_matrix(op: np.ndarray, cp: np.ndarray) -> np.ndarray:
    """Labels for a ``(T, S)`` block where every cell is present.

    Columns must be in ticker order; each row is labelled independently.
    """
    ir = cp / op - 1.0
    n = ir.shape[1]
    if n == 0:
        raise EmptyUniverse("no stocks to label")
    # stable sort keeps column order among equal returns
    order = np.argsort(ir, axis=1, kind="stable")
    out = np.ones(ir.shape, dtype=np.int8)
    rows = np.arange(ir.shape[0])[:, None]
    out[rows, order[:, : n // 2]] = 0
    return out
